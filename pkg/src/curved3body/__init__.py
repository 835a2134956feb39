"""Curved 3-body problem: dynamics, relative equilibria and bifurcation sweeps."""
__version__ = "0.1.0"
