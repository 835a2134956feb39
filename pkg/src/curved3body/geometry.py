"""Constant-curvature surfaces M^2_kappa and their distance functions.

The three surfaces share the origin and are embedded in R^3 (kappa >= 0) or
Minkowski space R^{2,1} (kappa < 0):

* kappa > 0: sphere  kappa(x^2+y^2+z^2) + 2 kappa^{1/2} z = 0, centre (0,0,-R)
* kappa = 0: plane z = 0
* kappa < 0: upper sheet of kappa(x^2+y^2-z^2) + 2|kappa|^{1/2} z = 0

Every formula containing |kappa|^{1/2} is written in conjugate form so that it
stays analytic through kappa = 0.  Points are numpy arrays whose last axis
holds the coordinates; leading axes broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

ON_MANIFOLD_TOL = 1e-10


@dataclass(frozen=True)
class Curvature:
    kappa: float

    def __post_init__(self):
        if not math.isfinite(self.kappa):
            raise DomainError(f"curvature must be finite, got {self.kappa}")
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def sigma(self) -> int:
        return 1 if self.kappa >= 0 else -1

    @property
    def sqrt_abs(self) -> float:
        """|kappa|^{1/2}."""
        return math.sqrt(abs(self.kappa))

    @property
    def radius(self) -> float:
        """|kappa|^{-1/2}; the (imaginary, for kappa < 0) radius.  inf on the plane."""
        if self.kappa == 0:
            return math.inf
        return 1.0 / self.sqrt_abs

    @property
    def center(self) -> np.ndarray:
        """Centre of the quadric, (0, 0, -|kappa|^{-1/2})."""
        if self.kappa == 0:
            raise DomainError("the plane has no centre")
        return np.array([0.0, 0.0, -self.radius])

    def dot(self, u, v):
        """Inner product of signature (+, +, sigma) over the last axis."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] + self.sigma * u[..., 2] * v[..., 2]


def as_curvature(c) -> Curvature:
    return c if isinstance(c, Curvature) else Curvature(float(c))


def _chart_root(c: Curvature, area):
    """sqrt(1 - kappa A), raising when the point leaves the reduced chart."""
    area = np.asarray(area, dtype=float)
    arg = 1.0 - c.kappa * area
    if np.any(arg < 0):
        raise DomainError(
            f"point outside the reduced chart: kappa*A = {np.max(c.kappa * area):.17g} > 1"
        )
    return np.sqrt(arg)


def planar_area(p):
    p = np.asarray(p, dtype=float)
    return p[..., 0] ** 2 + p[..., 1] ** 2


def omega_from_planar(c, p, lower=False):
    """Height omega = z of the manifold point above the planar point ``p``.

    Upper sheet (the one through the origin): -sigma|k|^{1/2} A / (1 + sqrt(1 - k A)).
    ``lower=True`` selects the far hemisphere of the sphere, omega = -2R - omega_upper.
    """
    c = as_curvature(c)
    area = planar_area(p)
    root = _chart_root(c, area)
    omega = -c.sigma * c.sqrt_abs * area / (1.0 + root)
    if np.any(lower):
        if c.kappa <= 0:
            raise DomainError("only the sphere has a lower hemisphere")
        omega = np.where(lower, -2.0 * c.radius - omega, omega)
    return omega if np.ndim(omega) else float(omega)


def constraint_residuals(c, pos, vel):
    """Residuals of the position and velocity constraints.

    Returns ``(kappa (x^2+y^2+sigma z^2) + 2|kappa|^{1/2} z,
    kappa r.rdot + |kappa|^{1/2} zdot)``; both vanish identically on the plane.
    """
    c = as_curvature(c)
    pos = np.asarray(pos, dtype=float)
    vel = np.asarray(vel, dtype=float)
    g1 = c.kappa * c.dot(pos, pos) + 2.0 * c.sqrt_abs * pos[..., 2]
    g2 = c.kappa * c.dot(pos, vel) + c.sqrt_abs * vel[..., 2]
    if c.kappa == 0:
        g1 = np.zeros_like(g1)
        g2 = np.zeros_like(g2)
    if np.ndim(g1) == 0:
        return float(g1), float(g2)
    return g1, g2


def max_constraint_residual(c, pos, vel) -> float:
    c = as_curvature(c)
    if c.kappa == 0:
        # the plane is z = 0, so measure that directly
        return float(np.max(np.abs(np.concatenate([np.ravel(np.asarray(pos)[..., 2]),
                                                   np.ravel(np.asarray(vel)[..., 2])]))))
    g1, g2 = constraint_residuals(c, pos, vel)
    return float(max(np.max(np.abs(g1)), np.max(np.abs(g2))))


def chord_distance_sq(c, p, q):
    """Squared ambient chord between the upper-sheet points above ``p`` and ``q``.

    (x_p-x_q)^2 + (y_p-y_q)^2 + kappa (A_p - A_q)^2 / (sqrt(1-kA_p) + sqrt(1-kA_q))^2
    """
    c = as_curvature(c)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    a_p = planar_area(p)
    a_q = planar_area(q)
    root_sum = _chart_root(c, a_p) + _chart_root(c, a_q)
    flat = (p[..., 0] - q[..., 0]) ** 2 + (p[..., 1] - q[..., 1]) ** 2
    if c.kappa == 0:
        rho2 = flat
    else:
        rho2 = flat + c.kappa * (a_p - a_q) ** 2 / root_sum**2
    return rho2 if np.ndim(rho2) else float(rho2)


def chord_sq_3d(c, r_i, r_j):
    """Squared Euclidean (kappa >= 0) or Minkowski (kappa < 0) chord between 3D points."""
    c = as_curvature(c)
    d = np.asarray(r_i, dtype=float) - np.asarray(r_j, dtype=float)
    return c.dot(d, d)


def geodesic_distance(c, rho):
    """Intrinsic distance for a chord of length ``rho``."""
    c = as_curvature(c)
    if rho < 0:
        raise DomainError(f"chord length must be nonnegative, got {rho}")
    if c.kappa == 0:
        return float(rho)
    half = c.sqrt_abs * rho / 2.0
    if c.kappa > 0:
        if half > 1.0:
            raise DomainError(f"chord {rho} longer than the sphere's diameter")
        return 2.0 * c.radius * math.asin(half)
    return 2.0 * c.radius * math.asinh(half)


def lift(c, pos2, vel2, lower=None):
    """Lift planar positions/velocities (shape (n, 2)) to points on the manifold.

    ``lower`` is an optional boolean per body selecting the sphere's far hemisphere.
    A body on the equator (1 - kappa A = 0) with zero radial velocity lifts with
    zdot = 0; nonzero radial velocity there has no finite lift.
    """
    c = as_curvature(c)
    pos2 = np.atleast_2d(np.asarray(pos2, dtype=float))
    vel2 = np.atleast_2d(np.asarray(vel2, dtype=float))
    n = pos2.shape[0]
    lower = np.zeros(n, dtype=bool) if lower is None else np.asarray(lower, dtype=bool)
    z = np.atleast_1d(omega_from_planar(c, pos2, lower=lower))
    area = planar_area(pos2)
    root = _chart_root(c, area)
    radial = np.einsum("ij,ij->i", pos2, vel2)
    zdot = np.zeros(n)
    for i in range(n):
        if c.kappa == 0 or radial[i] == 0.0:
            continue
        if root[i] == 0.0:
            raise DomainError("nonzero radial velocity on the equator has no finite lift")
        upper = -c.sigma * c.sqrt_abs * radial[i] / root[i]
        zdot[i] = -upper if lower[i] else upper
    pos3 = np.column_stack([pos2, z])
    vel3 = np.column_stack([vel2, zdot])
    return pos3, vel3


def project_to_manifold(c, pos, vel):
    """Closest-point style projection of 3D states back onto the manifold.

    Positions are rescaled along the ray from the quadric's centre; velocities
    lose their normal component.  Works row-wise on arrays of shape (n, 3).
    """
    c = as_curvature(c)
    pos = np.array(pos, dtype=float)
    vel = np.array(vel, dtype=float)
    if c.kappa == 0:
        pos[..., 2] = 0.0
        vel[..., 2] = 0.0
        return pos, vel
    centre = c.center
    rel = pos - centre
    norm2 = c.dot(rel, rel)
    if c.kappa > 0:
        scale = c.radius / np.sqrt(norm2)
    else:
        if np.any(norm2 >= 0) or np.any(rel[..., 2] <= 0):
            raise DomainError("point too far from the hyperboloid's upper sheet to project")
        scale = c.radius / np.sqrt(-norm2)
    rel = rel * scale[..., None]
    normal_comp = c.dot(vel, rel) / c.dot(rel, rel)
    vel = vel - normal_comp[..., None] * rel
    return rel + centre, vel
