import math

import numpy as np
import pytest

from curved3body.dynamics import BodyState3D, PlanarState, pair_chords


def random_planar_state(rng, kappa, r_range=(0.2, 0.6), min_chord=0.3, speed=0.5):
    """A well separated reduced state whose bodies stay inside the chart."""
    while True:
        r = rng.uniform(*r_range, size=3)
        phi = rng.uniform(0.0, 2.0 * math.pi, size=3)
        pos = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
        vel = rng.normal(scale=speed, size=(3, 2))
        s = PlanarState(pos, vel)
        if np.min(pair_chords(kappa, s)) >= min_chord:
            return s


def random_state_3d(rng, kappa, **kw):
    return BodyState3D.from_planar(kappa, random_planar_state(rng, kappa, **kw))


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


# --- acceptance bookkeeping -------------------------------------------------------

_RESULTS = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion; printed in the terminal summary."""

    def record(number, title, passed, detail=""):
        _RESULTS[number] = (title, bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_RESULTS):
        title, passed, detail = _RESULTS[n]
        tag = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{tag}] {n}. {title}: {detail}")


# --- simulate runs shared by the CLI tests and the conservation criterion ----------


def _wobbling_state_3d(kappa):
    from curved3body.equilibria import lagrange_equal_mass_build, perturbed

    p = perturbed(lagrange_equal_mass_build(kappa, 1.0, 0.5), alpha_factor=1.01)
    s = p.state_3d()
    return {"formulation": "extrinsic", "pos": s.pos.tolist(), "vel": s.vel.tolist()}, p


def simulate_configs():
    """name -> simulate config; every simulate run in the suite comes from here."""
    v = math.sqrt(0.5)
    kepler = {"formulation": "reduced", "pos": [[0.5, 0], [-0.5, 0], [6, 0]],
              "vel": [[0, v], [0, -v], [0, 0]]}
    sphere_state, sphere = _wobbling_state_3d(1.0)
    hyper_state, hyper = _wobbling_state_3d(-1.0)
    return {
        "restricted_10_periods": {
            "candidate": {"family": "restricted_equal_mass", "kappa": 1.0, "m": 1.0},
            "periods": 10},
        "equatorial_5_periods": {
            "candidate": {"family": "equatorial_scalene", "kappa": 1.0, "angles": [0.0, 1.9, 4.0]},
            "periods": 5},
        "lagrange_sphere": {
            "candidate": {"family": "lagrange_equal_mass", "kappa": 1.0, "lam": 0.4}, "periods": 3},
        "lagrange_far_hemisphere": {
            "candidate": {"family": "lagrange_equal_mass", "kappa": 1.0, "lam": 1.6}, "periods": 3},
        "planetary_hyperbolic": {
            "candidate": {"family": "planetary", "kappa": -1.0, "m": 1.0, "r": 1.0}, "periods": 3},
        "classical_lagrange": {
            "candidate": {"family": "classical_lagrange", "kappa": 0.0, "masses": [1.0, 2.0, 3.0]},
            "periods": 1},
        "kepler_state": {"kappa": 0.0, "masses": [1.0, 1.0, 0.0], "state": kepler,
                         "t_end": math.pi * math.sqrt(2.0)},
        "wobbling_sphere_extrinsic": {"kappa": 1.0, "masses": list(sphere.masses),
                                      "state": sphere_state, "t_end": sphere.period},
        "wobbling_hyperbolic_extrinsic": {"kappa": -1.0, "masses": list(hyper.masses),
                                          "state": hyper_state, "t_end": hyper.period},
    }


def run_cli(tmp_path, argv, config=None, name="run"):
    """Run the CLI in-process; returns (exit code, output directory)."""
    import json

    from curved3body.cli import main

    out = tmp_path / f"{name}_out"
    args = list(argv) + ["--out", str(out)]
    if config is not None:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(config), encoding="utf-8")
        args += ["--config", str(path)]
    return main(args), out
