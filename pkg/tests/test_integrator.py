import csv
import math

import numpy as np
import pytest

from curved3body.dynamics import BodyState3D, PlanarState
from curved3body.equilibria import lagrange_equal_mass_build, perturbed
from curved3body.errors import DomainError, DriftExceeded, SingularityError, StepSizeUnderflow
from curved3body.integrator import (
    IntegratorOptions,
    chord_drift,
    csv_header,
    drift_report,
    integrate,
    write_trajectory_csv,
)

KEPLER_SPEED = math.sqrt(0.5)
KEPLER_PERIOD = math.pi * math.sqrt(2.0)


def kepler_state():
    """Two unit masses a unit apart on a circular orbit; the third body is massless."""
    v = KEPLER_SPEED
    return PlanarState([[0.5, 0.0], [-0.5, 0.0], [6.0, 0.0]], [[0.0, v], [0.0, -v], [0.0, 0.0]])


def kepler_error(tol):
    s = kepler_state()
    opts = IntegratorOptions(rel_tol=tol, abs_tol=tol * 1e-2)
    tr = integrate(0.0, [1.0, 1.0, 0.0], s, (0.0, KEPLER_PERIOD), opts)
    return float(np.max(np.abs(tr.states[-1].pos[:2] - s.pos[:2])))


def wobbling(kappa):
    """An equal-mass equilateral solution spun 1% too fast: bounded, non-rigid motion."""
    return perturbed(lagrange_equal_mass_build(kappa, 1.0, 0.5), alpha_factor=1.01)


def test_zero_length_span_returns_initial_state():
    s = kepler_state()
    tr = integrate(0.0, [1, 1, 0], s, (2.0, 2.0))
    assert len(tr.times) == 1 and tr.times[0] == 2.0
    np.testing.assert_array_equal(tr.states[0].to_vector(), s.to_vector())
    assert drift_report(tr) == (0.0, 0.0, 0.0)


def test_single_sample_report_carries_initial_residual():
    s = BodyState3D([[1.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, -0.5, 0.0]], np.zeros((3, 3)))
    tr = integrate(1.0, [1, 1, 1], s, (0.0, 0.0))
    h, c3, res = drift_report(tr)
    assert (h, c3) == (0.0, 0.0)
    assert res == pytest.approx(1.0)


def test_kepler_orbit_returns_after_one_period():
    assert kepler_error(1e-12) <= 1e-6


def test_halving_rel_tol_never_increases_kepler_error():
    tols = [1e-5 / 2 ** k for k in range(20)]
    errors = [kepler_error(t) for t in tols]
    assert all(b <= a for a, b in zip(errors, errors[1:]))


@pytest.mark.parametrize("kappa", [1.0, -1.0])
def test_default_options_meet_conservation_targets(kappa):
    p = wobbling(kappa)
    tr = integrate(kappa, p.masses, p.planar_state(), (0.0, p.period))
    h, c3, res = drift_report(tr)
    assert h <= 1e-8 and c3 <= 1e-8 and res <= 1e-9


@pytest.mark.parametrize("kappa", [1.0, -1.0])
def test_loose_tolerances_drift_more(kappa):
    p = wobbling(kappa)
    s = p.planar_state()
    loose = integrate(kappa, p.masses, s, (0, p.period), IntegratorOptions(rel_tol=1e-6, abs_tol=1e-6))
    tight = integrate(kappa, p.masses, s, (0, p.period))
    assert drift_report(loose)[0] > drift_report(tight)[0]
    assert drift_report(loose)[1] > drift_report(tight)[1]


@pytest.mark.parametrize("kappa", [1.0, -1.0])
def test_conservation_monotone_in_max_step(kappa):
    p = wobbling(kappa)
    s = p.planar_state()
    T = p.period
    drifts = []
    for ms in (T / 400, T / 100, T / 25, math.inf):
        tr = integrate(kappa, p.masses, s, (0, T), IntegratorOptions(rel_tol=1e-6, abs_tol=1e-6, max_step=ms))
        drifts.append(drift_report(tr)[0])
    # allow rounding-level noise once the error is at machine precision
    assert all(b >= a - 1e-14 for a, b in zip(drifts, drifts[1:]))
    assert drifts[-1] > drifts[0]


@pytest.mark.parametrize("kappa", [1.0, -1.0])
def test_time_reversal(kappa):
    p = wobbling(kappa)
    s = p.planar_state()
    T = p.period
    fwd = integrate(kappa, p.masses, s, (0, T))
    ref = integrate(kappa, p.masses, s, (0, T), IntegratorOptions(rel_tol=3e-14, abs_tol=1e-14))
    one_way = np.max(np.abs(fwd.states[-1].to_vector() - ref.states[-1].to_vector()))
    back = integrate(kappa, p.masses, fwd.states[-1], (T, 0))
    assert np.all(np.diff(back.times) < 0)
    err = np.max(np.abs(back.states[-1].to_vector() - s.to_vector()))
    assert err <= 10 * max(one_way, 1e-12)


@pytest.mark.parametrize("kappa", [1.0, -1.0])
def test_extrinsic_projection_keeps_constraints(kappa):
    p = wobbling(kappa)
    tr = integrate(kappa, p.masses, p.state_3d(), (0, p.period))
    h, c3, res = drift_report(tr)
    assert res <= 1e-9 and h <= 1e-8 and c3 <= 1e-8
    free = integrate(kappa, p.masses, p.state_3d(), (0, p.period), IntegratorOptions(projection="off"))
    assert drift_report(free)[2] > res


@pytest.mark.parametrize("kappa", [1.0, -1.0])
def test_extrinsic_matches_reduced(kappa):
    p = wobbling(kappa)
    red = integrate(kappa, p.masses, p.planar_state(), (0, p.period), IntegratorOptions(n_samples=5))
    ext = integrate(kappa, p.masses, p.state_3d(), (0, p.period), IntegratorOptions(n_samples=5))
    np.testing.assert_allclose(ext.states[-1].pos[:, :2], red.states[-1].pos, atol=1e-9)


def test_drift_exceeded_without_projection():
    p = wobbling(1.0)
    opts = IntegratorOptions(projection="off", drift_tolerance=1e-14, rel_tol=1e-6, abs_tol=1e-6)
    with pytest.raises(DriftExceeded):
        integrate(1.0, p.masses, p.state_3d(), (0, p.period), opts)


def test_initial_state_is_guarded():
    s = BodyState3D([[0, 0, 0], [0, 0, -2.0], [1.0, 0, -1.0]], np.zeros((3, 3)))
    with pytest.raises(SingularityError):
        integrate(1.0, [1, 1, 1], s, (0, 1))


def test_head_on_collision_stops_integration():
    s = PlanarState([[0.5, 0.0], [-0.5, 0.0], [0.0, 3.0]], np.zeros((3, 2)))
    with pytest.raises((SingularityError, StepSizeUnderflow)):
        integrate(0.0, [1, 1, 0], s, (0, 5.0))


def test_options_are_validated():
    with pytest.raises(DomainError):
        IntegratorOptions(rel_tol=0)
    with pytest.raises(DomainError):
        IntegratorOptions(drift_tolerance=-1)
    with pytest.raises(ValueError):
        IntegratorOptions(projection="sideways")


def test_resampling_gives_uniform_grid():
    tr = integrate(0.0, [1, 1, 0], kepler_state(), (0, 1.0), IntegratorOptions(n_samples=11))
    np.testing.assert_allclose(tr.times, np.linspace(0, 1, 11))
    assert len(tr.states) == 11 and len(tr.h) == 11


def test_times_strictly_increasing_forward():
    tr = integrate(0.0, [1, 1, 0], kepler_state(), (0, KEPLER_PERIOD))
    assert np.all(np.diff(tr.times) > 0)


def test_rigid_solution_keeps_chords():
    c = lagrange_equal_mass_build(1.0, 1.0, 0.5)
    tr = integrate(1.0, c.masses, c.planar_state(), (0, 5 * c.period))
    assert chord_drift(tr) <= 1e-6


def test_csv_header_layout():
    cols = csv_header()
    assert cols[:7] == ["t", "x1", "y1", "x2", "y2", "x3", "y3"]
    assert cols[7:13] == ["xdot1", "ydot1", "xdot2", "ydot2", "xdot3", "ydot3"]
    assert cols[13:] == ["h", "c1", "c2", "c3", "maxres"]
    assert csv_header(extrinsic=True)[18:] == ["z1", "z2", "z3", "zdot1", "zdot2", "zdot3"]


@pytest.mark.parametrize("extrinsic", [False, True])
def test_write_trajectory_csv(tmp_path, extrinsic):
    p = wobbling(1.0)
    s0 = p.state_3d() if extrinsic else p.planar_state()
    tr = integrate(1.0, p.masses, s0, (0, 0.5), IntegratorOptions(n_samples=4))
    path = tmp_path / "traj.csv"
    write_trajectory_csv(tr, path, config_hash="abc123")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# config_sha256=abc123"
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == csv_header(extrinsic)
    assert len(rows) == 5
    assert float(rows[1][0]) == 0.0
    assert float(rows[-1][13]) == pytest.approx(tr.h[-1], rel=1e-15)
