import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curved3body.dynamics import BodyState3D, accel_extrinsic
from curved3body.equilibria import lagrange_equal_mass_build
from curved3body.errors import DomainError
from curved3body.scans import (
    CASES,
    PARAMS,
    ScanReport,
    default_grid,
    general_restricted_factor,
    scan_nonexistence,
    thread_count,
)


def equator_state(R, u, v, a2, a3):
    def body(h, a):
        rad = math.sqrt(h * (2 * R - h))
        return [rad * math.cos(a), rad * math.sin(a), -h]

    pos = np.array([[R, 0.0, -R], body(u, a2), body(v, a3)])
    return BodyState3D(pos, np.zeros((3, 3)))


@settings(max_examples=40)
@given(st.floats(0.05, 0.95), st.floats(0.05, 1.0), st.floats(0.3, 2.8), st.floats(3.5, 6.0))
def test_equator_residual_is_vertical_pull_on_equator_body(u, v, a2, a3):
    # Body 1 on the equator, at rest: its only unbalanced force is vertical.
    kappa = 4.0
    R = 0.5
    m = (1.0, 0.7, 1.3)
    rep = scan_nonexistence("equator_hemisphere", kappa, m,
                            {"u": [u * R], "v": [v * R], "a2": [a2], "a3": [a3]})
    acc = accel_extrinsic(kappa, m, equator_state(R, u * R, v * R, a2, a3))
    assert rep.min_residual == pytest.approx(abs(acc[0, 2]), rel=1e-10)


def test_equator_scan_is_bounded_below():
    rep = scan_nonexistence("equator_hemisphere", 1.0)
    assert rep.min_residual > 1e-3
    assert rep.margins["corner_margin"] == 0.01
    assert rep.extra["singular_points"] == 0


def test_equator_scan_rejects_all_equatorial_corner():
    with pytest.raises(DomainError):
        scan_nonexistence("equator_hemisphere", 1.0, grid={"u": [1.0], "v": [1.0], "a2": [1.0], "a3": [3.0]})
    with pytest.raises(DomainError):
        scan_nonexistence("equator_hemisphere", 1.0, grid={"u": [1.2], "v": [0.0], "a2": [1.0], "a3": [3.0]})


def test_hyperbolic_isosceles_scan():
    rep = scan_nonexistence("hyperbolic_isosceles", -1.0)
    # F(s) >= 16/25 while delta < 0, so the gap never closes
    assert rep.min_residual > 16 / 25 - 1e-12
    with pytest.raises(DomainError):
        scan_nonexistence("hyperbolic_isosceles", -1.0, grid={"s": [-0.5], "v": [1.0]})
    with pytest.raises(DomainError):
        scan_nonexistence("hyperbolic_isosceles", 1.0)


@pytest.mark.parametrize("kappa", [-0.01, -1.0, -100.0])
def test_hyperbolic_restricted_identity_fails(kappa):
    rep = scan_nonexistence("hyperbolic_restricted_equal", kappa)
    assert rep.min_residual >= 1.0
    assert rep.argmin == {"r": pytest.approx(0.01)}


@pytest.mark.parametrize("kappa", [0.01, 1.0, 100.0])
def test_general_restricted_factor_negative(kappa):
    rep = scan_nonexistence("general_restricted", kappa)
    assert rep.extra["factor_negative"]
    assert rep.min_residual > 1e-3
    assert rep.margins["equal_mass_margin"] == 1e-3


def test_general_restricted_factor_is_scale_invariant():
    mu, f = 2.5, 0.6
    vals = [general_restricted_factor(k, mu, f / math.sqrt(k) / mu) for k in (0.01, 1.0, 100.0)]
    np.testing.assert_allclose(vals, vals[0], rtol=1e-12)


def test_general_restricted_rejects_equal_masses():
    with pytest.raises(DomainError):
        scan_nonexistence("general_restricted", 1.0, grid={"mu": [1.0], "r": [0.3]})
    with pytest.raises(DomainError):
        scan_nonexistence("general_restricted", 1.0, grid={"mu": [2.0], "r": [0.9]})


def test_scalene_scan_reports_without_claim():
    rep = scan_nonexistence("scalene_parallel", 1.0)
    assert np.isfinite(rep.min_residual) and rep.min_residual >= 0
    with pytest.raises(DomainError):
        # equilateral phases are an excluded arrangement
        scan_nonexistence("scalene_parallel", 1.0,
                          grid={"lam": [0.5], "a2": [2 * math.pi / 3], "a3": [4 * math.pi / 3]})


def test_scalene_residual_vanishes_on_known_equilibrium():
    # Sanity check of the evaluator: the equilateral solution has zero residual.
    # Call the evaluator directly since the scan excludes that arrangement.
    from curved3body.scans import _scalene_point

    lag = lagrange_equal_mass_build(1.0, 1.0, 0.5)
    assert _scalene_point(lag.curvature, np.ones(3), 0.5, 2 * math.pi / 3, 4 * math.pi / 3) < 1e-12


def test_unknown_case_and_bad_axes():
    with pytest.raises(DomainError):
        scan_nonexistence("nope", 1.0)
    with pytest.raises(DomainError):
        scan_nonexistence("hyperbolic_restricted_equal", -1.0, grid={"x": [1.0]})
    with pytest.raises(DomainError):
        scan_nonexistence("hyperbolic_restricted_equal", -1.0, grid={"r": []})


def test_ties_break_lexicographically():
    rep = ScanReport("hyperbolic_restricted_equal", -1.0, (1, 1, 0), ("r",),
                     np.array([[3.0], [2.0], [1.0]]), np.array([1.0, 0.5, 0.5]))
    assert rep.argmin == {"r": 1.0}
    min_res, arg = rep
    assert min_res == 0.5 and arg == {"r": 1.0}


def test_all_singular_grid_is_an_error():
    rep = ScanReport("hyperbolic_restricted_equal", -1.0, (1, 1, 0), ("r",),
                     np.array([[1.0]]), np.array([np.inf]))
    with pytest.raises(DomainError):
        rep.min_residual


@pytest.mark.parametrize("case,kappa", [(c, -1.0 if "hyperbolic" in c else 1.0) for c in CASES])
def test_scans_are_deterministic_across_thread_counts(case, kappa, tmp_path):
    one = scan_nonexistence(case, kappa, threads=1)
    many = scan_nonexistence(case, kappa, threads=4)
    np.testing.assert_array_equal(one.residuals, many.residuals)
    one.write_csv(tmp_path / "a.csv", "h")
    many.write_csv(tmp_path / "b.csv", "h")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_scan_csv_layout(tmp_path):
    rep = scan_nonexistence("general_restricted", -1.0, grid={"mu": [2.0, 3.0], "r": [0.5]})
    rep.write_csv(tmp_path / "s.csv", config_hash="feed")
    lines = (tmp_path / "s.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# config_sha256=feed"
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == ["mu", "r", "residual"]
    assert [float(x) for x in rows[1][:2]] == [2.0, 0.5]
    assert len(rows) == 3


def test_explicit_point_arrays_are_accepted():
    pts = np.array([[2.0, 0.1], [3.0, 0.2]])
    rep = scan_nonexistence("general_restricted", 1.0, grid=pts)
    assert rep.points.shape == (2, 2)
    with pytest.raises(DomainError):
        scan_nonexistence("general_restricted", 1.0, grid=np.array([[2.0, 0.1, 1.0]]))


def test_thread_count_reads_environment(monkeypatch):
    monkeypatch.setenv("NBODY_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("NBODY_THREADS", "0")
    assert thread_count() == 1
    monkeypatch.setenv("NBODY_THREADS", "many")
    with pytest.raises(DomainError):
        thread_count()
    monkeypatch.delenv("NBODY_THREADS")
    assert thread_count() >= 1


def test_default_grids_cover_every_case():
    for case in CASES:
        kappa = -1.0 if "hyperbolic" in case else 1.0
        grid = default_grid(case, kappa)
        width = len(PARAMS[case])
        if isinstance(grid, dict):
            assert sorted(grid) == sorted(PARAMS[case])
        else:
            assert grid.shape[1] == width
