import math

import numpy as np
import pytest

from curved3body.bifurcation import (
    SweepSpec,
    band_boundaries,
    config_hash,
    default_s_grid,
    f_profile,
    sweep,
    sweep_manifest,
    write_table_csv,
)
from curved3body.equilibria import f_of_s
from curved3body.errors import DomainError


def test_planetary_sweep_exists_everywhere():
    rows = sweep(SweepSpec("planetary", np.linspace(-1, 1, 21), params={"m": 1.0, "r": 0.5}))
    assert len(rows) == 21
    assert all(r["exists"] and r["claimed"] for r in rows)
    assert all(r["residual"] <= 1e-10 for r in rows)
    mid = rows[10]
    assert mid["kappa"] == 0.0 and mid["alpha2"] == 1.0 / 0.125


def test_restricted_sweep_claims_only_positive_curvature():
    rows = sweep(SweepSpec("restricted_equal_mass", np.linspace(-1, 1, 9)))
    for r in rows:
        assert r["claimed"] == (r["kappa"] > 0)
        if r["kappa"] <= 0:
            assert r["error"] == "curvature"
            assert r["scan_residual"] >= 1.0
    # the closed form is claimed but does not pass the residual check
    for r in rows:
        if r["kappa"] > 0:
            assert not r["exists"] and r["error"] == "residual"
            assert r["alpha2"] == pytest.approx(2.0 * r["kappa"] ** 1.5, rel=1e-14)


def test_isosceles_sweep_latitudes():
    ratios = [q for q in np.linspace(0.05, 1.95, 39) if abs(q - 1) > 1e-9]
    rows = sweep(SweepSpec("isosceles_band", [1.0], ratios))
    assert all(r["exists"] for r in rows)
    for r in rows:
        s = -r["mass_ratio"] / 2
        assert r["s"] == pytest.approx(s, abs=1e-15)
        assert r["latitude"] == pytest.approx(math.sqrt(1 - f_of_s(s)), abs=1e-12)


def test_isosceles_sweep_records_failures_as_rows():
    rows = sweep(SweepSpec("isosceles_band", [1.0, -1.0], [1.0, 0.5, 2.5]))
    codes = {(r["kappa"], r["mass_ratio"]): r["error"] for r in rows}
    assert codes[(1.0, 1.0)] == "equal_masses"
    assert codes[(1.0, 2.5)] == "mass_ratio"
    assert codes[(-1.0, 0.5)] == "curvature"
    assert codes[(-1.0, 1.0)] == "equal_masses"
    hyper = [r for r in rows if r["kappa"] == -1.0 and r["mass_ratio"] == 0.5][0]
    assert hyper["scan_residual"] > 0.6 and hyper["s"] == -0.25


def test_general_restricted_sweep():
    rows = sweep(SweepSpec("general_restricted", [0.01, 1.0], [1.5, 3.0]))
    for r in rows:
        assert not r["claimed"] and r["error"] == "no_solution"
        assert r["scan_residual"] > 1e-3


def test_lagrange_and_equatorial_sweeps():
    lag = sweep(SweepSpec("lagrange_equal_mass", [-1.0, 1.0, 4.0]))
    assert all(r["exists"] for r in lag)
    assert lag[0]["latitude"] is None and lag[1]["latitude"] == pytest.approx(0.5)
    eq = sweep(SweepSpec("equatorial_scalene", [1.0, 0.0]))
    assert eq[0]["exists"] and eq[0]["latitude"] == 0.0
    assert eq[1]["error"] == "curvature"


def test_sweep_columns_follow_outputs():
    spec = SweepSpec("planetary", [0.0], outputs=["residual", "existence"])
    rows = sweep(spec)
    assert list(rows[0]) == ["kappa", "mass_ratio", "claimed", "exists", "error", "residual", "scan_residual"]


def test_sweep_spec_validation():
    with pytest.raises(DomainError):
        SweepSpec("planetary", [])
    with pytest.raises(DomainError):
        SweepSpec("planetary", [math.inf])
    with pytest.raises(DomainError):
        SweepSpec("planetary", [0.0], outputs=["colour"])
    with pytest.raises(DomainError):
        SweepSpec("planetary", [0.0], params={"speed": 1})
    with pytest.raises(DomainError):
        SweepSpec("classical_lagrange", [0.0])
    with pytest.raises(ValueError):
        SweepSpec("nonsense", [0.0])


def test_sweep_is_byte_identical(tmp_path):
    spec = SweepSpec("isosceles_band", [1.0, 2.0, -1.0], [0.3, 0.5, 1.5])
    paths = []
    for threads in (1, 4):
        rows = sweep(spec, threads=threads)
        p = tmp_path / f"sweep{threads}.csv"
        write_table_csv(rows, p, spec.columns(), config_hash(spec.to_dict()))
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    text = paths[0].read_text(encoding="utf-8").splitlines()
    assert text[0].startswith("# config_sha256=")
    assert text[1].split(",") == spec.columns()


def test_sweep_manifest():
    spec = SweepSpec("planetary", [0.0, 0.5])
    rows = sweep(spec)
    man = sweep_manifest(spec, rows)
    assert man["n_rows"] == 2 and man["n_exists"] == 2
    assert man["tolerances"]["residual"] == spec.tol
    assert man["config_sha256"] == config_hash(spec.to_dict())


def test_config_hash_is_key_order_independent():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


@pytest.mark.parametrize("n", [21, 41, 81])
def test_planetary_alpha_continuity(n):
    rows = sweep(SweepSpec("planetary", np.linspace(-1, 1, n)))
    a2 = np.array([r["alpha2"] for r in rows])
    h = 2.0 / (n - 1)
    # jumps are bounded by a Lipschitz constant times the spacing
    assert np.max(np.abs(np.diff(a2))) <= 20 * h


def test_band_boundaries():
    lo, hi = band_boundaries(1.0)
    assert lo == pytest.approx(math.sqrt(3) / 3, abs=1e-12)
    assert hi == pytest.approx(0.6, abs=1e-12)
    lo4, hi4 = band_boundaries(4.0)
    assert lo4 == pytest.approx(math.sqrt(3) / 6, abs=1e-12)
    assert hi4 == pytest.approx(0.3, abs=1e-12)
    assert math.sqrt(1 - f_of_s(-0.25)) == pytest.approx(0.6, abs=1e-12)
    with pytest.raises(DomainError):
        band_boundaries(0.0)


def test_default_s_grid():
    grid = default_s_grid()
    assert -0.25 in grid and -0.5 not in grid
    assert all(-1 < s < 0 for s in grid)
    assert grid == sorted(grid)


def test_f_profile_shape():
    rows = f_profile()
    s = np.array([r[0] for r in rows])
    f = np.array([r[1] for r in rows])
    assert (-0.25, 0.64) in [(a, round(b, 15)) for a, b in rows]
    left, right = s <= -0.25, s >= -0.25
    assert np.all(np.diff(f[left]) < 0)
    assert np.all(np.diff(f[right]) > 0)
    assert f[0] == pytest.approx(1.0, abs=2e-3)
    assert f[-1] == pytest.approx(2 / 3, abs=1e-3)


def test_f_profile_rejects_bad_grids():
    with pytest.raises(DomainError):
        f_profile([-0.5 + 1e-7])
    with pytest.raises(DomainError):
        f_profile([0.0])
    with pytest.raises(DomainError):
        f_profile([])
    assert f_profile([-0.5 + 2e-6])[0][1] == pytest.approx(2 / 3, abs=1e-5)
