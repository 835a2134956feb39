"""Parameter sweeps over curvature and mass ratio, and the shape profile F(s).

A sweep builds (or fails to build) one candidate per grid point and records
what happened as a table row; nothing aborts the sweep.  A point counts as
existing only when the builder accepts it *and* its residual passes, so a
closed form that does not actually solve the equations shows up as
``claimed=true, exists=false``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .equilibria import (
    BUILD_TOL,
    GAMMA_MIN,
    GAMMA_RIGHT,
    S_EQUILATERAL,
    Family,
    equatorial_re_build,
    f_of_s,
    isosceles_re_build,
    lagrange_equal_mass_build,
    planetary_re_build,
    re_residual,
    restricted_equalmass_re_build,
)
from .errors import CurvedBodyError, DomainError, FamilyConstraintError
from .geometry import as_curvature
from .scans import default_grid, scan_nonexistence, thread_count

OUTPUTS = ("existence", "alpha", "latitude", "shape_s", "residual")

SWEEP_FAMILIES = tuple(f.value for f in Family if f is not Family.CLASSICAL_LAGRANGE)

_OUTPUT_COLUMNS = {
    "existence": (),
    "alpha": ("alpha2", "alpha"),
    "latitude": ("lambda", "latitude"),
    "shape_s": ("s",),
    "residual": ("residual", "scan_residual"),
}

_DEFAULT_PARAMS = {"m": 1.0, "r": 0.5, "lam": 0.5, "v": 0.5, "hemisphere": "north",
                   "angles": [0.0, 1.9, 4.0], "alpha": 1.0, "direction": 1}


@dataclass
class SweepSpec:
    """What to sweep.

    ``mass_ratio_grid`` is M/m for the isosceles and general restricted
    families; for the others it multiplies the reference mass ``params["m"]``.
    ``params`` carries the remaining family inputs (r, lam, v, hemisphere,
    angles, alpha, direction).
    """

    family: str
    kappa_grid: list
    mass_ratio_grid: list = field(default_factory=lambda: [1.0])
    outputs: tuple = OUTPUTS
    params: dict = field(default_factory=dict)
    tol: float = BUILD_TOL

    def __post_init__(self):
        self.family = Family(self.family).value
        if self.family not in SWEEP_FAMILIES:
            raise DomainError(f"family {self.family!r} cannot be swept")
        self.kappa_grid = [float(k) for k in self.kappa_grid]
        self.mass_ratio_grid = [float(q) for q in self.mass_ratio_grid]
        if not self.kappa_grid or not self.mass_ratio_grid:
            raise DomainError("sweep grids must be nonempty")
        if not all(math.isfinite(x) for x in self.kappa_grid + self.mass_ratio_grid):
            raise DomainError("sweep grids must be finite")
        outs = tuple(self.outputs)
        unknown = set(outs) - set(OUTPUTS)
        if unknown:
            raise DomainError(f"unknown sweep outputs {sorted(unknown)}; choose from {OUTPUTS}")
        # keep a canonical order so that tables do not depend on set iteration
        self.outputs = tuple(o for o in OUTPUTS if o in outs)
        extra = set(self.params) - set(_DEFAULT_PARAMS)
        if extra:
            raise DomainError(f"unknown sweep params {sorted(extra)}")
        if not self.tol > 0:
            raise DomainError("tol must be positive")

    def param(self, name):
        return self.params.get(name, _DEFAULT_PARAMS[name])

    def columns(self) -> list:
        cols = ["kappa", "mass_ratio", "claimed", "exists", "error"]
        for o in self.outputs:
            cols += list(_OUTPUT_COLUMNS[o])
        return cols

    def to_dict(self) -> dict:
        d = asdict(self)
        d["outputs"] = list(self.outputs)
        return d


def _scan_min(case, kappa, masses, grid=None) -> float:
    return scan_nonexistence(case, kappa, masses, grid, threads=1).min_residual


def _build(spec: SweepSpec, kappa: float, q: float):
    """Return (candidate or None, scan_residual or None, s or None)."""
    fam = spec.family
    m = float(spec.param("m"))
    direction = spec.param("direction")
    if fam == Family.PLANETARY.value:
        return planetary_re_build(kappa, m * q, spec.param("r"), direction), None, None
    if fam == Family.RESTRICTED_EQUAL_MASS.value:
        if kappa < 0:
            raise _Absent("curvature", _scan_min("hyperbolic_restricted_equal", kappa, (m, m, 0)))
        if kappa == 0:
            # the left-hand side of the radius identity vanishes on the plane
            raise _Absent("curvature", 1.0)
        return restricted_equalmass_re_build(kappa, m * q, direction), None, None
    if fam == Family.ISOSCELES_BAND.value:
        s = -q / 2.0
        if kappa < 0 and abs(q - 1.0) < 1e-9:
            raise FamilyConstraintError("equal masses give the equilateral family", "equal_masses")
        if kappa < 0 and 0 < q < 2:
            grid = {"s": [s], "v": default_grid("hyperbolic_isosceles", kappa)["v"]}
            raise _Absent("curvature", _scan_min("hyperbolic_isosceles", kappa, (q, 1, 1), grid), s)
        cand = isosceles_re_build(kappa, q * m, m, spec.param("hemisphere"), direction)
        return cand, None, cand.meta["s"]
    if fam == Family.LAGRANGE_EQUAL_MASS.value:
        lam_or_v = spec.param("lam") if kappa > 0 else spec.param("v")
        return lagrange_equal_mass_build(kappa, m * q, lam_or_v, direction), None, S_EQUILATERAL
    if fam == Family.EQUATORIAL_SCALENE.value:
        return equatorial_re_build(kappa, spec.param("angles"), spec.param("alpha"), m * q), None, None
    if fam == Family.GENERAL_RESTRICTED.value:
        if q == 1:
            if kappa > 0:
                return restricted_equalmass_re_build(kappa, m, direction), None, None
            if kappa < 0:
                raise _Absent("curvature", _scan_min("hyperbolic_restricted_equal", kappa, (m, m, 0)))
            raise _Absent("curvature", 1.0)
        if q < 1:
            raise FamilyConstraintError("order the primaries so that M/m >= 1", "mass_ratio")
        r = np.linspace(0.0, 5.0, 201)[1:]
        if kappa > 0:
            r = np.linspace(0.0, 1.0, 201)[1:] / math.sqrt(kappa) / q
        grid = {"mu": [q], "r": r}
        raise _Absent("no_solution", _scan_min("general_restricted", kappa, (q * m, m, 0), grid))
    raise DomainError(f"unsupported family {fam!r}")


class _Absent(Exception):
    """Internal signal: the point is known not to exist; carries the scan minimum."""

    def __init__(self, code, scan_residual, s=None):
        super().__init__(code)
        self.code = code
        self.scan_residual = scan_residual
        self.s = s


def _row(spec: SweepSpec, kappa: float, q: float) -> dict:
    row = {"kappa": kappa, "mass_ratio": q, "claimed": False, "exists": False, "error": "",
           "alpha2": None, "alpha": None, "lambda": None, "latitude": None, "s": None,
           "residual": None, "scan_residual": None}
    try:
        cand, scan_res, s = _build(spec, kappa, q)
    except _Absent as exc:
        row.update(error=exc.code, scan_residual=exc.scan_residual, s=exc.s)
        return row
    except FamilyConstraintError as exc:
        row["error"] = exc.code
        return row
    except CurvedBodyError as exc:
        row["error"] = type(exc).__name__
        return row
    row["claimed"] = True
    row["alpha2"] = cand.alpha2
    row["alpha"] = cand.alpha
    row["s"] = s
    # latitude only makes sense when all bodies share one parallel circle
    lam = 1.0 if cand.family is Family.EQUATORIAL_SCALENE else cand.meta.get("lambda")
    if lam is not None:
        row["lambda"] = lam
        row["latitude"] = abs(1.0 - lam) / math.sqrt(cand.kappa)
    try:
        res = re_residual(cand.kappa, cand.masses, cand)
    except CurvedBodyError as exc:
        row["error"] = type(exc).__name__
        return row
    row["residual"] = res
    row["scan_residual"] = scan_res
    row["exists"] = res <= spec.tol
    if not row["exists"]:
        row["error"] = "residual"
    return row


def sweep(spec: SweepSpec, threads: int | None = None) -> list:
    """One row per (kappa, mass_ratio) pair, kappa-major, in grid order."""
    points = [(k, q) for k in spec.kappa_grid for q in spec.mass_ratio_grid]
    workers = min(threads or thread_count(), len(points))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda p: _row(spec, *p), points))
    else:
        rows = [_row(spec, *p) for p in points]
    keep = spec.columns()
    return [{k: r[k] for k in keep} for r in rows]


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_table_csv(rows: list, path, columns=None, config_hash: str | None = None):
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if config_hash:
            fh.write(f"# config_sha256={config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])


def config_hash(obj) -> str:
    """sha256 of the canonical JSON rendering of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sweep_manifest(spec: SweepSpec, rows: list, cfg_hash: str | None = None) -> dict:
    return {
        "spec": spec.to_dict(),
        "version": __version__,
        "tolerances": {"residual": spec.tol},
        "columns": spec.columns(),
        "n_rows": len(rows),
        "n_exists": sum(1 for r in rows if r.get("exists")),
        "config_sha256": cfg_hash or config_hash(spec.to_dict()),
    }


def band_boundaries(c) -> tuple:
    """Distances from the equator plane bounding the isosceles bands.

    (sqrt(3)/3 R, 3/5 R): the parallels where gamma = 2/3 and gamma = 16/25.
    """
    c = as_curvature(c)
    if c.kappa <= 0:
        raise DomainError("band boundaries are defined on spheres only (kappa > 0)")
    R = c.radius
    return (math.sqrt(1.0 - GAMMA_RIGHT) * R, math.sqrt(1.0 - GAMMA_MIN) * R)


F_PROFILE_MARGIN = 1e-6


def default_s_grid(n: int = 1000) -> list:
    """s = -k/n for k = 1..n-1 with s = -1/2 dropped; contains -1/4 exactly when 4 | n."""
    if n < 4:
        raise DomainError("need at least 4 subdivisions")
    grid = [-k / n for k in range(n - 1, 0, -1)]
    return [s for s in grid if abs(s - S_EQUILATERAL) >= F_PROFILE_MARGIN]


def f_profile(s_grid=None) -> list:
    """Rows ``(s, F(s))`` on ``s_grid`` (default :func:`default_s_grid`)."""
    grid = default_s_grid() if s_grid is None else [float(s) for s in s_grid]
    if not grid:
        raise DomainError("s grid must be nonempty")
    for s in grid:
        if not -1.0 < s < 0.0:
            raise DomainError(f"s = {s} lies outside (-1, 0)")
        if abs(s - S_EQUILATERAL) < F_PROFILE_MARGIN:
            raise DomainError(f"s = {s} is within {F_PROFILE_MARGIN} of -1/2 where F = 0/0")
    return [(s, f_of_s(s)) for s in grid]
