"""Grid scans of the algebraic obstructions behind the nonexistence results.

Each case reduces a nonexistence statement to a scalar that must stay away
from zero; the scan evaluates it on a Cartesian grid and reports the
minimum.  This is numerical evidence on the chosen grid, not a proof.

Cases
-----
equator_hemisphere
    Body 1 on the equator, bodies 2 and 3 at heights -u, -v in the same
    closed hemisphere.  The height equation of body 1 reduces to a sum of two
    nonnegative terms; the scan returns that sum.
hyperbolic_isosceles
    |F(s) - delta| with delta = -mu (mu + 2), mu = |kappa|^{1/2} v.
hyperbolic_restricted_equal
    |kappa r^2 / (sqrt(1 - kappa r^2) + sqrt(1 - 2 kappa r^2))^2 - 1|.
general_restricted
    The second factor of the (r1 - r2) factorisation, normalised by
    (1 + mu)^2 r^2, with r2 = mu r.  Its sign is recorded as well since the
    argument needs it negative.
scalene_parallel
    Exploratory: least-squares residual of the rigid-rotation equations for
    three bodies on one parallel circle, minimised over alpha^2.
"""

from __future__ import annotations

import csv
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import BodyState3D, accel_extrinsic, as_masses
from .equilibria import S_EQUILATERAL
from .errors import DomainError, SingularityError
from .geometry import as_curvature

CASES = (
    "equator_hemisphere",
    "hyperbolic_isosceles",
    "hyperbolic_restricted_equal",
    "general_restricted",
    "scalene_parallel",
)

PARAMS = {
    "equator_hemisphere": ("u", "v", "a2", "a3"),
    "hyperbolic_isosceles": ("s", "v"),
    "hyperbolic_restricted_equal": ("r",),
    "general_restricted": ("mu", "r"),
    "scalene_parallel": ("lam", "a2", "a3"),
}

DEFAULT_MARGINS = {
    # distance of (u, v) from the equator corner, in units of R
    "equator_hemisphere": 0.01,
    # |s + 1/2|
    "hyperbolic_isosceles": 1e-3,
    "hyperbolic_restricted_equal": 0.0,
    # mu - 1
    "general_restricted": 1e-3,
    # minimal pairwise phase gap from an isosceles/equilateral arrangement
    "scalene_parallel": 1e-2,
}

_CHUNK = 4096


def thread_count() -> int:
    """Worker cap from NBODY_THREADS (default: CPU count)."""
    raw = os.environ.get("NBODY_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"NBODY_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


@dataclass
class ScanReport:
    case: str
    kappa: float
    masses: tuple
    params: tuple
    points: np.ndarray
    residuals: np.ndarray
    margins: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def _best(self) -> int:
        finite = np.isfinite(self.residuals)
        if not finite.any():
            raise DomainError("every grid point is singular")
        lo = np.min(self.residuals[finite])
        tied = np.flatnonzero(self.residuals == lo)
        # lexicographic order on the parameter tuple breaks ties
        keys = [tuple(self.points[i]) for i in tied]
        return int(tied[min(range(len(tied)), key=keys.__getitem__)])

    @property
    def min_residual(self) -> float:
        return float(self.residuals[self._best()])

    @property
    def argmin(self) -> dict:
        row = self.points[self._best()]
        return {name: float(x) for name, x in zip(self.params, row)}

    def summary(self) -> dict:
        return {
            "case": self.case,
            "kappa": self.kappa,
            "masses": list(self.masses),
            "n_points": int(len(self.residuals)),
            "min_residual": self.min_residual,
            "argmin": self.argmin,
            "margins": dict(self.margins),
            **self.extra,
        }

    def __iter__(self):
        # allows ``min_residual, argmin = scan_nonexistence(...)``
        return iter((self.min_residual, self.argmin))

    def write_csv(self, path, config_hash: str | None = None):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if config_hash:
                fh.write(f"# config_sha256={config_hash}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(self.params) + ["residual"])
            for row, res in zip(self.points, self.residuals):
                w.writerow([format(float(x), ".17g") for x in (*row, res)])


# --- per-case residuals, vectorised over columns of ``pts`` ----------------------


def _equator_hemisphere(c, m, pts):
    R = c.radius
    u, v, a2, a3 = pts.T
    total = np.zeros(len(pts))
    with np.errstate(divide="ignore", invalid="ignore"):
        for h, a, mj in ((u, a2, m[1]), (v, a3, m[2])):
            big = h * (2.0 * R - h)
            rho2 = R * R + big - 2.0 * R * np.sqrt(big) * np.cos(a) + (R - h) ** 2
            gap = 1.0 - c.kappa * rho2 / 4.0
            total = total + mj * (R - h) / (rho2**1.5 * gap**1.5)
    return total


def _hyperbolic_isosceles(c, m, pts):
    s, v = pts.T
    mu = c.sqrt_abs * v
    delta = -mu * (mu + 2.0)
    f = 2.0 / ((1.0 - s) * (3.0 + 2.0 * s))
    return np.abs(f - delta)


def _restricted_lhs(kappa, r):
    kr2 = kappa * r * r
    return kr2 / (np.sqrt(1.0 - kr2) + np.sqrt(1.0 - 2.0 * kr2)) ** 2


def _hyperbolic_restricted_equal(c, m, pts):
    return np.abs(_restricted_lhs(c.kappa, pts[:, 0]) - 1.0)


def general_restricted_factor(kappa, mu, r):
    """rho^2 (1 + kappa mu r^2) / (2 (1 + mu)^2 r^2) - 1 for r1 = r, r2 = mu r."""
    mu = np.asarray(mu, dtype=float)
    r = np.asarray(r, dtype=float)
    r2 = r * r
    root = np.sqrt(1.0 - kappa * r2) + np.sqrt(np.maximum(1.0 - kappa * mu * mu * r2, 0.0))
    rho2 = (1.0 + mu) ** 2 * r2 + kappa * (1.0 - mu) ** 2 * r2 * r2 / root**2
    return rho2 * (1.0 + kappa * mu * r2) / (2.0 * (1.0 + mu) ** 2 * r2) - 1.0


def _general_restricted(c, m, pts):
    mu, r = pts.T
    return general_restricted_factor(c.kappa, mu, r)


def _scalene_point(c, m, lam, a2, a3):
    R = c.radius
    if c.kappa > 0:
        height = -lam * R
        big = -height * (2.0 * R + height)
    else:
        height = lam
        big = lam * (lam + 2.0 * R)
    rad = math.sqrt(max(big, 0.0))
    ph = np.array([0.0, a2, a3])
    pos = np.column_stack([rad * np.cos(ph), rad * np.sin(ph), np.full(3, height)])
    turn = np.column_stack([-pos[:, 1], pos[:, 0], np.zeros(3)])
    try:
        a0 = accel_extrinsic(c, m, BodyState3D(pos, np.zeros((3, 3))))
        a1 = accel_extrinsic(c, m, BodyState3D(pos, turn)) - a0
    except (SingularityError, DomainError):
        return math.inf
    # acc(alpha^2) = a0 + alpha^2 a1 must equal -alpha^2 (x, y, 0)
    target = np.column_stack([pos[:, :2], np.zeros(3)])
    b = (a1 + target).ravel()
    a = a0.ravel()
    bb = float(b @ b)
    w = max(0.0, -float(a @ b) / bb) if bb > 0 else 0.0
    return float(np.linalg.norm(a + w * b))


def _scalene_parallel(c, m, pts):
    return np.array([_scalene_point(c, m, *row) for row in pts])


_EVAL = {
    "equator_hemisphere": _equator_hemisphere,
    "hyperbolic_isosceles": _hyperbolic_isosceles,
    "hyperbolic_restricted_equal": _hyperbolic_restricted_equal,
    "general_restricted": _general_restricted,
    "scalene_parallel": _scalene_parallel,
}


# --- grid validation against each case's excluded set ---------------------------


def _phase_gap(a, b):
    d = np.mod(a - b, 2.0 * math.pi)
    return np.minimum(d, 2.0 * math.pi - d)


def _check_grid(case, c, pts, margin):
    """Raise when the grid leaves the domain or touches the excluded set; return margins."""
    k = c.kappa
    if case == "equator_hemisphere":
        if k <= 0:
            raise DomainError("equator_hemisphere needs kappa > 0")
        R = c.radius
        u, v = pts[:, 0], pts[:, 1]
        if np.any((u < 0) | (u > R) | (v < 0) | (v > R)):
            raise DomainError("u and v must lie in [0, R] (one closed hemisphere)")
        dist = np.maximum(R - u, R - v) / R
        if np.any(dist < margin):
            raise DomainError(
                f"grid touches the all-equatorial set u = v = R (margin {margin} R required)")
        return {"corner_margin": margin, "min_corner_distance": float(dist.min())}
    if case == "hyperbolic_isosceles":
        if k >= 0:
            raise DomainError("hyperbolic_isosceles needs kappa < 0")
        s, v = pts[:, 0], pts[:, 1]
        if np.any((s <= -1) | (s >= 0)) or np.any(v <= 0):
            raise DomainError("need s in (-1, 0) and v > 0")
        gap = np.abs(s - S_EQUILATERAL)
        if np.any(gap < margin):
            raise DomainError(f"grid touches the equilateral shape s = -1/2 (margin {margin})")
        return {"equilateral_margin": margin, "min_equilateral_distance": float(gap.min())}
    if case == "hyperbolic_restricted_equal":
        if k >= 0:
            raise DomainError("hyperbolic_restricted_equal needs kappa < 0")
        if np.any(pts[:, 0] <= 0):
            raise DomainError("need r > 0")
        return {}
    if case == "general_restricted":
        mu, r = pts[:, 0], pts[:, 1]
        if np.any(r <= 0):
            raise DomainError("need r > 0")
        if np.any(mu < 1):
            raise DomainError("need mu = M/m >= 1")
        gap = mu - 1.0
        if np.any(gap < margin):
            raise DomainError(f"grid touches the equal-mass line mu = 1 (margin {margin})")
        if k > 0 and np.any(k * (mu * r) ** 2 > 1.0 + 1e-12):
            raise DomainError("need mu r <= R so that the outer primary stays on the chart")
        return {"equal_mass_margin": margin, "min_mu_minus_1": float(gap.min())}
    if case == "scalene_parallel":
        if k == 0:
            raise DomainError("scalene_parallel needs kappa != 0")
        lam = pts[:, 0]
        if k > 0 and np.any((lam <= 0) | (lam >= 2)):
            raise DomainError("on the sphere lam must lie in (0, 2)")
        if k < 0 and np.any(lam <= 0):
            raise DomainError("on the hyperbolic sphere the height lam must be positive")
        a2, a3 = pts[:, 1], pts[:, 2]
        # sides are the phase gaps; isosceles when two gaps agree
        g = np.column_stack([_phase_gap(a2, 0.0), _phase_gap(a3, 0.0), _phase_gap(a2, a3)])
        spread = np.min(np.abs(g[:, [0, 0, 1]] - g[:, [1, 2, 2]]), axis=1)
        if np.any(spread < margin):
            raise DomainError(f"grid touches an isosceles arrangement (margin {margin})")
        return {"isosceles_margin": margin, "min_side_difference": float(spread.min())}
    raise DomainError(f"unknown scan case {case!r}; expected one of {CASES}")


def _as_points(case, grid):
    names = PARAMS[case]
    if isinstance(grid, dict):
        missing = [n for n in names if n not in grid]
        extra = [n for n in grid if n not in names]
        if missing or extra:
            raise DomainError(f"{case} grid needs axes {names}, got {sorted(grid)}")
        axes = [np.atleast_1d(np.asarray(grid[n], dtype=float)) for n in names]
        if any(a.size == 0 for a in axes):
            raise DomainError("grid axes must be nonempty")
        pts = np.array(list(itertools.product(*axes)), dtype=float)
    else:
        pts = np.atleast_2d(np.asarray(grid, dtype=float))
        if pts.shape[1] != len(names):
            raise DomainError(f"{case} points need {len(names)} columns {names}")
    if pts.size == 0 or not np.all(np.isfinite(pts)):
        raise DomainError("grid must be nonempty and finite")
    return pts


def scan_nonexistence(case: str, c, m=(1.0, 1.0, 1.0), grid=None, margin: float | None = None,
                      threads: int | None = None) -> ScanReport:
    """Evaluate the obstruction for ``case`` on ``grid`` and report its minimum.

    ``grid`` maps each parameter name (see ``PARAMS``) to a 1-D sequence, or
    is an explicit (n, k) array of points; ``None`` uses :func:`default_grid`.
    Singular grid points (collisions, antipodes) get an infinite residual and
    are counted in ``extra["singular_points"]``.
    """
    if case not in CASES:
        raise DomainError(f"unknown scan case {case!r}; expected one of {CASES}")
    c = as_curvature(c)
    m = as_masses(m)
    margin = DEFAULT_MARGINS[case] if margin is None else float(margin)
    pts = _as_points(case, default_grid(case, c) if grid is None else grid)
    margins = _check_grid(case, c, pts, margin)

    fn = _EVAL[case]
    chunks = [pts[i:i + _CHUNK] for i in range(0, len(pts), _CHUNK)]
    workers = min(threads or thread_count(), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda p: fn(c, m, p), chunks))
    else:
        parts = [fn(c, m, p) for p in chunks]
    signed = np.concatenate(parts)
    res = np.abs(signed)
    bad = ~np.isfinite(res)
    res[bad] = np.inf
    extra = {"singular_points": int(bad.sum())}
    if case == "general_restricted":
        ok = signed[~bad]
        extra["max_factor"] = float(ok.max()) if ok.size else math.nan
        extra["factor_negative"] = bool(ok.size and ok.max() < 0)
    return ScanReport(case, c.kappa, tuple(m), PARAMS[case], pts, res, margins, extra)


def default_grid(case: str, c) -> dict:
    """Moderate grids that respect each case's excluded set with its default margin."""
    c = as_curvature(c)
    if case == "equator_hemisphere":
        R = c.radius
        # phases stay off 0 and pi so none of bodies 2, 3 meets body 1 or its antipode
        ph = np.linspace(0.0, 2.0 * math.pi, 26)[1:-1]
        ph = ph[np.abs(ph - math.pi) > 1e-3]
        return {"u": np.linspace(0.0, 0.99 * R, 12), "v": np.linspace(0.0, R, 12),
                "a2": ph, "a3": ph}
    if case == "hyperbolic_isosceles":
        s = np.linspace(-0.999, -0.001, 999)
        s = s[np.abs(s - S_EQUILATERAL) >= DEFAULT_MARGINS[case]]
        return {"s": s, "v": np.geomspace(1e-3, 10.0, 41) * c.radius}
    if case == "hyperbolic_restricted_equal":
        return {"r": np.linspace(0.0, 5.0, 501)[1:]}
    if case == "general_restricted":
        mus = np.linspace(1.0, 5.0, 401)[1:]
        if c.kappa > 0:
            frac = np.linspace(0.0, 1.0, 201)[1:]
            pts = [(mu, f * c.radius / mu) for mu in mus for f in frac]
            return np.array(pts)
        return {"mu": mus, "r": np.linspace(0.0, 5.0, 201)[1:]}
    if case == "scalene_parallel":
        lam = np.linspace(0.1, 1.9, 10) if c.kappa > 0 else np.geomspace(0.05, 5.0, 10)
        ph = np.linspace(0.0, 2.0 * math.pi, 19)[1:-1]
        pts = [(lv, a2, a3) for lv in lam for a2 in ph for a3 in ph if a2 < a3]
        pts = np.array(pts)
        g = np.column_stack([_phase_gap(pts[:, 1], 0.0), _phase_gap(pts[:, 2], 0.0),
                             _phase_gap(pts[:, 1], pts[:, 2])])
        spread = np.min(np.abs(g[:, [0, 0, 1]] - g[:, [1, 2, 2]]), axis=1)
        return pts[spread >= DEFAULT_MARGINS[case]]
    raise DomainError(f"unknown scan case {case!r}; expected one of {CASES}")
