"""Relative equilibria: rigidly rotating solutions about the z-axis.

Every family is described by a :class:`ReCandidate` holding, per body, the
planar radius r_i and phase a_i at t = 0, so that body i sits at
r_i (cos(alpha t + a_i), sin(alpha t + a_i)).  :func:`re_residual` plugs the
ansatz back into the equations of motion.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import BodyState3D, PlanarState, accel_extrinsic, accel_reduced, as_masses
from .errors import DomainError, FamilyConstraintError
from .geometry import ON_MANIFOLD_TOL, Curvature, as_curvature, constraint_residuals, omega_from_planar

BUILD_TOL = 1e-10
# bodies closer than this (in units of 1 - kappa r^2) to the equator use the ambient equations
_CHART_MARGIN = 1e-9


class Family(str, enum.Enum):
    EQUATORIAL_SCALENE = "equatorial_scalene"
    ISOSCELES_BAND = "isosceles_band"
    LAGRANGE_EQUAL_MASS = "lagrange_equal_mass"
    PLANETARY = "planetary"
    RESTRICTED_EQUAL_MASS = "restricted_equal_mass"
    GENERAL_RESTRICTED = "general_restricted"
    CLASSICAL_LAGRANGE = "classical_lagrange"


@dataclass
class ReCandidate:
    family: Family
    kappa: float
    masses: tuple
    radii: tuple
    phases: tuple
    alpha: float
    theta: float | None = None
    # True for bodies on the sphere's far hemisphere (below the equator plane)
    lower: tuple = (False, False, False)
    # ambient z of each body; derived from radii/lower when omitted
    heights: tuple | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.family = Family(self.family)
        self.kappa = float(self.kappa)
        self.masses = tuple(float(x) for x in self.masses)
        self.radii = tuple(float(x) for x in self.radii)
        self.phases = tuple(float(x) for x in self.phases)
        self.lower = tuple(bool(x) for x in self.lower)
        self.alpha = float(self.alpha)
        if len(self.masses) != 3 or len(self.radii) != 3 or len(self.phases) != 3:
            raise DomainError("candidates describe exactly three bodies")
        if any(r < 0 for r in self.radii):
            raise DomainError("radii must be nonnegative")
        if self.kappa > 0 and any(r > 1.0 / math.sqrt(self.kappa) * (1 + 1e-15) for r in self.radii):
            raise DomainError("radius exceeds the sphere's radius")
        if self.kappa <= 0 and any(self.lower):
            raise DomainError("only the sphere has a lower hemisphere")
        if self.heights is None:
            self.heights = tuple(self._derived_heights())
        else:
            self.heights = tuple(float(z) for z in self.heights)
            if len(self.heights) != 3:
                raise DomainError("candidates describe exactly three bodies")
            pos = np.column_stack([self.radii, np.zeros(3), self.heights])
            g1, _ = constraint_residuals(self.kappa, pos, np.zeros((3, 3)))
            if np.max(np.abs(g1)) > ON_MANIFOLD_TOL:
                raise DomainError("heights are inconsistent with the radii on this manifold")

    def _derived_heights(self):
        k = self.kappa
        if k == 0:
            return np.zeros(3)
        areas = np.array(self.radii) ** 2
        if k > 0:
            areas = np.minimum(areas, 1.0 / k)
        return np.atleast_1d(omega_from_planar(k, np.column_stack([np.sqrt(areas), np.zeros(3)]),
                                               lower=np.array(self.lower)))

    @property
    def curvature(self) -> Curvature:
        return Curvature(self.kappa)

    @property
    def alpha2(self) -> float:
        # builders store the closed-form value so that squaring sqrt(alpha^2) does not round
        exact = self.meta.get("alpha2")
        if exact is not None and abs(exact - self.alpha**2) <= 1e-12 * self.alpha**2:
            return float(exact)
        return self.alpha**2

    @property
    def period(self) -> float:
        return 2.0 * math.pi / abs(self.alpha)

    def planar_state(self, t: float = 0.0) -> PlanarState:
        r = np.array(self.radii)
        ang = self.alpha * t + np.array(self.phases)
        pos = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
        vel = self.alpha * np.column_stack([-pos[:, 1], pos[:, 0]])
        return PlanarState(pos, vel)

    def state_3d(self, t: float = 0.0) -> BodyState3D:
        s = self.planar_state(t)
        pos = np.column_stack([s.pos, self.heights])
        vel = np.column_stack([s.vel, np.zeros(3)])
        return BodyState3D(pos, vel)

    def needs_extrinsic(self) -> bool:
        """True when some body is off the reduced chart (far hemisphere or equator)."""
        if self.kappa <= 0:
            return False
        rad = 1.0 / math.sqrt(self.kappa)
        return any(self.lower) or any(z <= -rad * (1.0 - _CHART_MARGIN) for z in self.heights)

    def initial_state(self):
        """The t = 0 state in the formulation best suited to this candidate."""
        return self.state_3d() if self.needs_extrinsic() else self.planar_state()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["family"] = self.family.value
        d["masses"] = list(self.masses)
        d["radii"] = list(self.radii)
        d["phases"] = list(self.phases)
        d["lower"] = list(self.lower)
        d["heights"] = list(self.heights)
        d["alpha2"] = self.alpha2
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ReCandidate":
        d = dict(d)
        d.pop("alpha2", None)
        d.pop("residual", None)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise DomainError(f"unknown candidate fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ReCandidate":
        return cls.from_dict(json.loads(text))


def re_residual(c, m, cand: ReCandidate) -> float:
    """Max over bodies of |acceleration - (-alpha^2 x, -alpha^2 y[, 0])| at t = 0.

    Uses the reduced equations when every body lies in the reduced chart and
    the ambient equations otherwise (far hemisphere, equator).
    """
    c = as_curvature(c if c is not None else cand.kappa)
    m = as_masses(m if m is not None else cand.masses)
    a2 = cand.alpha2
    if cand.needs_extrinsic():
        s3 = cand.state_3d()
        acc = accel_extrinsic(c, m, s3)
        target = np.zeros((3, 3))
        target[:, :2] = -a2 * s3.pos[:, :2]
    else:
        s = cand.planar_state()
        acc = accel_reduced(c, m, s)
        target = -a2 * s.pos
    return float(np.max(np.linalg.norm(acc - target, axis=1)))


def _signed_alpha(alpha2: float, direction) -> float:
    if direction not in (1, -1, 1.0, -1.0):
        raise DomainError(f"direction must be +1 or -1, got {direction}")
    if not alpha2 > 0:
        raise DomainError(f"angular velocity squared must be positive, got {alpha2}")
    return math.copysign(math.sqrt(alpha2), direction)


def _need_sphere(c: Curvature, family: str, code="curvature"):
    if c.kappa <= 0:
        raise FamilyConstraintError(f"the {family} family exists only on spheres (kappa > 0)", code)


# --- the shape function F and the isosceles family --------------------------------


S_EQUILATERAL = -0.5
GAMMA_MIN = 16.0 / 25.0
GAMMA_RIGHT = 2.0 / 3.0


def f_of_s(s: float) -> float:
    """F(s) = -(4s+2)/(4s^3+4s^2-5s-3), the latitude parameter of shape s = cos a.

    Numerator and denominator share the factor (2s+1); it is cancelled
    analytically, giving 2/((1-s)(3+2s)), which keeps full precision near
    s = -1/2 where the raw quotient is 0/0.
    """
    s = float(s)
    if not -1.0 <= s <= 0.0:
        raise DomainError(f"shape parameter must lie in [-1, 0], got {s}")
    if s == S_EQUILATERAL:
        raise DomainError("F(-1/2) = 0/0: the equilateral shape fits any latitude")
    return 2.0 / ((1.0 - s) * (3.0 + 2.0 * s))


def latitude_cubic(gamma: float, s: float) -> float:
    """4 gamma s^3 + 4 gamma s^2 + (4 - 5 gamma) s - 3 gamma + 2."""
    return 4 * gamma * s**3 + 4 * gamma * s**2 + (4 - 5 * gamma) * s - 3 * gamma + 2


def _bisect(fn, lo, hi, iters=200):
    flo = fn(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fmid = fn(mid)
        if fmid == 0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def isosceles_shapes_at_latitude(gamma: float, exclusion_tol: float = 1e-12) -> list:
    """Shapes s in (-1, 0) \\ {-1/2} with F(s) = gamma, ascending.

    F decreases on [-1, -1/4] from 1 to 16/25 and increases on [-1/4, 0] from
    16/25 to 2/3, so each branch is bracketed and bisected.  The endpoints
    s = -1 (collision-antipodal), s = 0 (right triangle) and s = -1/2
    (equilateral) are dropped.
    """
    gamma = float(gamma)
    if not (GAMMA_MIN <= gamma < 1.0):
        return []
    g = lambda s: f_of_s(s) - gamma if s != S_EQUILATERAL else GAMMA_RIGHT - gamma  # noqa: E731
    roots = []
    if gamma == GAMMA_MIN:
        return [-0.25]
    roots.append(_bisect(g, -1.0, -0.25))
    if gamma <= GAMMA_RIGHT:
        roots.append(_bisect(g, -0.25, 0.0))
    out = []
    for s in roots:
        if s <= -1.0 + exclusion_tol or s >= -exclusion_tol:
            continue
        if abs(s - S_EQUILATERAL) <= exclusion_tol:
            continue
        if out and abs(out[-1] - s) <= exclusion_tol:
            continue
        out.append(s)
    return sorted(out)


@dataclass
class IsoscelesSolution:
    s: float
    a: float
    gamma: float
    lam: float
    mass_ratio: float

    @classmethod
    def from_mass_ratio(cls, mass_ratio: float, hemisphere: str = "north") -> "IsoscelesSolution":
        s = -mass_ratio / 2.0
        gamma = f_of_s(s)
        return cls(s, math.acos(s), gamma, latitude_lambda(gamma, hemisphere), mass_ratio)


def latitude_lambda(gamma: float, hemisphere: str = "north") -> float:
    """Root of lambda (2 - lambda) = gamma; north is the hemisphere through the origin."""
    if hemisphere not in ("north", "south"):
        raise DomainError(f"hemisphere must be 'north' or 'south', got {hemisphere!r}")
    d = math.sqrt(1.0 - gamma)
    return 1.0 - d if hemisphere == "north" else 1.0 + d


def _parallel_alpha2(c: Curvature, m, big_omega: float, phases, body: int = 0) -> float:
    """alpha^2 balancing the height equation of ``body`` on a common parallel circle.

    alpha^2 = sum_j m_j / (2 rho_ij Omega (1 - kappa rho_ij^2 / 4)^{3/2}).
    """
    total = 0.0
    for j in range(3):
        if j == body or m[j] == 0:
            continue
        rho2 = 2.0 * big_omega * (1.0 - math.cos(phases[j] - phases[body]))
        gap = 1.0 - c.kappa * rho2 / 4.0
        total += m[j] / (math.sqrt(rho2) * gap**1.5)
    return total / (2.0 * big_omega)


def isosceles_re_build(c, M: float, m: float, hemisphere: str = "north", direction: int = 1) -> ReCandidate:
    """Isosceles relative equilibrium on a non-geodesic parallel circle.

    Body 1 (mass M) at the apex, bodies 2, 3 (mass m) at phases +-a with
    cos a = -M/(2m).  Needs 0 < M < 2m and M != m.  The resulting branch label
    is ``inner`` for shapes with s <= -1/4 (M/m >= 1/2), ``outer`` otherwise.
    """
    c = as_curvature(c)
    _need_sphere(c, "isosceles")
    if not (M > 0 and m > 0):
        raise FamilyConstraintError("isosceles family needs positive masses", "mass_ratio")
    if M >= 2 * m:
        raise FamilyConstraintError(
            f"isosceles family requires M < 2m (got M={M}, m={m})", "mass_ratio")
    if M == m:
        raise FamilyConstraintError(
            "equal masses reduce to the equilateral family; use lagrange_equal_mass_build",
            "equal_masses")
    sol = IsoscelesSolution.from_mass_ratio(M / m, hemisphere)
    R = c.radius
    u = sol.lam * R
    big = u * (2.0 * R - u)
    phases = (0.0, sol.a, 2.0 * math.pi - sol.a)
    masses = (M, m, m)
    alpha2 = _parallel_alpha2(c, masses, big, phases)
    lower = hemisphere == "south"
    radius = math.sqrt(big)
    return ReCandidate(
        Family.ISOSCELES_BAND, c.kappa, masses, (radius,) * 3, phases,
        _signed_alpha(alpha2, direction), lower=(lower,) * 3, heights=(-u,) * 3,
        meta={"alpha2": alpha2, "s": sol.s, "a": sol.a, "gamma": sol.gamma, "lambda": sol.lam,
              "latitude": abs(1.0 - sol.lam) * R, "hemisphere": hemisphere,
              "branch": "inner" if sol.s <= -0.25 else "outer"},
    )


def isosceles_re_from_latitude(c, gamma: float, m: float = 1.0, branch: str = "inner",
                               hemisphere: str = "north", direction: int = 1) -> ReCandidate:
    """Isosceles equilibrium on the parallel with latitude parameter ``gamma``.

    ``branch`` picks the root of F(s) = gamma: ``inner`` on the decreasing
    branch (s < -1/4), ``outer`` on the increasing one; both exist only for
    16/25 < gamma < 2/3.
    """
    c = as_curvature(c)
    _need_sphere(c, "isosceles")
    if gamma >= 1.0:
        raise FamilyConstraintError(
            "gamma = 1 collapses bodies 2 and 3 (collision-antipodal singularity)",
            "collision_antipodal")
    if gamma == GAMMA_RIGHT and branch == "outer":
        raise FamilyConstraintError(
            "gamma = 2/3 on the outer branch gives a right isosceles triangle, which is not acute",
            "right_isosceles")
    roots = isosceles_shapes_at_latitude(gamma)
    if branch not in ("inner", "outer"):
        raise DomainError(f"branch must be 'inner' or 'outer', got {branch!r}")
    pick = [s for s in roots if (s < -0.25) == (branch == "inner")] or (
        roots if len(roots) == 1 and roots[0] == -0.25 else [])
    if not pick:
        raise FamilyConstraintError(
            f"no isosceles shape on the {branch} branch at gamma = {gamma}", "no_shape")
    return isosceles_re_build(c, -2.0 * pick[0] * m, m, hemisphere, direction)


def lagrange_equal_mass_build(c, m: float, lambda_or_v: float, direction: int = 1) -> ReCandidate:
    """Equal-mass equilateral triangle on a parallel circle.

    On the sphere the circle sits at height -lambda R with 0 < lambda < 2
    (lambda = 1 is the equator); on the hyperbolic sphere at height v > 0.
    """
    c = as_curvature(c)
    if c.kappa == 0:
        raise FamilyConstraintError("use classical_lagrange_build on the plane", "curvature")
    if not m > 0:
        raise FamilyConstraintError("masses must be positive", "mass_ratio")
    R = c.radius
    if c.kappa > 0:
        lam = float(lambda_or_v)
        if not 0.0 < lam < 2.0:
            raise DomainError(f"lambda must lie in (0, 2), got {lam}")
        u = lam * R
        big = u * (2.0 * R - u)
        lower = lam > 1.0
        height = -u
        meta = {"lambda": lam, "latitude": abs(1.0 - lam) * R}
    else:
        v = float(lambda_or_v)
        if not v > 0.0:
            raise DomainError(f"height v must be positive, got {v}")
        big = v * (v + 2.0 * R)
        lower = False
        height = v
        meta = {"v": v}
    phases = (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)
    masses = (m, m, m)
    alpha2 = _parallel_alpha2(c, masses, big, phases)
    meta["alpha2"] = alpha2
    radius = math.sqrt(big)
    if c.kappa > 0 and abs(1.0 - lam) < 1e-15:
        radius = R
    return ReCandidate(Family.LAGRANGE_EQUAL_MASS, c.kappa, masses, (radius,) * 3, phases,
                       _signed_alpha(alpha2, direction), lower=(lower,) * 3,
                       heights=(height,) * 3, meta=meta)


def _equatorial_s(c: Curvature, angles):
    a1, a2, a3 = angles
    out = []
    for d in (a1 - a2, a2 - a3, a3 - a1):
        sd = math.sin(d)
        if abs(sd) < 1e-12:
            raise DomainError("two bodies coincide or are antipodal on the equator")
        out.append(c.kappa**1.5 * sd / abs(sd) ** 3)
    return out


def equatorial_system_residual(c, masses, angles) -> float:
    """Max row of m1 s1 - m3 s2 = 0, -m2 s1 + m3 s3 = 0, m2 s2 - m1 s3 = 0."""
    c = as_curvature(c)
    s1, s2, s3 = _equatorial_s(c, angles)
    m1, m2, m3 = masses
    return max(abs(m1 * s1 - m3 * s2), abs(-m2 * s1 + m3 * s3), abs(m2 * s2 - m1 * s3))


def equatorial_masses_from_angles(c, a1: float, a2: float, a3: float):
    """Masses (normalised to m2 = 1) that make the equatorial triangle rotate rigidly.

    Returns ``(masses, gamma)``.  Raises FamilyConstraintError when the
    triangle is not acute, which shows up as a nonpositive mass.
    """
    c = as_curvature(c)
    _need_sphere(c, "equatorial")
    s1, s2, s3 = _equatorial_s(c, (a1, a2, a3))
    gamma = s3
    masses = (s2 / gamma, 1.0, s1 / gamma)
    if min(masses) <= 0:
        raise FamilyConstraintError(
            "only acute triangles inscribed in the equator carry positive masses", "not_acute")
    return masses, gamma


def equatorial_re_build(c, angles, alpha: float = 1.0, scale: float = 1.0) -> ReCandidate:
    """Equatorial scalene equilibrium; any nonzero ``alpha`` works."""
    c = as_curvature(c)
    masses, gamma = equatorial_masses_from_angles(c, *angles)
    if alpha == 0:
        raise DomainError("alpha must be nonzero")
    R = c.radius
    return ReCandidate(Family.EQUATORIAL_SCALENE, c.kappa, tuple(scale * x for x in masses),
                       (R, R, R), tuple(angles), alpha, heights=(-R, -R, -R),
                       meta={"gamma": gamma})


def planetary_re_build(c, m: float, r: float, direction: int = 1) -> ReCandidate:
    """One mass m at the origin, two negligible masses on the circle of radius r."""
    c = as_curvature(c)
    if not (m > 0 and r > 0):
        raise DomainError("planetary family needs m > 0 and r > 0")
    k = c.kappa
    if k * r * r >= 1.0:
        raise DomainError(f"kappa r^2 = {k * r * r} must stay below 1")
    q = math.sqrt(1.0 - k * r * r)
    cos_theta = q / (1.0 + q)
    theta = math.acos(cos_theta)
    alpha2 = m * (1.0 - k * r * r + q) / (r**3 * (1.0 - k * r * r) * (1.0 + q))
    return ReCandidate(Family.PLANETARY, k, (m, 0.0, 0.0), (0.0, r, r), (0.0, 0.0, theta),
                       _signed_alpha(alpha2, direction), theta=theta,
                       meta={"alpha2": alpha2, "cos_theta": cos_theta})


def restricted_equalmass_re_build(c, m: float, direction: int = 1) -> ReCandidate:
    """Two equal masses on the parallel of radius (2 kappa)^{-1/2}, a test mass on the equator."""
    c = as_curvature(c)
    if c.kappa <= 0:
        raise FamilyConstraintError(
            "the equal-mass restricted equilateral family exists only for kappa > 0 "
            "(none on the plane's scale nor on hyperbolic spheres)", "curvature")
    if not m > 0:
        raise FamilyConstraintError("masses must be positive", "mass_ratio")
    R = c.radius
    r = 1.0 / math.sqrt(2.0 * c.kappa)
    alpha2 = 2.0 * m * c.kappa**1.5
    z = -R * (1.0 - math.sqrt(0.5))
    return ReCandidate(Family.RESTRICTED_EQUAL_MASS, c.kappa, (m, m, 0.0), (r, r, R),
                       (0.0, math.pi, math.pi / 2.0), _signed_alpha(alpha2, direction),
                       theta=math.pi / 2.0, heights=(z, z, -R), meta={"alpha2": alpha2})


def classical_lagrange_build(masses, d: float = 1.0, direction: int = 1) -> ReCandidate:
    """Planar Lagrange triangle of side d rotating about its centre of mass."""
    m = as_masses(masses)
    if not d > 0:
        raise DomainError("side length must be positive")
    verts = d * np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]])
    verts -= (m @ verts) / m.sum()
    radii = np.hypot(verts[:, 0], verts[:, 1])
    phases = np.arctan2(verts[:, 1], verts[:, 0])
    alpha2 = m.sum() / d**3
    return ReCandidate(Family.CLASSICAL_LAGRANGE, 0.0, tuple(m), tuple(radii), tuple(phases),
                       _signed_alpha(alpha2, direction), meta={"alpha2": alpha2, "side": d})


def perturbed(cand: ReCandidate, radius_factor=1.0, alpha_factor=1.0, bodies=(0, 1, 2)) -> ReCandidate:
    radii = tuple(r * radius_factor if i in bodies else r for i, r in enumerate(cand.radii))
    d = cand.to_dict()
    meta = {k: v for k, v in cand.meta.items() if k != "alpha2"}
    d.update(radii=list(radii), alpha=cand.alpha * alpha_factor, heights=None, meta=meta)
    return ReCandidate.from_dict(d)
