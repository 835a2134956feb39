"""Equations of motion of the curved 3-body problem and their first integrals.

Four equivalent formulations are provided:

* :func:`accel_extrinsic` - 3D ambient coordinates subject to the quadric constraint,
* :func:`accel_reduced`   - planar (x, y) coordinates with the height eliminated,
  analytic in kappa through 0,
* :func:`accel_newtonian` - the kappa = 0 planar problem,
* :func:`accel_cylindrical` - (phi, omega) coordinates adapted to rotations.

Units have G = 1.  Bodies with zero mass feel forces but exert none.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChartSingularityError, DomainError, SingularityError
from .geometry import Curvature, as_curvature, chord_sq_3d, lift, planar_area

COLLISION_TOL = 1e-12
ANTIPODAL_TOL = 1e-12
CHART_TOL = 1e-12

PAIRS = ((0, 1), (0, 2), (1, 2))


def as_masses(m) -> np.ndarray:
    m = np.asarray(m, dtype=float).reshape(-1)
    if m.shape != (3,):
        raise DomainError(f"expected three masses, got {m.tolist()}")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise DomainError(f"masses must be finite and nonnegative, got {m.tolist()}")
    if not np.any(m > 0):
        raise DomainError("at least one mass must be positive")
    return m


@dataclass
class PlanarState:
    """Reduced coordinates: positions and velocities of shape (3, 2)."""

    pos: np.ndarray
    vel: np.ndarray

    def __post_init__(self):
        self.pos = np.array(self.pos, dtype=float).reshape(3, 2)
        self.vel = np.array(self.vel, dtype=float).reshape(3, 2)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.pos.ravel(), self.vel.ravel()])

    @classmethod
    def from_vector(cls, y) -> "PlanarState":
        y = np.asarray(y, dtype=float)
        return cls(y[:6], y[6:])

    def areas(self) -> np.ndarray:
        return planar_area(self.pos)

    def b_terms(self, c: Curvature) -> np.ndarray:
        """B_i = (x_i xdot_i + y_i ydot_i)^2 / (1 - kappa A_i)."""
        radial = np.einsum("ij,ij->i", self.pos, self.vel)
        return radial**2 / _chart_gap(c, self.areas())

    def rotated(self, beta: float) -> "PlanarState":
        rot = _rotation(beta)
        return PlanarState(self.pos @ rot.T, self.vel @ rot.T)


@dataclass
class BodyState3D:
    """Ambient coordinates: positions and velocities of shape (3, 3)."""

    pos: np.ndarray
    vel: np.ndarray

    def __post_init__(self):
        self.pos = np.array(self.pos, dtype=float).reshape(3, 3)
        self.vel = np.array(self.vel, dtype=float).reshape(3, 3)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.pos.ravel(), self.vel.ravel()])

    @classmethod
    def from_vector(cls, y) -> "BodyState3D":
        y = np.asarray(y, dtype=float)
        return cls(y[:9], y[9:])

    @classmethod
    def from_planar(cls, c, s: PlanarState, lower=None) -> "BodyState3D":
        pos, vel = lift(c, s.pos, s.vel, lower=lower)
        return cls(pos, vel)

    def planar(self) -> PlanarState:
        return PlanarState(self.pos[:, :2], self.vel[:, :2])


@dataclass
class CylindricalState:
    """Per-body longitude phi, height omega and their rates."""

    phi: np.ndarray
    omega: np.ndarray
    phidot: np.ndarray
    omegadot: np.ndarray

    def __post_init__(self):
        for name in ("phi", "omega", "phidot", "omegadot"):
            setattr(self, name, np.array(getattr(self, name), dtype=float).reshape(3))

    def big_omega(self, c: Curvature) -> np.ndarray:
        """Squared planar radius: Omega_i (kappa > 0) or Psi_i (kappa < 0)."""
        return -c.sigma * self.omega * (self.omega + 2.0 * c.radius)

    def big_omega_dot(self, c: Curvature) -> np.ndarray:
        return -2.0 * c.sigma * self.omegadot * (self.omega + c.radius)

    def to_3d(self, c) -> BodyState3D:
        c = as_curvature(c)
        big = self.big_omega(c)
        if np.any(big < 0):
            raise DomainError("height outside the manifold's range")
        rad = np.sqrt(big)
        raddot = np.where(rad > 0, self.big_omega_dot(c) / (2.0 * np.where(rad > 0, rad, 1.0)), 0.0)
        cos, sin = np.cos(self.phi), np.sin(self.phi)
        pos = np.column_stack([rad * cos, rad * sin, self.omega])
        vel = np.column_stack([
            raddot * cos - rad * sin * self.phidot,
            raddot * sin + rad * cos * self.phidot,
            self.omegadot,
        ])
        return BodyState3D(pos, vel)

    @classmethod
    def from_3d(cls, s: BodyState3D) -> "CylindricalState":
        x, y = s.pos[:, 0], s.pos[:, 1]
        vx, vy = s.vel[:, 0], s.vel[:, 1]
        rad2 = x**2 + y**2
        if np.any(rad2 == 0):
            raise ChartSingularityError("a body sits on the rotation axis")
        phi = np.arctan2(y, x)
        phidot = (x * vy - y * vx) / rad2
        return cls(phi, s.pos[:, 2], phidot, s.vel[:, 2])


@dataclass
class ConservedQuantities:
    h: float
    c1: float
    c2: float
    c3: float

    def as_tuple(self):
        return (self.h, self.c1, self.c2, self.c3)


def _rotation(beta):
    cb, sb = np.cos(beta), np.sin(beta)
    return np.array([[cb, -sb], [sb, cb]])


def _chart_gap(c: Curvature, areas) -> np.ndarray:
    gap = 1.0 - c.kappa * np.asarray(areas, dtype=float)
    if np.any(gap <= 0):
        raise DomainError(
            "a body left the reduced chart (kappa*A >= 1); use the extrinsic formulation"
        )
    return gap


def _pair_factor(c: Curvature, rho2: float, i: int, j: int) -> float:
    """1 / (rho^3 (1 - kappa rho^2/4)^{3/2}) with collision/antipodal guards."""
    if rho2 < COLLISION_TOL**2:
        raise SingularityError(f"collision between bodies {i + 1} and {j + 1}")
    gap = 1.0 - c.kappa * rho2 / 4.0
    if gap < ANTIPODAL_TOL:
        raise SingularityError(f"bodies {i + 1} and {j + 1} are antipodal")
    return 1.0 / (rho2 * np.sqrt(rho2) * gap * np.sqrt(gap))


def _interacting(m, i, j) -> bool:
    return m[i] > 0 or m[j] > 0


def accel_extrinsic(c, m, s: BodyState3D) -> np.ndarray:
    """Ambient accelerations, shape (3, 3), including the constraint forces."""
    c = as_curvature(c)
    m = as_masses(m)
    pos, vel = s.pos, s.vel
    k, sig, sq = c.kappa, c.sigma, c.sqrt_abs
    acc = np.zeros((3, 3))
    for i, j in PAIRS:
        if not _interacting(m, i, j):
            continue
        r2 = float(chord_sq_3d(c, pos[i], pos[j]))
        f = _pair_factor(c, r2, i, j)
        shrink = 1.0 - k * r2 / 2.0
        lift_z = sig * sq * r2 / 2.0
        for a, b in ((i, j), (j, i)):
            if m[b] == 0:
                continue
            d = pos[b] - shrink * pos[a]
            d[2] += lift_z
            acc[a] += m[b] * f * d
    vv = c.dot(vel, vel)
    acc[:, 0] -= k * vv * pos[:, 0]
    acc[:, 1] -= k * vv * pos[:, 1]
    acc[:, 2] -= vv * (k * pos[:, 2] + sig * sq)
    return acc


def reduced_chords_sq(c, pos2) -> dict:
    c = as_curvature(c)
    areas = planar_area(pos2)
    roots = np.sqrt(_chart_gap(c, areas))
    out = {}
    for i, j in PAIRS:
        flat = float(np.sum((pos2[i] - pos2[j]) ** 2))
        out[(i, j)] = flat + c.kappa * (areas[i] - areas[j]) ** 2 / (roots[i] + roots[j]) ** 2
    return out


def accel_reduced(c, m, s: PlanarState) -> np.ndarray:
    """Planar accelerations, shape (3, 2), of the height-eliminated system."""
    c = as_curvature(c)
    m = as_masses(m)
    k = c.kappa
    pos, vel = s.pos, s.vel
    rho2 = reduced_chords_sq(c, pos)
    acc = np.zeros((3, 2))
    for (i, j), r2 in rho2.items():
        if not _interacting(m, i, j):
            continue
        f = _pair_factor(c, r2, i, j)
        shrink = 1.0 - k * r2 / 2.0
        if m[j] > 0:
            acc[i] += m[j] * f * (pos[j] - shrink * pos[i])
        if m[i] > 0:
            acc[j] += m[i] * f * (pos[i] - shrink * pos[j])
    speed2 = np.sum(vel**2, axis=1) + k * s.b_terms(c)
    acc -= k * speed2[:, None] * pos
    return acc


def accel_newtonian(m, s: PlanarState) -> np.ndarray:
    m = as_masses(m)
    pos = s.pos
    acc = np.zeros((3, 2))
    for i, j in PAIRS:
        if not _interacting(m, i, j):
            continue
        d = pos[j] - pos[i]
        r2 = float(d @ d)
        if r2 < COLLISION_TOL**2:
            raise SingularityError(f"collision between bodies {i + 1} and {j + 1}")
        f = 1.0 / (r2 * np.sqrt(r2))
        acc[i] += m[j] * f * d
        acc[j] -= m[i] * f * d
    return acc


def accel_cylindrical(c, m, s: CylindricalState):
    """Returns ``(phi_ddot, omega_ddot)``, each of shape (3,)."""
    c = as_curvature(c)
    if c.kappa == 0:
        raise DomainError("cylindrical coordinates need kappa != 0")
    m = as_masses(m)
    k, sig, rad = c.kappa, c.sigma, c.radius
    big = s.big_omega(c)
    if np.any(big <= CHART_TOL * rad**2):
        raise ChartSingularityError("a body sits at a pole of the cylindrical chart")
    big_dot = s.big_omega_dot(c)
    sqrt_big = np.sqrt(big)
    phi_dd = np.zeros(3)
    om_dd = np.zeros(3)
    for i, j in PAIRS:
        if not _interacting(m, i, j):
            continue
        r2 = (big[i] + big[j] - 2.0 * sqrt_big[i] * sqrt_big[j] * np.cos(s.phi[i] - s.phi[j])
              + sig * (s.omega[i] - s.omega[j]) ** 2)
        f = _pair_factor(c, float(r2), i, j)
        for a, b in ((i, j), (j, i)):
            if m[b] == 0:
                continue
            phi_dd[a] += m[b] * f * sqrt_big[b] * np.sin(s.phi[b] - s.phi[a]) / sqrt_big[a]
            om_dd[a] += m[b] * f * (s.omega[b] - s.omega[a] + k * r2 / 2.0 * (s.omega[a] + rad))
    phi_dd -= s.phidot * big_dot / big
    speed2 = big_dot**2 / (4.0 * big) + s.phidot**2 * big + sig * s.omegadot**2
    om_dd -= (k * s.omega + sig * c.sqrt_abs) * speed2
    return phi_dd, om_dd


def _force_function_pair(c: Curvature, mi, mj, rho2):
    gap = 1.0 - c.kappa * rho2 / 4.0
    if rho2 < COLLISION_TOL**2 or gap < ANTIPODAL_TOL:
        raise SingularityError("collision-antipodal configuration")
    return mi * mj * (1.0 - c.kappa * rho2 / 2.0) / (np.sqrt(rho2) * np.sqrt(gap))


def force_function(c, m, s) -> float:
    """U_kappa for a planar or 3D state."""
    c = as_curvature(c)
    m = as_masses(m)
    rho2 = pair_chords_sq(c, s)
    return float(sum(_force_function_pair(c, m[i], m[j], rho2[(i, j)])
                     for i, j in PAIRS if m[i] > 0 and m[j] > 0))


def kinetic_energy(c, m, s) -> float:
    c = as_curvature(c)
    m = as_masses(m)
    if isinstance(s, BodyState3D):
        return float(0.5 * np.sum(m * c.dot(s.vel, s.vel)))
    speed2 = np.sum(s.vel**2, axis=1) + c.kappa * s.b_terms(c)
    return float(0.5 * np.sum(m * speed2))


def energy(c, m, s) -> float:
    """h = T_kappa - U_kappa."""
    return kinetic_energy(c, m, s) - force_function(c, m, s)


def pair_chords_sq(c, s) -> dict:
    """Squared chords rho_ij^2 keyed by (i, j) for either state type."""
    c = as_curvature(c)
    if isinstance(s, BodyState3D):
        return {(i, j): float(chord_sq_3d(c, s.pos[i], s.pos[j])) for i, j in PAIRS}
    return reduced_chords_sq(c, s.pos)


def pair_chords(c, s) -> np.ndarray:
    rho2 = pair_chords_sq(c, s)
    return np.sqrt(np.array([rho2[p] for p in PAIRS]))


def angular_momenta(c, m, s) -> tuple:
    """(c1, c2, c3); the planar case returns linear momenta in place of c1, c2.

    For kappa != 0 the first two are the rotation/boost charges about the
    quadric's centre, sum m[(z + R) xdot - x zdot] and the y analogue.  In
    reduced coordinates the height enters through the conjugate form and the
    signed root B_i^{1/2} = (x xdot + y ydot)/sqrt(1 - kappa A).
    """
    c = as_curvature(c)
    m = as_masses(m)
    if isinstance(s, BodyState3D):
        pos, vel = s.pos, s.vel
        c3 = float(np.sum(c.sigma * m * (pos[:, 1] * vel[:, 0] - pos[:, 0] * vel[:, 1])))
        if c.kappa == 0:
            return float(m @ vel[:, 0]), float(m @ vel[:, 1]), c3
        zc = pos[:, 2] + c.radius
        c1 = float(np.sum(m * (zc * vel[:, 0] - pos[:, 0] * vel[:, 2])))
        c2 = float(np.sum(m * (zc * vel[:, 1] - pos[:, 1] * vel[:, 2])))
        return c1, c2, c3
    pos, vel = s.pos, s.vel
    c3 = float(np.sum(c.sigma * m * (pos[:, 1] * vel[:, 0] - pos[:, 0] * vel[:, 1])))
    if c.kappa == 0:
        return float(m @ vel[:, 0]), float(m @ vel[:, 1]), c3
    areas = s.areas()
    roots = np.sqrt(_chart_gap(c, areas))
    b_half = np.einsum("ij,ij->i", pos, vel) / roots
    cf = c.sigma * c.sqrt_abs
    conj = areas / (1.0 + roots)
    c1 = cf * np.sum(m * (b_half * pos[:, 0] - conj * vel[:, 0])) + c.radius * np.sum(m * vel[:, 0])
    c2 = cf * np.sum(m * (b_half * pos[:, 1] - conj * vel[:, 1])) + c.radius * np.sum(m * vel[:, 1])
    return float(c1), float(c2), c3


def conserved_quantities(c, m, s) -> ConservedQuantities:
    c1, c2, c3 = angular_momenta(c, m, s)
    return ConservedQuantities(energy(c, m, s), c1, c2, c3)
