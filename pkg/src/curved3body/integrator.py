"""Adaptive integration of the reduced or extrinsic equations of motion.

Stepping uses scipy's embedded Dormand-Prince 8(5,3) pair one accepted step at
a time, so that extrinsic runs can be pulled back onto the manifold after each
step.  Conserved quantities and constraint residuals are logged per sample.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import DOP853

from .dynamics import (
    BodyState3D,
    PlanarState,
    accel_extrinsic,
    accel_reduced,
    as_masses,
    conserved_quantities,
    pair_chords,
)
from .errors import DomainError, DriftExceeded, StepSizeUnderflow
from .geometry import as_curvature, max_constraint_residual, project_to_manifold


class Projection(str, enum.Enum):
    OFF = "off"
    POSITION = "position"
    POSITION_VELOCITY = "position+velocity"


@dataclass
class IntegratorOptions:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-12
    max_step: float = math.inf
    projection: Projection = Projection.POSITION_VELOCITY
    drift_tolerance: float = 1e-9
    # optional uniform output grid; None logs every accepted step
    n_samples: int | None = None

    def __post_init__(self):
        self.projection = Projection(self.projection)
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.max_step > 0):
            raise DomainError("integrator tolerances and max_step must be positive")
        if self.drift_tolerance <= 0:
            raise DomainError("drift_tolerance must be positive")
        if self.n_samples is not None and self.n_samples < 2:
            raise DomainError("n_samples must be at least 2")


@dataclass
class Trajectory:
    kappa: float
    masses: np.ndarray
    times: np.ndarray
    states: list
    h: np.ndarray = field(default_factory=lambda: np.zeros(0))
    c1: np.ndarray = field(default_factory=lambda: np.zeros(0))
    c2: np.ndarray = field(default_factory=lambda: np.zeros(0))
    c3: np.ndarray = field(default_factory=lambda: np.zeros(0))
    max_residual: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_steps: int = 0

    @property
    def extrinsic(self) -> bool:
        return isinstance(self.states[0], BodyState3D)

    def chords(self) -> np.ndarray:
        """rho_12, rho_13, rho_23 per sample, shape (n, 3)."""
        return np.array([pair_chords(self.kappa, s) for s in self.states])


def _residual(c, s) -> float:
    if isinstance(s, BodyState3D):
        return max_constraint_residual(c, s.pos, s.vel)
    return 0.0


def _project(c, s: BodyState3D, mode: Projection) -> BodyState3D:
    pos, vel = project_to_manifold(c, s.pos, s.vel)
    if mode is Projection.POSITION:
        return BodyState3D(pos, s.vel)
    return BodyState3D(pos, vel)


def _make_rhs(c, m, extrinsic: bool):
    if extrinsic:
        def rhs(t, y):
            s = BodyState3D.from_vector(y)
            return np.concatenate([s.vel.ravel(), accel_extrinsic(c, m, s).ravel()])
    else:
        def rhs(t, y):
            s = PlanarState.from_vector(y)
            return np.concatenate([s.vel.ravel(), accel_reduced(c, m, s).ravel()])
    return rhs


def integrate(c, m, s0, t_span, opts: IntegratorOptions | None = None) -> Trajectory:
    """Integrate ``s0`` (PlanarState or BodyState3D) over ``t_span``.

    The state type picks the formulation.  Raises SingularityError/DomainError
    when a guard trips, DriftExceeded when the constraint residual exceeds
    ``opts.drift_tolerance``, StepSizeUnderflow when the step collapses.
    """
    c = as_curvature(c)
    m = as_masses(m)
    opts = opts or IntegratorOptions()
    extrinsic = isinstance(s0, BodyState3D)
    cls = BodyState3D if extrinsic else PlanarState
    t0, t1 = map(float, t_span)

    # validate s0 through the guards before the first step
    rhs = _make_rhs(c, m, extrinsic)
    rhs(t0, s0.to_vector())

    times = [t0]
    states = [s0]
    n_steps = 0
    if t1 != t0:
        solver = DOP853(rhs, t0, s0.to_vector(), t1, max_step=opts.max_step,
                        rtol=opts.rel_tol, atol=opts.abs_tol)
        project = extrinsic and opts.projection is not Projection.OFF and c.kappa != 0
        while solver.status == "running":
            message = solver.step()
            if solver.status == "failed":
                raise StepSizeUnderflow(f"integration failed at t={solver.t:.17g}: {message}")
            n_steps += 1
            state = cls.from_vector(solver.y)
            if project:
                state = _project(c, state, opts.projection)
                solver.y = state.to_vector()
                solver.f = rhs(solver.t, solver.y)
            res = _residual(c, state)
            if res > opts.drift_tolerance:
                raise DriftExceeded(
                    f"constraint residual {res:.3e} exceeds {opts.drift_tolerance:.3e} "
                    f"at t={solver.t:.17g}"
                )
            times.append(solver.t)
            states.append(state)

    if opts.n_samples is not None and t1 != t0:
        times, states = _resample(np.array(times), states, np.linspace(t0, t1, opts.n_samples), cls)

    traj = Trajectory(c.kappa, m, np.array(times), states, n_steps=n_steps)
    _log(traj, c, m)
    return traj


def _resample(times, states, grid, cls):
    ys = np.array([s.to_vector() for s in states])
    if times[-1] < times[0]:
        times, ys = times[::-1], ys[::-1]
    cols = [np.interp(grid, times, ys[:, k]) for k in range(ys.shape[1])]
    sampled = np.column_stack(cols)
    return list(grid), [cls.from_vector(row) for row in sampled]


def _log(traj: Trajectory, c, m):
    q = [conserved_quantities(c, m, s) for s in traj.states]
    traj.h = np.array([x.h for x in q])
    traj.c1 = np.array([x.c1 for x in q])
    traj.c2 = np.array([x.c2 for x in q])
    traj.c3 = np.array([x.c3 for x in q])
    traj.max_residual = np.array([_residual(c, s) for s in traj.states])


def drift_report(t: Trajectory):
    """(max |h - h0|, max |c3 - c3_0|, max constraint residual)."""
    if len(t.times) == 0:
        raise DomainError("empty trajectory")
    return (
        float(np.max(np.abs(t.h - t.h[0]))),
        float(np.max(np.abs(t.c3 - t.c3[0]))),
        float(np.max(t.max_residual)),
    )


def chord_drift(t: Trajectory) -> float:
    """max over samples and pairs of |rho_ij(t) - rho_ij(0)|."""
    rho = t.chords()
    return float(np.max(np.abs(rho - rho[0])))


def csv_header(extrinsic: bool = False) -> list:
    cols = ["t"]
    cols += [f"{ax}{i}" for i in (1, 2, 3) for ax in ("x", "y")]
    cols += [f"{ax}dot{i}" for i in (1, 2, 3) for ax in ("x", "y")]
    cols += ["h", "c1", "c2", "c3", "maxres"]
    if extrinsic:
        cols += [f"z{i}" for i in (1, 2, 3)] + [f"zdot{i}" for i in (1, 2, 3)]
    return cols


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(t: Trajectory, path, config_hash: str | None = None):
    """Write the trajectory; extrinsic runs append z/zdot columns after ``maxres``."""
    extrinsic = t.extrinsic
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if config_hash:
            fh.write(f"# config_sha256={config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(extrinsic))
        for k, s in enumerate(t.states):
            row = [t.times[k]]
            row += list(s.pos[:, :2].ravel()) + list(s.vel[:, :2].ravel())
            row += [t.h[k], t.c1[k], t.c2[k], t.c3[k], t.max_residual[k]]
            if extrinsic:
                row += list(s.pos[:, 2]) + list(s.vel[:, 2])
            w.writerow([_fmt(v) for v in row])
