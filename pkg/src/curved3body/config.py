"""Schemas for CLI run configurations.

Every command reads one JSON document, applies flag overrides, and validates
the result here before doing any computation.  Unknown keys are errors.
"""

from __future__ import annotations

import json
import math
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .integrator import IntegratorOptions

FAMILY_ALIASES = {
    "isosceles": "isosceles_band",
    "lagrange": "lagrange_equal_mass",
    "equatorial": "equatorial_scalene",
    "classical": "classical_lagrange",
    "restricted": "restricted_equal_mass",
}

FamilyName = Literal[
    "equatorial_scalene", "isosceles_band", "lagrange_equal_mass", "planetary",
    "restricted_equal_mass", "general_restricted", "classical_lagrange",
]
ScanCase = Literal[
    "equator_hemisphere", "hyperbolic_isosceles", "hyperbolic_restricted_equal",
    "general_restricted", "scalene_parallel",
]


def normalize_name(name: str) -> str:
    key = str(name).strip().lower().replace("-", "_")
    return FAMILY_ALIASES.get(key, key)


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class Axis(Strict):
    """Uniform grid ``linspace(start, stop, num)``; ``open_start`` drops the first point."""

    start: float
    stop: float
    num: int = Field(ge=1)
    open_start: bool = False

    def values(self) -> list:
        v = np.linspace(self.start, self.stop, self.num + (1 if self.open_start else 0))
        return [float(x) for x in (v[1:] if self.open_start else v)]


GridSpec = Union[list[float], Axis]


def expand(g) -> list:
    return g.values() if isinstance(g, Axis) else [float(x) for x in g]


class IntegratorModel(Strict):
    rel_tol: float = Field(1e-12, gt=0)
    abs_tol: float = Field(1e-12, gt=0)
    max_step: Optional[float] = Field(None, gt=0)
    projection: Literal["off", "position", "position+velocity"] = "position+velocity"
    drift_tolerance: float = Field(1e-9, gt=0)
    n_samples: Optional[int] = Field(None, ge=2)

    def options(self) -> IntegratorOptions:
        return IntegratorOptions(
            rel_tol=self.rel_tol, abs_tol=self.abs_tol,
            max_step=math.inf if self.max_step is None else self.max_step,
            projection=self.projection, drift_tolerance=self.drift_tolerance,
            n_samples=self.n_samples,
        )


class StateModel(Strict):
    formulation: Literal["reduced", "extrinsic"] = "reduced"
    pos: list[list[float]]
    vel: list[list[float]]

    @model_validator(mode="after")
    def _shape(self):
        width = 2 if self.formulation == "reduced" else 3
        for name in ("pos", "vel"):
            rows = getattr(self, name)
            if len(rows) != 3 or any(len(r) != width for r in rows):
                raise ValueError(f"{name} must be 3 rows of {width} coordinates")
        return self


class FamilyModel(Strict):
    family: FamilyName
    kappa: float = 0.0
    m: float = Field(1.0, gt=0)
    M: Optional[float] = Field(None, gt=0)
    r: Optional[float] = Field(None, gt=0)
    lam: Optional[float] = None
    v: Optional[float] = None
    gamma: Optional[float] = None
    branch: Literal["inner", "outer"] = "inner"
    hemisphere: Literal["north", "south"] = "north"
    angles: Optional[list[float]] = None
    alpha: float = 1.0
    direction: Literal[1, -1] = 1
    masses: Optional[list[float]] = None
    side: float = Field(1.0, gt=0)

    @field_validator("family", mode="before")
    @classmethod
    def _alias(cls, v):
        return normalize_name(v)

    @field_validator("angles", "masses")
    @classmethod
    def _three(cls, v):
        if v is not None and len(v) != 3:
            raise ValueError("expected three values")
        return v


class BuildConfig(FamilyModel):
    tol: float = Field(1e-10, gt=0)


class SimulateConfig(Strict):
    kappa: float = 0.0
    masses: Optional[list[float]] = None
    state: Optional[StateModel] = None
    lower: Optional[list[bool]] = None
    candidate: Optional[FamilyModel] = None
    candidate_file: Optional[str] = None
    t_end: Optional[float] = None
    periods: Optional[float] = Field(None, gt=0)
    integrator: IntegratorModel = IntegratorModel()

    @model_validator(mode="after")
    def _one_source(self):
        given = [x is not None for x in (self.state, self.candidate, self.candidate_file)]
        if sum(given) != 1:
            raise ValueError("give exactly one of state, candidate, candidate_file")
        if self.state is not None:
            if self.masses is None or len(self.masses) != 3 or min(self.masses) < 0:
                raise ValueError("state runs need three nonnegative masses")
            if self.t_end is None:
                raise ValueError("state runs need t_end")
        elif self.t_end is None and self.periods is None:
            raise ValueError("candidate runs need t_end or periods")
        return self


class VerifyConfig(Strict):
    candidate_file: Optional[str] = None
    candidate: Optional[dict] = None
    periods: float = Field(0.0, ge=0)
    tol: float = Field(1e-10, gt=0)
    rho_tol: float = Field(1e-6, gt=0)
    integrator: IntegratorModel = IntegratorModel()

    @model_validator(mode="after")
    def _one_source(self):
        if (self.candidate_file is None) == (self.candidate is None):
            raise ValueError("give exactly one of candidate, candidate_file")
        return self


class SweepConfig(Strict):
    family: FamilyName
    kappa_grid: GridSpec
    mass_ratio_grid: GridSpec = [1.0]
    outputs: list[Literal["existence", "alpha", "latitude", "shape_s", "residual"]] = [
        "existence", "alpha", "latitude", "shape_s", "residual"]
    params: dict = {}
    tol: float = Field(1e-10, gt=0)

    @field_validator("family", mode="before")
    @classmethod
    def _alias(cls, v):
        return normalize_name(v)


class ScanConfig(Strict):
    case: ScanCase
    kappa: float
    masses: list[float] = [1.0, 1.0, 1.0]
    grid: Optional[dict[str, GridSpec]] = None
    margin: Optional[float] = Field(None, ge=0)
    # optional pass/fail bound on the minimum residual
    min_bound: Optional[float] = None

    @field_validator("case", mode="before")
    @classmethod
    def _norm(cls, v):
        return str(v).strip().lower().replace("-", "_")


class FProfileConfig(Strict):
    s_grid: Optional[GridSpec] = None
    n: int = Field(1000, ge=4)


COMMAND_MODELS = {
    "simulate": SimulateConfig,
    "build-re": BuildConfig,
    "verify-re": VerifyConfig,
    "sweep": SweepConfig,
    "scan": ScanConfig,
    "f-profile": FProfileConfig,
}


def load_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    return data


def set_path(d: dict, dotted: str, value):
    """Set ``d["a"]["b"] = value`` for ``dotted = "a.b"``, creating dicts on the way."""
    keys = dotted.split(".")
    for k in keys[:-1]:
        nxt = d.get(k)
        if not isinstance(nxt, dict):
            nxt = {}
            d[k] = nxt
        d = nxt
    d[keys[-1]] = value
