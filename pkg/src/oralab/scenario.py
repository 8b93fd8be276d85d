"""Scenario configuration: a versioned JSON document validated by pydantic.

Unknown keys are rejected everywhere so that a manifest pins a run exactly.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import AdmissibilityError, ConfigError
from .grid import DensityGrid, Grid
from .kernel import InjectionSchedule
from .measures import AtomList
from .rab import RabData
from .raq import RaqData
from .schedules import CumulativeSchedule, QuantileSchedule

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSpec(_Strict):
    x_min: float = -6.0
    x_max: float = 7.0
    n_cells: int = Field(4096, ge=8)

    def build(self) -> Grid:
        return Grid(self.x_min, self.x_max, self.n_cells)


class Uniform(_Strict):
    kind: Literal["uniform"]
    a: float = 0.0
    b: float = 1.0

    def build(self, g: Grid) -> DensityGrid:
        if not self.b > self.a:
            raise ConfigError("uniform needs b > a")
        return g.indicator(self.a, self.b, 1.0 / (self.b - self.a))


class Gaussian(_Strict):
    kind: Literal["gaussian"]
    mean: float = 0.0
    std: float = Field(1.0, gt=0)

    def build(self, g: Grid) -> DensityGrid:
        u = g.from_function(lambda x: np.exp(-0.5 * ((x - self.mean) / self.std) ** 2))
        return u.scaled(1.0 / u.total_mass)


class PiecewiseConstant(_Strict):
    kind: Literal["piecewise_constant"]
    edges: list[float]
    values: list[float]

    def build(self, g: Grid) -> DensityGrid:
        if len(self.edges) != len(self.values) + 1 or any(np.diff(self.edges) <= 0):
            raise ConfigError("piecewise_constant needs increasing edges and one value per interval")
        out = g.zeros()
        for a, b, v in zip(self.edges[:-1], self.edges[1:], self.values):
            if v < 0:
                raise ConfigError("density values must be nonnegative")
            out = out + g.indicator(a, b, v)
        mass = out.total_mass
        if mass <= 0:
            raise ConfigError("piecewise_constant density has no mass on the grid")
        return out.scaled(1.0 / mass)


DensitySpec = Annotated[Union[Uniform, Gaussian, PiecewiseConstant], Field(discriminator="kind")]


class InjectionSpec(_Strict):
    atoms: list[tuple[float, float]] = []
    density: Optional[DensitySpec] = None
    density_weight: float = Field(0.0, ge=0.0, le=1.0)


class ScheduleSpec(_Strict):
    kind: Literal["zero", "linear", "piecewise_linear", "power", "capped"]
    rate: Optional[float] = None
    times: Optional[list[float]] = None
    values: Optional[list[float]] = None
    scale: Optional[float] = None
    exponent: Optional[float] = None
    cap: Optional[float] = None

    def build(self) -> CumulativeSchedule:
        cfg = {k: v for k, v in self.model_dump().items() if v is not None}
        try:
            return CumulativeSchedule.from_config(cfg)
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad schedule {cfg}: {exc}") from exc


class QuantileSpec(_Strict):
    kind: Literal["Q_constant", "Q_piecewise_linear", "q_piecewise_linear"]
    value: Optional[float] = None
    times: Optional[list[float]] = None
    values: Optional[list[float]] = None

    def build(self) -> QuantileSchedule:
        cfg = {k: v for k, v in self.model_dump().items() if v is not None}
        try:
            return QuantileSchedule.from_config(cfg)
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad quantile schedule {cfg}: {exc}") from exc


class SolverSpec(_Strict):
    Delta: list[float] = [0.05]
    delta: list[float] = [1e-3]
    stride: int = Field(100, ge=1)


class SimulationSpec(_Strict):
    N: list[int] = []
    replicas: int = Field(1, ge=1)
    seed: int = 0


class RGridSpec(_Strict):
    start: float
    stop: float
    num: int = Field(64, ge=2)


class OutputSpec(_Strict):
    snapshot_times: list[float] = [0.5]
    r_grid: Optional[RGridSpec] = None
    density_csv: bool = True
    traces_csv: bool = False


class Scenario(_Strict):
    schema_version: Literal[1] = 1
    name: str = "scenario"
    model: Literal["rab", "raq"]
    grid: GridSpec = GridSpec()
    u0: DensitySpec = Uniform(kind="uniform")
    injection: InjectionSpec = InjectionSpec()
    I: ScheduleSpec = ScheduleSpec(kind="zero")
    J: ScheduleSpec = ScheduleSpec(kind="zero")
    quantile: Optional[QuantileSpec] = None
    horizon: float = Field(1.0, gt=0)
    solver: SolverSpec = SolverSpec()
    simulation: SimulationSpec = SimulationSpec()
    outputs: OutputSpec = OutputSpec()

    @model_validator(mode="after")
    def _model_fields(self):
        if self.model == "raq" and self.quantile is None:
            raise ValueError("raq scenarios need a quantile schedule")
        if any(t < 0 or t > self.horizon for t in self.outputs.snapshot_times):
            raise ValueError("snapshot times must lie in [0, horizon]")
        return self

    # builders ---------------------------------------------------------
    def build_grid(self) -> Grid:
        return self.grid.build()

    def build_injection(self, g: Grid) -> InjectionSchedule:
        I = self.I.build()
        inj = self.injection
        if not inj.atoms and inj.density is None:
            if not I.is_zero:
                raise ConfigError("a nonzero I needs an injection law")
            return InjectionSchedule(I)
        atoms = None
        dens = None
        w_dens = inj.density_weight if inj.atoms else 1.0
        if inj.atoms:
            atoms = AtomList.from_pairs(inj.atoms)
            total = atoms.total_mass
            if total <= 0:
                raise ConfigError("atom weights must sum to a positive number")
            atoms = AtomList(atoms.locations, atoms.weights * (1.0 - w_dens) / total)
        if inj.density is not None and w_dens > 0:
            dens = inj.density.build(g).scaled(w_dens)
        try:
            return InjectionSchedule(I, atoms=atoms, density=dens)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_data(self):
        """RabData or RaqData; admissibility is checked here, before any run."""
        g = self.build_grid()
        u0 = self.u0.build(g)
        try:
            if self.model == "rab":
                return RabData(u0, self.build_injection(g), self.J.build(), self.horizon)
            return RaqData(u0, self.quantile.build(), self.horizon)
        except AdmissibilityError as exc:
            raise ConfigError(f"inadmissible data: {exc}") from exc

    def r_grid(self) -> np.ndarray:
        if self.outputs.r_grid is not None:
            s = self.outputs.r_grid
            return np.linspace(s.start, s.stop, s.num)
        return np.linspace(-2.0, 3.0, 64)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def load_scenario(source) -> Scenario:
    """Parse a path, JSON string or dict into a Scenario (ConfigError on any problem)."""
    try:
        if isinstance(source, Scenario):
            return source
        if isinstance(source, dict):
            return Scenario.model_validate(source)
        p = Path(source)
        text = p.read_text() if p.exists() else str(source)
        return Scenario.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read scenario: {exc}") from exc


def _rab_base(**kw) -> dict:
    d = {"model": "rab", "u0": {"kind": "uniform", "a": 0.0, "b": 1.0},
         "injection": {"atoms": [(0.0, 1.0)]},
         "I": {"kind": "linear", "rate": 1.0}, "J": {"kind": "linear", "rate": 1.0},
         "horizon": 1.0}
    d.update(kw)
    return d


PRESETS: dict[str, dict] = {
    "rab-default": _rab_base(name="rab-default",
                             solver={"Delta": [0.05], "delta": [1e-3], "stride": 100},
                             outputs={"snapshot_times": [0.25, 0.5, 1.0]}),
    "raq-default": {"name": "raq-default", "model": "raq", "u0": {"kind": "uniform", "a": 0.0, "b": 1.0},
                    "quantile": {"kind": "Q_constant", "value": 0.5}, "horizon": 0.6,
                    "solver": {"Delta": [0.05], "delta": [1e-3], "stride": 100},
                    "outputs": {"snapshot_times": [0.3, 0.5, 0.6]}},
    "rab-delta-sweep": _rab_base(name="rab-delta-sweep", horizon=0.5,
                                 solver={"Delta": [0.05], "delta": [1e-2, 1e-3, 1e-4], "stride": 50},
                                 outputs={"snapshot_times": [0.5]}),
    "rab-hydro": _rab_base(name="rab-hydro", horizon=0.5,
                           solver={"Delta": [0.05], "delta": [1e-3], "stride": 100},
                           simulation={"N": [1000, 4000, 16000], "replicas": 20, "seed": 2024},
                           outputs={"snapshot_times": [0.5], "r_grid": {"start": -1.0, "stop": 2.5, "num": 64}}),
    "raq-zero-quantile": {"name": "raq-zero-quantile", "model": "raq",
                          "u0": {"kind": "uniform", "a": 0.0, "b": 1.0},
                          "quantile": {"kind": "Q_constant", "value": 0.0}, "horizon": 0.8,
                          "solver": {"Delta": [0.05], "delta": [1e-3], "stride": 100},
                          "outputs": {"snapshot_times": [0.2, 0.4, 0.8]}},
}


def preset(name: str) -> Scenario:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return load_scenario(PRESETS[name])
