"""Declarative experiment configuration (YAML) and its translation to run objects.

TA numbers in the file are 1-based, as are creative numbers in every output.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .audience import Partition, PopulationModel, build_partition, overlap_geometry
from .engine import TestConfig
from .environment import Environment
from .policy import EconomicParams, Policy
from .simlab import REFERENCE_CTR, EnvSampler, UniformSupports, default_supports

EXPERIMENTS = ("single-run", "validate", "compare", "sweep-varying", "sweep-fixed")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CellMass(_Strict):
    members: list[int] = Field(min_length=1)
    mass: float = Field(ge=0)


class PopulationSection(_Strict):
    overlap: float | None = Field(default=None, ge=0, lt=1)
    cells: list[CellMass] | None = None

    @model_validator(mode="after")
    def _one_of(self):
        if (self.overlap is None) == (self.cells is None):
            raise ValueError("population needs exactly one of 'overlap' or 'cells'")
        return self


class EconomicsSection(_Strict):
    gamma: float = Field(default=1.0, gt=0)
    cost: list[list[float]] | None = None  # R x J per-impression cost, DA order


class CellCTR(_Strict):
    members: list[int] = Field(min_length=1)
    ctr: list[float]


class CellSupport(_Strict):
    members: list[int] = Field(min_length=1)
    low: list[float]
    high: list[float]


class EnvironmentSection(_Strict):
    preset: Literal["reference", "reference-uniform"] | None = None
    relative_width: float = Field(default=0.4, gt=0, lt=1)
    ctr: list[CellCTR] | None = None
    uniform: list[CellSupport] | None = None

    @model_validator(mode="after")
    def _one_of(self):
        given = [x is not None for x in (self.preset, self.ctr, self.uniform)]
        if sum(given) != 1:
            raise ValueError("environment needs exactly one of 'preset', 'ctr' or 'uniform'")
        return self


class TestSection(_Strict):
    creatives: int = Field(default=2, ge=1)
    audiences: int = Field(default=2, ge=1)
    batch_size: int = Field(default=100, ge=1)
    draws: int = Field(default=1000, ge=1)
    stop_threshold: float = Field(default=0.01, gt=0)
    stop_percentile: float = Field(default=0.95, gt=0, lt=1)
    max_batches: int = Field(default=1000, ge=1)
    stopping: bool = True
    policy: Policy = Policy.TS

    __test__ = False


class SweepSection(_Strict):
    grid: list[float] = Field(default_factory=lambda: [0.0, 0.3, 0.6, 0.9])

    @field_validator("grid")
    @classmethod
    def _grid(cls, grid):
        if not grid:
            raise ValueError("sweep grid must not be empty")
        for q in grid:
            if not 0 <= q < 1:
                raise ValueError(f"overlap {q} outside [0, 1)")
        return grid


class ConfigFile(_Strict):
    experiment: Literal["single-run", "validate", "compare", "sweep-varying", "sweep-fixed"] | None = None
    seed: int = Field(default=0, ge=0, lt=2**64)
    reps: int = Field(default=200, ge=1)
    workers: int = Field(default=1, ge=1)
    out: str | None = None
    test: TestSection = Field(default_factory=TestSection)
    population: PopulationSection = Field(default_factory=lambda: PopulationSection(overlap=0.5))
    economics: EconomicsSection = Field(default_factory=EconomicsSection)
    environment: EnvironmentSection = Field(default_factory=lambda: EnvironmentSection(preset="reference"))
    sweep: SweepSection = Field(default_factory=SweepSection)

    # translation helpers

    def population_model(self) -> PopulationModel:
        pop = self.population
        if pop.overlap is not None:
            if self.test.audiences != 2:
                raise ValueError("'overlap' geometry needs exactly 2 audiences")
            return overlap_geometry(pop.overlap)
        cells = {}
        for c in pop.cells:
            cell = frozenset(k - 1 for k in c.members)
            if min(cell) < 0 or max(cell) >= self.test.audiences:
                raise ValueError(f"cell members {c.members} outside 1..{self.test.audiences}")
            cells[cell] = cells.get(cell, 0.0) + c.mass
        return PopulationModel(cells)

    def partition(self) -> Partition:
        return build_partition(self.test.audiences, self.population_model())

    def economic_params(self, partition: Partition) -> EconomicParams | None:
        eco = self.economics
        if eco.cost is None and eco.gamma == 1.0:
            return None
        R, J = self.test.creatives, partition.n_das
        cost = np.zeros((R, J)) if eco.cost is None else np.asarray(eco.cost, dtype=float)
        if cost.shape != (R, J):
            raise ValueError(f"economics.cost must be {R} x {J} (creatives x DAs), got {cost.shape}")
        return EconomicParams.from_da_costs(eco.gamma, cost, partition)

    def test_config(self, partition: Partition | None = None) -> TestConfig:
        partition = partition or self.partition()
        t = self.test
        return TestConfig(
            R=t.creatives,
            K=t.audiences,
            population=self.population_model(),
            econ=self.economic_params(partition),
            batch_size=t.batch_size,
            H=t.draws,
            stop_threshold=t.stop_threshold,
            stop_percentile=t.stop_percentile,
            max_batches=t.max_batches,
            policy=t.policy,
            seed=self.seed,
            stopping=t.stopping,
        )

    def _cell(self, members: list[int]) -> frozenset[int]:
        return frozenset(k - 1 for k in members)

    def environment_for(self, partition: Partition) -> Environment | EnvSampler:
        env = self.environment
        R = self.test.creatives
        if env.preset is not None:
            if R != 2 or self.test.audiences != 2:
                raise ValueError("preset environments need 2 creatives and 2 audiences")
            if env.preset == "reference":
                return Environment.from_cells(REFERENCE_CTR, partition)
            return EnvSampler(default_supports(REFERENCE_CTR, env.relative_width), partition)
        if env.ctr is not None:
            cells = {}
            for c in env.ctr:
                if len(c.ctr) != R:
                    raise ValueError(f"cell {c.members} needs {R} CTRs")
                cells[self._cell(c.members)] = c.ctr
            return Environment.from_cells(cells, partition)
        low, high = {}, {}
        for c in env.uniform:
            if len(c.low) != R or len(c.high) != R:
                raise ValueError(f"cell {c.members} needs {R} low and high bounds")
            low[self._cell(c.members)] = c.low
            high[self._cell(c.members)] = c.high
        for da in partition.das:
            if da.members not in low:
                raise ValueError(f"no CTR support given for DA {da.label()}")
        return EnvSampler(UniformSupports(low, high), partition)


def load_config(path: str | Path) -> ConfigFile:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValueError("config file must contain a mapping at top level")
    return ConfigFile.model_validate(raw)
