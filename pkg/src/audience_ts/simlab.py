"""Replicated simulation experiments and their summary statistics.

Replication ``i`` of a suite seeded with ``master_seed`` always gets the same
64-bit seed (and the same sampled environment), whatever the worker count or
execution order, so results merge deterministically.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .audience import Membership, Partition, build_partition, membership, overlap_geometry
from .engine import RunTrace, TestConfig, run_test
from .environment import Environment
from .errors import EmptyTraces, InfeasibleGeometry

log = logging.getLogger(__name__)

__all__ = [
    "Environment",
    "UniformSupports",
    "SweepMode",
    "Summary",
    "SweepPoint",
    "SweepResult",
    "REFERENCE_CTR",
    "FIXED_OVERLAP_CTR",
    "FIXED_TA_CTR",
    "default_supports",
    "sample_ctr_environment",
    "EnvSampler",
    "resolve_environment",
    "replication_seeds",
    "run_replications",
    "fixed_payoff_cells",
    "sweep_environment",
    "overlap_sweep",
    "summarize",
    "quantiles",
]

TA1_ONLY, BOTH, TA2_ONLY = membership(0), membership(0, 1), membership(1)

# creative CTRs per cell for the two-creative, two-TA setup
REFERENCE_CTR: dict[Membership, tuple[float, ...]] = {
    TA1_ONLY: (0.01, 0.03),
    BOTH: (0.03, 0.05),
    TA2_ONLY: (0.025, 0.035),
}
FIXED_OVERLAP_CTR = (0.015, 0.025)
FIXED_TA_CTR = ((0.035, 0.05), (0.015, 0.03))  # per TA, per creative

_ENV_KEY = (0, 0)  # spawn key for environment sampling, disjoint from batch keys (t,)


@dataclass(frozen=True)
class UniformSupports:
    """Independent uniform CTR support [low, high] per creative for every cell."""

    low: Mapping[Membership, Sequence[float]]
    high: Mapping[Membership, Sequence[float]]

    def __post_init__(self):
        for cell, lo in self.low.items():
            hi = self.high[cell]
            lo, hi = np.asarray(lo, float), np.asarray(hi, float)
            if lo.shape != hi.shape or (lo > hi).any() or (lo < 0).any() or (hi > 1).any():
                raise ValueError(f"bad support for cell {sorted(cell)}")


def default_supports(center: Mapping[Membership, Sequence[float]] = REFERENCE_CTR, rel: float = 0.4) -> UniformSupports:
    """Supports centred on ``center`` with relative half-width ``rel``."""
    low = {c: tuple(v * (1 - rel) for v in vals) for c, vals in center.items()}
    high = {c: tuple(v * (1 + rel) for v in vals) for c, vals in center.items()}
    return UniformSupports(low, high)


def sample_ctr_environment(
    supports: UniformSupports, partition: Partition, rng: np.random.Generator
) -> Environment:
    ctr = {}
    for da in partition.das:
        lo = np.asarray(supports.low[da.members], float)
        hi = np.asarray(supports.high[da.members], float)
        ctr[da.members] = rng.uniform(lo, hi)
    return Environment.from_cells(ctr, partition)


@dataclass(frozen=True)
class EnvSampler:
    """Picklable environment factory: one draw per replication seed."""

    supports: UniformSupports
    partition: Partition

    def __call__(self, rng: np.random.Generator) -> Environment:
        return sample_ctr_environment(self.supports, self.partition, rng)


def replication_seeds(master_seed: int, n_reps: int) -> list[int]:
    root = np.random.SeedSequence(master_seed)
    return [int(child.generate_state(1, np.uint64)[0]) for child in root.spawn(n_reps)]


def resolve_environment(env: Environment | Callable[[np.random.Generator], Environment], seed: int) -> Environment:
    """Return ``env`` itself, or the sampler's draw for the replication seeded with ``seed``."""
    if isinstance(env, Environment):
        return env
    return env(np.random.default_rng(np.random.SeedSequence(seed, spawn_key=_ENV_KEY)))


def _one(args) -> tuple[RunTrace, Environment]:
    config, env, seed = args
    env = resolve_environment(env, seed)
    return run_test(replace(config, seed=seed), env), env


def run_replications(
    config: TestConfig,
    env: Environment | Callable[[np.random.Generator], Environment],
    n_reps: int,
    master_seed: int | None = None,
    workers: int = 1,
    return_envs: bool = False,
):
    """Run ``n_reps`` independent replications of ``config``.

    ``env`` is either a fixed environment or a sampler called once per
    replication with its own stream. ``master_seed`` defaults to
    ``config.seed``. With ``n_reps == 1`` and the same seed derivation this is
    a single ``run_test`` call.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    seeds = replication_seeds(config.seed if master_seed is None else master_seed, n_reps)
    jobs = [(config, env, s) for s in seeds]
    if workers > 1 and n_reps > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, jobs, chunksize=max(1, n_reps // (4 * workers))))
    else:
        results = [_one(j) for j in jobs]
    traces = [tr for tr, _ in results]
    if return_envs:
        return traces, [e for _, e in results]
    return traces


# summaries


def quantiles(values: Sequence[float]) -> dict[str, float]:
    """min / q1 / median / q3 / max by nearest rank, plus the mean."""
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    if n == 0:
        raise EmptyTraces("no values to summarize")

    def rank(p: float) -> float:
        return float(v[min(max(math.ceil(p * n - 1e-9), 1), n) - 1])

    return {
        "min": float(v[0]),
        "q1": rank(0.25),
        "median": rank(0.5),
        "q3": rank(0.75),
        "max": float(v[-1]),
        "mean": float(v.mean()),
    }


@dataclass(frozen=True)
class Summary:
    n_reps: int
    sample_size: dict[str, float]
    total_regret: dict[str, float]
    post_best_prob: dict[str, float]
    correct_fraction: float
    maxed_out: int

    def to_dict(self) -> dict:
        return {
            "n_reps": self.n_reps,
            "sample_size": self.sample_size,
            "total_regret": self.total_regret,
            "post_best_prob": self.post_best_prob,
            "correct_fraction": self.correct_fraction,
            "maxed_out": self.maxed_out,
        }


def summarize(traces: Sequence[RunTrace]) -> Summary:
    if not traces:
        raise EmptyTraces("cannot summarize an empty set of traces")
    return Summary(
        n_reps=len(traces),
        sample_size=quantiles([t.sample_size for t in traces]),
        total_regret=quantiles([t.total_regret for t in traces]),
        post_best_prob=quantiles([t.final_report.post_best_prob for t in traces]),
        correct_fraction=float(np.mean([t.correct_identification for t in traces])),
        maxed_out=sum(t.maxed_out for t in traces),
    )


# overlap sweeps


class SweepMode(str, Enum):
    VARYING = "VaryingPayoff"
    FIXED = "FixedPayoff"


def fixed_payoff_cells(q: float) -> dict[Membership, tuple[float, ...]]:
    """Cell CTRs that keep the overlap cell and all four creative x TA CTRs fixed.

    Inverts the law-of-total-probability aggregation for the exclusive cells:
    ``theta_excl = (lambda_TA - q * theta_overlap) / (1 - q)``.
    """
    overlap_geometry(q)  # validates q
    shared = np.asarray(FIXED_OVERLAP_CTR)
    cells: dict[Membership, tuple[float, ...]] = {BOTH: tuple(shared)}
    for cell, lam in ((TA1_ONLY, FIXED_TA_CTR[0]), (TA2_ONLY, FIXED_TA_CTR[1])):
        theta = (np.asarray(lam) - q * shared) / (1 - q)
        if ((theta <= 0) | (theta >= 1)).any():
            raise InfeasibleGeometry(q, f"cell {sorted(k + 1 for k in cell)} -> {theta.tolist()}")
        cells[cell] = tuple(float(x) for x in theta)
    return cells


def sweep_environment(q: float, mode: SweepMode | str) -> Environment:
    mode = SweepMode(mode)
    part = build_partition(2, overlap_geometry(q))
    cells = REFERENCE_CTR if mode is SweepMode.VARYING else fixed_payoff_cells(q)
    return Environment.from_cells(cells, part)


@dataclass
class SweepPoint:
    q: float
    traces: list[RunTrace] = field(default_factory=list)
    summary: Summary | None = None
    top2_gap: float | None = None
    error: str | None = None


@dataclass
class SweepResult:
    mode: SweepMode
    points: list[SweepPoint]

    def medians(self, metric: str = "sample_size") -> list[float]:
        return [getattr(p.summary, metric)["median"] for p in self.points if p.summary]


def overlap_sweep(
    grid: Sequence[float],
    mode: SweepMode | str,
    base: TestConfig,
    n_reps: int,
    master_seed: int | None = None,
    workers: int = 1,
) -> SweepResult:
    """Run ``n_reps`` TS replications per overlap value.

    Infeasible grid points are recorded with their error and skipped.
    """
    mode = SweepMode(mode)
    if not grid:
        raise ValueError("overlap grid is empty")
    for q in grid:
        if not 0 <= q < 1:
            raise ValueError(f"overlap {q} outside [0, 1)")
    master = base.seed if master_seed is None else master_seed
    points = []
    for g, q in enumerate(grid):
        point = SweepPoint(float(q))
        try:
            env = sweep_environment(q, mode)
        except InfeasibleGeometry as exc:
            log.warning("skipping q=%g: %s", q, exc)
            point.error = str(exc)
            points.append(point)
            continue
        cfg = replace(base, K=2, population=None)
        econ = cfg.economics(env.partition)
        # each grid point gets its own replication seeds
        seed = int(np.random.SeedSequence(master, spawn_key=(g,)).generate_state(1, np.uint64)[0])
        point.traces = run_replications(cfg, env, n_reps, seed, workers)
        point.summary = summarize(point.traces)
        point.top2_gap = env.top2_gap(econ.gamma, econ.cost_ta)
        points.append(point)
    return SweepResult(mode, points)
