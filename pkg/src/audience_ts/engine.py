"""The batched test loop: allocate, observe, update, aggregate, check stopping."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .aggregate import StopReport, aggregate_draws, stop_report
from .audience import Partition, PopulationModel, build_partition
from .environment import Environment
from .errors import ConfigMismatch
from .policy import (
    EconomicParams,
    Policy,
    allocation_from_draws,
    ea_allocate,
    st_allocate,
    ts_allocate,
)
from .posterior import BatchOutcome, init_posterior, sample_theta_draws, update_posterior

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TestConfig:
    R: int
    K: int
    population: PopulationModel | None = None
    econ: EconomicParams | None = None
    batch_size: int = 100
    H: int = 1000
    stop_threshold: float = 0.01
    stop_percentile: float = 0.95
    max_batches: int = 1000
    policy: Policy = Policy.TS
    seed: int = 0
    stopping: bool = True

    __test__ = False  # not a pytest class

    def __post_init__(self):
        object.__setattr__(self, "policy", Policy(self.policy))
        if self.R < 1 or self.K < 1:
            raise ValueError("R and K must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.H < 1:
            raise ValueError("H must be >= 1")
        if self.max_batches < 1:
            raise ValueError("max_batches must be >= 1")
        if not 0 < self.stop_percentile < 1:
            raise ValueError("stop_percentile must lie in (0, 1)")
        if not self.stop_threshold > 0:
            raise ValueError("stop_threshold must be > 0")

    def economics(self, partition: Partition) -> EconomicParams:
        return self.econ if self.econ is not None else EconomicParams.ctr_only(self.R, partition)


@dataclass(frozen=True)
class BatchRecord:
    t: int
    n: np.ndarray  # R x J displayed impressions
    s: np.ndarray  # R x J clicks
    ppvr: np.ndarray  # K
    regret: float  # expected regret per impression under the allocation used in this batch
    post_best_prob: float
    w: np.ndarray  # R x J allocation in effect during this batch
    arrivals: int

    @property
    def impressions(self) -> int:
        return int(self.n.sum())

    @property
    def max_ppvr(self) -> float:
        return float(self.ppvr.max())


@dataclass
class RunTrace:
    policy: Policy
    seed: int
    batch_size: int
    true_best: tuple[int, int]
    records: list[BatchRecord] = field(default_factory=list)
    stopped_at: int | None = None  # None means maxed out
    first_below: int | None = None  # first batch meeting the threshold, even with stopping off
    final_report: StopReport | None = None

    @property
    def n_batches(self) -> int:
        return len(self.records)

    @property
    def maxed_out(self) -> bool:
        return self.stopped_at is None

    @property
    def final_best(self) -> np.ndarray:
        return self.final_report.best_creative

    @property
    def sample_size(self) -> int:
        """Users that arrived before the test ended, discarded ones included."""
        return sum(rec.arrivals for rec in self.records)

    @property
    def total_regret(self) -> float:
        """Per-impression expected regret of each batch times the users in that batch."""
        return float(sum(rec.regret * rec.arrivals for rec in self.records))

    @property
    def correct_identification(self) -> bool:
        r, k = self.true_best
        rep = self.final_report
        return int(rep.best_creative[k]) == r and rep.global_best == (r, k)


def expected_regret_per_impression(w: np.ndarray, true_theta: np.ndarray, partition: Partition) -> float:
    """Expected clicks lost per impression, summed over TAs with p(j|k) weights.

    Reported as a non-negative loss.
    """
    gap = true_theta.max(axis=0, keepdims=True) - true_theta  # R x J
    per_da = (w * gap).sum(axis=0)  # J
    return float((per_da @ partition.cond_prob).sum())


def _check(config: TestConfig, env: Environment) -> Partition:
    part = env.partition
    R, J = env.true_theta.shape
    if R != config.R:
        raise ConfigMismatch(f"config has R={config.R}, environment has {R} creatives")
    if part.n_tas != config.K:
        raise ConfigMismatch(f"config has K={config.K}, environment partition has {part.n_tas} TAs")
    if config.population is not None:
        mine = build_partition(config.K, config.population)
        same = [d.members for d in mine.das] == [d.members for d in part.das] and np.allclose(
            mine.cond_prob, part.cond_prob, rtol=0, atol=1e-12
        )
        if not same:
            raise ConfigMismatch("config population does not match the environment's partition")
    econ = config.economics(part)
    if econ.cost_da.shape != (R, J) or econ.cost_ta.shape != (R, config.K):
        raise ConfigMismatch("cost matrices do not match the test dimensions")
    return part


def batch_rng(seed: int, t: int) -> np.random.Generator:
    """Independent stream for batch ``t`` of the replication seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(t,)))


def run_test(config: TestConfig, env: Environment) -> RunTrace:
    part = _check(config, env)
    econ = config.economics(part)
    R, K, J = config.R, config.K, part.n_das
    theta = env.true_theta
    true_best = env.true_best(econ.gamma, econ.cost_ta)
    st = config.policy is Policy.ST
    uniform_w = np.full((R, J), 1.0 / R)

    # ST learns directly on creative x TA arms
    state = init_posterior(R, K if st else J)
    trace = RunTrace(config.policy, config.seed, config.batch_size, true_best)

    if config.policy is Policy.TS:
        w = allocation_from_draws(sample_theta_draws(state, config.H, batch_rng(config.seed, 0)), econ)
    else:
        w = uniform_w

    probs = part.arrival_probs
    for t in range(1, config.max_batches + 1):
        rng = batch_rng(config.seed, t)
        arrivals = rng.multinomial(config.batch_size, probs)

        if st:
            n3 = st_allocate(arrivals, part, R, rng)
            s3 = rng.binomial(n3, theta[:, None, :])
            state = update_posterior(state, BatchOutcome(n3.sum(axis=2), s3.sum(axis=2)))
            n, s = n3.sum(axis=1), s3.sum(axis=1)
            draws = sample_theta_draws(state, config.H, rng)
            omega = econ.gamma * draws - econ.cost_ta
        else:
            if config.policy is Policy.TS:
                n = ts_allocate(state, arrivals, econ, rng)
            else:
                n = ea_allocate(arrivals, R, rng)
            s = rng.binomial(n, theta)
            state = update_posterior(state, BatchOutcome(n, s))
            draws = sample_theta_draws(state, config.H, rng)
            omega = aggregate_draws(draws, part, econ.gamma, econ.cost_ta).omega

        report = stop_report(omega, config.stop_threshold, config.stop_percentile, true_best)
        trace.records.append(
            BatchRecord(
                t=t,
                n=n,
                s=s,
                ppvr=report.ppvr,
                regret=expected_regret_per_impression(w, theta, part),
                post_best_prob=report.post_best_prob,
                w=w,
                arrivals=int(arrivals.sum()),
            )
        )
        trace.final_report = report
        if report.should_stop and trace.first_below is None:
            trace.first_below = t
            if config.stopping:
                trace.stopped_at = t
                break

        if config.policy is Policy.TS:
            w = allocation_from_draws(draws, econ)

    log.debug(
        "policy=%s seed=%d batches=%d stopped=%s",
        config.policy.value, config.seed, trace.n_batches, trace.stopped_at,
    )
    return trace
