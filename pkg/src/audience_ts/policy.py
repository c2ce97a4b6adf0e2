"""Creative allocation policies: Thompson Sampling, Equal Allocation, Split-Testing.

Each policy has a per-user form (``*_select`` / ``st_assign``) and a batch form
(``*_allocate``) that the engine uses. The batch forms consume the random
stream in the same way as calling the per-user form once per arriving user,
grouped by context.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .aggregate import aggregate_cost
from .audience import Partition
from .posterior import PosteriorState, sample_theta, sample_theta_draws


class Policy(str, Enum):
    TS = "TS"
    EA = "EA"
    ST = "ST"


@dataclass(frozen=True)
class EconomicParams:
    """Value per click and average display costs at DA and TA level."""

    gamma: float
    cost_da: np.ndarray  # R x J
    cost_ta: np.ndarray  # R x K

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        cost_da = np.asarray(self.cost_da, dtype=float)
        cost_ta = np.asarray(self.cost_ta, dtype=float)
        if (cost_da < 0).any() or (cost_ta < 0).any():
            raise ValueError("display costs must be >= 0")
        object.__setattr__(self, "cost_da", cost_da)
        object.__setattr__(self, "cost_ta", cost_ta)

    @classmethod
    def from_da_costs(cls, gamma: float, cost_da: np.ndarray, partition: Partition) -> EconomicParams:
        cost_da = np.asarray(cost_da, dtype=float)
        return cls(gamma, cost_da, aggregate_cost(cost_da, partition))

    @classmethod
    def ctr_only(cls, R: int, partition: Partition) -> EconomicParams:
        """gamma = 1 and zero cost, so payoffs are CTRs."""
        return cls.from_da_costs(1.0, np.zeros((R, partition.n_das)), partition)

    def scaled(self, c: float) -> EconomicParams:
        return EconomicParams(self.gamma * c, self.cost_da * c, self.cost_ta * c)


@dataclass(frozen=True)
class Decision:
    """``creative`` is None when a split-test user is discarded."""

    creative: int | None
    context: int

    @property
    def discarded(self) -> bool:
        return self.creative is None


def ts_select(state: PosteriorState, j: int, econ: EconomicParams, rng: np.random.Generator) -> Decision:
    theta = sample_theta(state, j, rng)
    payoff = econ.gamma * theta - econ.cost_da[:, j]
    return Decision(int(np.argmax(payoff)), j)


def ea_select(j: int, R: int, rng: np.random.Generator) -> Decision:
    if R < 1:
        raise ValueError("R must be >= 1")
    return Decision(int(rng.integers(R)), j)


def st_assign(
    user_membership: Iterable[int], R: int, K: int, rng: np.random.Generator
) -> Decision:
    """Randomize the user to one of the R x K creative-TA arms.

    ``context`` is the arm's TA; the creative is shown only if the user
    belongs to that TA.
    """
    if R < 1 or K < 1:
        raise ValueError("R and K must be >= 1")
    arm = int(rng.integers(R * K))
    r, k = divmod(arm, K)
    members = frozenset(user_membership)
    return Decision(r if k in members else None, k)


def allocation_from_draws(theta_draws: np.ndarray, econ: EconomicParams) -> np.ndarray:
    """w_rj: share of draws in which creative r has the highest payoff in context j."""
    H, R, J = theta_draws.shape
    payoff = econ.gamma * theta_draws - econ.cost_da[None, :, :]
    winners = np.argmax(payoff, axis=1)  # H x J
    w = np.empty((R, J))
    for j in range(J):
        w[:, j] = np.bincount(winners[:, j], minlength=R) / H
    return w


def allocation_prob_w(
    state: PosteriorState, j: int, econ: EconomicParams, H: int, rng: np.random.Generator
) -> np.ndarray:
    draws = sample_theta_draws(state, H, rng)
    return allocation_from_draws(draws, econ)[:, j]


# batch forms used by the engine


def ts_allocate(
    state: PosteriorState, arrivals: np.ndarray, econ: EconomicParams, rng: np.random.Generator
) -> np.ndarray:
    """Impressions per (creative, DA) when ``arrivals[j]`` users arrive in DA j."""
    R, J = state.shape
    n = np.zeros((R, J), dtype=np.int64)
    alpha, beta = state.alpha, state.beta
    for j in range(J):
        m = int(arrivals[j])
        if m == 0:
            continue
        theta = rng.beta(alpha[:, j], beta[:, j], size=(m, R))
        choice = np.argmax(econ.gamma * theta - econ.cost_da[:, j], axis=1)
        n[:, j] = np.bincount(choice, minlength=R)
    return n


def ea_allocate(arrivals: np.ndarray, R: int, rng: np.random.Generator) -> np.ndarray:
    J = len(arrivals)
    n = np.zeros((R, J), dtype=np.int64)
    for j in range(J):
        m = int(arrivals[j])
        if m:
            n[:, j] = np.bincount(rng.integers(R, size=m), minlength=R)
    return n


def st_allocate(arrivals: np.ndarray, partition: Partition, R: int, rng: np.random.Generator) -> np.ndarray:
    """Displayed impressions per (creative, TA arm, DA), shape R x K x J.

    Users randomized to an arm whose TA they do not belong to are discarded
    and do not appear in the result.
    """
    K, J = partition.n_tas, partition.n_das
    n = np.zeros((R, K, J), dtype=np.int64)
    for j in range(J):
        m = int(arrivals[j])
        if m == 0:
            continue
        arms = np.bincount(rng.integers(R * K, size=m), minlength=R * K).reshape(R, K)
        for k in partition.das[j].members:
            n[:, k, j] = arms[:, k]
    return n
