"""Monte-Carlo aggregation from creative x DA draws to creative x TA payoffs,
and the potential-value-remaining stopping statistic built on top of it.

All draw arrays are laid out (H, R, K) or (H, R, J): draw, creative, audience.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audience import Partition
from .errors import NonpositivePayoffDenominator


@dataclass(frozen=True)
class AggregateDraws:
    lam: np.ndarray  # H x R x K
    omega: np.ndarray  # H x R x K


@dataclass(frozen=True)
class StopReport:
    ppvr: np.ndarray  # K
    best_creative: np.ndarray  # K, r*_k
    should_stop: bool
    post_best_prob: float
    combo_best_prob: np.ndarray  # R x K, share of draws where (r, k) is the global best
    global_best: tuple[int, int]  # modal (r, k) across draws

    @property
    def max_ppvr(self) -> float:
        return float(self.ppvr.max())


def aggregate_lambda(theta_draws: np.ndarray, partition: Partition) -> np.ndarray:
    """TA-level click probability per draw: sum over j in O(k) of theta_rj * p(j|k)."""
    theta_draws = np.asarray(theta_draws, dtype=float)
    if theta_draws.shape[-1] != partition.n_das:
        raise ValueError(
            f"draws have {theta_draws.shape[-1]} contexts, partition has {partition.n_das}"
        )
    return theta_draws @ partition.cond_prob


def aggregate_cost(cost_da: np.ndarray, partition: Partition) -> np.ndarray:
    return aggregate_lambda(cost_da, partition)


def compute_omega(lam: np.ndarray, gamma: float, cost_ta: np.ndarray) -> np.ndarray:
    return gamma * np.asarray(lam, dtype=float) - np.asarray(cost_ta, dtype=float)


def aggregate_draws(
    theta_draws: np.ndarray, partition: Partition, gamma: float, cost_ta: np.ndarray
) -> AggregateDraws:
    lam = aggregate_lambda(theta_draws, partition)
    return AggregateDraws(lam, compute_omega(lam, gamma, cost_ta))


def best_creatives(omega: np.ndarray) -> np.ndarray:
    """r*_k for every k: the creative whose best draw is highest (ties -> lowest r)."""
    omega = np.asarray(omega)
    if omega.shape[0] < 1:
        raise ValueError("need at least one draw")
    return np.argmax(omega.max(axis=0), axis=0)


def best_creative(omega: np.ndarray, k: int) -> int:
    return int(best_creatives(omega)[k])


def nearest_rank(values: np.ndarray, p: float, axis: int = 0) -> np.ndarray:
    """Nearest-rank percentile: the ceil(p*n)-th smallest value along ``axis``."""
    values = np.asarray(values)
    n = values.shape[axis]
    # guard against p*n landing a hair above an integer (0.95 * 1000)
    rank = min(max(math.ceil(p * n - 1e-9), 1), n)
    return np.take(np.partition(values, rank - 1, axis=axis), rank - 1, axis=axis)


def unit_free_regret(omega: np.ndarray, r_star: np.ndarray) -> np.ndarray:
    """Per-draw relative regret of r*_k against the per-draw best, shape (H, K)."""
    omega = np.asarray(omega, dtype=float)
    K = omega.shape[2]
    r_star = np.asarray(r_star, dtype=int)
    chosen = omega[:, r_star, np.arange(K)]
    bad = (chosen <= 0).any(axis=0)
    if bad.any():
        raise NonpositivePayoffDenominator(int(np.flatnonzero(bad)[0]))
    best = omega.max(axis=1)
    return (best - chosen) / chosen


def compute_ppvr(omega: np.ndarray, r_star: np.ndarray, percentile: float = 0.95) -> np.ndarray:
    return nearest_rank(unit_free_regret(omega, r_star), percentile, axis=0)


def should_stop(ppvr: np.ndarray, threshold: float = 0.01) -> bool:
    return bool(np.max(ppvr) < threshold)


def combo_best_prob(omega: np.ndarray) -> np.ndarray:
    """Share of draws in which each (r, k) is the global best; ties go to the lowest flat index."""
    H, R, K = omega.shape
    winners = np.argmax(omega.reshape(H, R * K), axis=1)
    return (np.bincount(winners, minlength=R * K) / H).reshape(R, K)


def posterior_best_prob(omega: np.ndarray, true_best: tuple[int, int]) -> float:
    r, k = true_best
    top = omega.max(axis=(1, 2))
    return float(np.mean(omega[:, r, k] == top))


def stop_report(
    omega: np.ndarray,
    threshold: float = 0.01,
    percentile: float = 0.95,
    true_best: tuple[int, int] | None = None,
) -> StopReport:
    r_star = best_creatives(omega)
    ppvr = compute_ppvr(omega, r_star, percentile)
    combos = combo_best_prob(omega)
    g = np.unravel_index(int(np.argmax(combos)), combos.shape)
    pbp = posterior_best_prob(omega, true_best) if true_best is not None else float("nan")
    return StopReport(
        ppvr=ppvr,
        best_creative=r_star,
        should_stop=should_stop(ppvr, threshold),
        post_best_prob=pbp,
        combo_best_prob=combos,
        global_best=(int(g[0]), int(g[1])),
    )
