"""Ground truth for simulated tests."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .audience import Membership, Partition


@dataclass(frozen=True, eq=False)
class Environment:
    """True CTR of every creative x DA cell (R x J) over a partition."""

    true_theta: np.ndarray
    partition: Partition

    def __post_init__(self):
        theta = np.asarray(self.true_theta, dtype=float)
        if theta.ndim != 2 or theta.shape[1] != self.partition.n_das:
            raise ValueError(
                f"true_theta must be R x {self.partition.n_das}, got shape {theta.shape}"
            )
        if ((theta <= 0) | (theta >= 1)).any():
            raise ValueError("true CTRs must lie strictly inside (0, 1)")
        object.__setattr__(self, "true_theta", theta)

    @classmethod
    def from_cells(cls, ctr: Mapping[Membership, Sequence[float]], partition: Partition) -> Environment:
        """Build from per-cell CTR vectors; cells absent from the partition are ignored."""
        cols = []
        for da in partition.das:
            if da.members not in ctr:
                raise ValueError(f"no CTRs given for DA {da.label()}")
            cols.append(np.asarray(ctr[da.members], dtype=float))
        return cls(np.column_stack(cols), partition)

    @property
    def R(self) -> int:
        return self.true_theta.shape[0]

    @property
    def true_lambda(self) -> np.ndarray:
        return self.true_theta @ self.partition.cond_prob

    def true_omega(self, gamma: float = 1.0, cost_ta: np.ndarray | float = 0.0) -> np.ndarray:
        return gamma * self.true_lambda - cost_ta

    def true_best(self, gamma: float = 1.0, cost_ta: np.ndarray | float = 0.0) -> tuple[int, int]:
        omega = self.true_omega(gamma, cost_ta)
        r, k = np.unravel_index(int(np.argmax(omega)), omega.shape)
        return int(r), int(k)

    def top2_gap(self, gamma: float = 1.0, cost_ta: np.ndarray | float = 0.0) -> float:
        """Payoff gap between the best and second-best creative x TA combination."""
        flat = np.sort(self.true_omega(gamma, cost_ta).ravel())[::-1]
        return float(flat[0] - flat[1]) if flat.size > 1 else float("inf")
