"""Beta-Bernoulli posterior over the CTR of every creative x context arm."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidBatch, InvalidDimensions


@dataclass(frozen=True)
class BatchOutcome:
    """Impressions ``n`` and clicks ``s`` per arm for one batch (R x J)."""

    n: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.n, dtype=np.int64)
        s = np.asarray(self.s, dtype=np.int64)
        if n.shape != s.shape or n.ndim != 2:
            raise InvalidBatch(f"n and s must be matching 2-d arrays, got {n.shape} and {s.shape}")
        if (n < 0).any() or (s < 0).any():
            raise InvalidBatch("counts must be non-negative")
        if (s > n).any():
            raise InvalidBatch("clicks exceed impressions for some arm")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "s", s)

    @classmethod
    def empty(cls, R: int, J: int) -> BatchOutcome:
        z = np.zeros((R, J), dtype=np.int64)
        return cls(z, z.copy())

    def merge(self, other: BatchOutcome) -> BatchOutcome:
        return BatchOutcome(self.n + other.n, self.s + other.s)


@dataclass(frozen=True)
class PosteriorState:
    """Beta(alpha, beta) per arm, stored as unit priors plus exact integer counts.

    ``alpha = 1 + clicks`` and ``beta = 1 + impressions - clicks``; keeping the
    counts as integers makes ``alpha + beta - 2 == impressions`` exact.
    """

    impressions: np.ndarray
    clicks: np.ndarray
    t: int = 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.impressions.shape

    @property
    def alpha(self) -> np.ndarray:
        return 1.0 + self.clicks

    @property
    def beta(self) -> np.ndarray:
        return 1.0 + (self.impressions - self.clicks)

    @property
    def mean(self) -> np.ndarray:
        a, b = self.alpha, self.beta
        return a / (a + b)


def init_posterior(R: int, J: int) -> PosteriorState:
    if R < 1 or J < 1:
        raise InvalidDimensions(f"need R >= 1 and J >= 1, got R={R}, J={J}")
    z = np.zeros((R, J), dtype=np.int64)
    return PosteriorState(z, z.copy(), t=1)


def sample_theta(state: PosteriorState, j: int, rng: np.random.Generator) -> np.ndarray:
    """One joint draw of the R CTRs for context ``j``."""
    R, J = state.shape
    if not 0 <= j < J:
        raise IndexError(f"context {j} out of range for J={J}")
    return rng.beta(state.alpha[:, j], state.beta[:, j])


def sample_theta_draws(state: PosteriorState, H: int, rng: np.random.Generator) -> np.ndarray:
    """``H`` independent draws of the full CTR matrix, shape (H, R, J)."""
    if H < 1:
        raise ValueError("H must be >= 1")
    return rng.beta(state.alpha, state.beta, size=(H, *state.shape))


def update_posterior(state: PosteriorState, batch: BatchOutcome) -> PosteriorState:
    if batch.n.shape != state.shape:
        raise InvalidBatch(f"batch shape {batch.n.shape} does not match posterior {state.shape}")
    return PosteriorState(
        state.impressions + batch.n,
        state.clicks + batch.s,
        t=state.t + 1,
    )
