"""Target audiences, their disjoint partition, and conditional membership.

Target audiences (TAs) are identified by 0-based integers. A disjoint audience
(DA) is the set of users whose TA memberships are exactly some set ``m``; it is
keyed by that membership set throughout the package.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyPopulation, InvalidOverlap, NoPopulationForTA, UnknownContext

Membership = frozenset[int]


def membership(*tas: int) -> Membership:
    return frozenset(tas)


@dataclass(frozen=True)
class PopulationModel:
    """Unnormalized population mass of each membership cell."""

    cell_mass: Mapping[Membership, float]

    def __post_init__(self):
        cleaned = {}
        for cell, mass in self.cell_mass.items():
            cell = frozenset(int(k) for k in cell)
            mass = float(mass)
            if mass < 0 or not np.isfinite(mass):
                raise ValueError(f"cell mass must be finite and >= 0, got {mass}")
            if not cell:
                # users outside every TA are never part of the test
                continue
            if min(cell) < 0:
                raise ValueError("TA indices must be non-negative")
            cleaned[cell] = cleaned.get(cell, 0.0) + mass
        object.__setattr__(self, "cell_mass", cleaned)

    @property
    def total_mass(self) -> float:
        return sum(self.cell_mass.values())


@dataclass(frozen=True)
class DisjointAudience:
    index: int
    members: Membership
    mass: float

    def label(self) -> str:
        return "+".join(f"TA{k + 1}" for k in sorted(self.members))


@dataclass(frozen=True, eq=False)
class Partition:
    """DAs of a test together with p(j|k) and the overlap sets O(k)."""

    n_tas: int
    das: tuple[DisjointAudience, ...]
    cond_prob: np.ndarray  # J x K
    overlap_sets: tuple[tuple[int, ...], ...]
    _lookup: dict[Membership, int] = field(repr=False, default_factory=dict)

    @property
    def n_das(self) -> int:
        return len(self.das)

    @property
    def da_mass(self) -> np.ndarray:
        return np.array([da.mass for da in self.das])

    @property
    def arrival_probs(self) -> np.ndarray:
        m = self.da_mass
        return m / m.sum()

    def index_of(self, members: Iterable[int]) -> int | None:
        return self._lookup.get(frozenset(members))


def _cell_order(cell: Membership) -> tuple[int, ...]:
    return tuple(sorted(cell))


def build_partition(K: int, population: PopulationModel) -> Partition:
    """Enumerate the positive-mass cells of ``population`` as DAs.

    Cells whose share of the total mass underflows to 0.0 count as empty.

    DAs are ordered lexicographically by their sorted member list, so with two
    TAs the order is TA1-only, TA1+TA2, TA2-only.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    total = sum(population.cell_mass.values())
    # a share that underflows to zero is treated as an empty cell
    cells = {c: m for c, m in population.cell_mass.items() if m > 0 and m / total > 0}
    if not cells:
        raise EmptyPopulation("population has no cell with positive mass")
    for cell in cells:
        if max(cell) >= K:
            raise ValueError(f"cell {sorted(cell)} references a TA beyond K={K}")

    ordered = sorted(cells, key=_cell_order)
    das = tuple(DisjointAudience(j, c, cells[c]) for j, c in enumerate(ordered))
    mass = np.array([da.mass for da in das])
    member = np.zeros((len(das), K), dtype=bool)
    for da in das:
        member[da.index, list(da.members)] = True

    ta_mass = member.T.astype(float) @ mass
    for k in range(K):
        if ta_mass[k] <= 0:
            raise NoPopulationForTA(k)
    cond = np.where(member, mass[:, None], 0.0) / ta_mass[None, :]
    # exact column sums: renormalize away accumulated rounding
    cond = cond / cond.sum(axis=0, keepdims=True)
    cond.setflags(write=False)
    overlap = tuple(tuple(np.flatnonzero(member[:, k]).tolist()) for k in range(K))
    lookup = {da.members: da.index for da in das}
    return Partition(K, das, cond, overlap, lookup)


def assign_context(user_membership: Iterable[int], partition: Partition) -> int:
    """Map a user's TA memberships to the index of their DA."""
    members = frozenset(user_membership)
    if not members:
        raise UnknownContext("user belongs to no target audience")
    j = partition.index_of(members)
    if j is None:
        raise UnknownContext(f"no DA with membership {sorted(members)}")
    return j


def overlap_geometry(q: float) -> PopulationModel:
    """Symmetric two-TA population where the shared cell is a share ``q`` of each TA."""
    if not (0.0 <= q < 1.0):
        raise InvalidOverlap(f"overlap must lie in [0, 1), got {q}")
    return PopulationModel(
        {
            membership(0): 1.0 - q,
            membership(0, 1): q,
            membership(1): 1.0 - q,
        }
    )
