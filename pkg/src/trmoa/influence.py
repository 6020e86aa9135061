"""Tag-specific coverage influence over a trajectory database.

A user ``u`` is *exposed* to slot ``s`` when one of its trajectory records
lies within ``gamma`` meters of the slot's board and its interval overlaps
the slot window (closed intervals). Exposure gates the user's tag
probability, so for a slot set ``S`` and tag set ``T``::

    I(S | T) = sum_u 1 - (1 - P(u|T)) ** c_u(S)

where ``c_u(S)`` counts the slots in ``S`` exposing ``u``. A slot exposing a
user through several records still counts once.

Per-user contributions are summed with :func:`math.fsum`, which makes every
influence value independent of slot order and identical between the
incremental accumulator and a from-scratch evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geo import GridIndex
from .model import BillboardSlot, Instance, TagAffinity, TrajectoryRecord, UnknownSlotError

DEFAULT_GAMMA = 100.0


@dataclass(frozen=True)
class ExposureIndex:
    """For every slot, the ascending indices of users exposed to it."""

    user_ids: tuple[str, ...]
    slot_ids: tuple[str, ...]
    members: tuple[tuple[int, ...], ...]
    gamma: float

    def exposure(self, slot_id: str) -> frozenset[str]:
        try:
            i = self.slot_ids.index(slot_id)
        except ValueError:
            raise UnknownSlotError(slot_id) from None
        return frozenset(self.user_ids[u] for u in self.members[i])

    @property
    def n_exposures(self) -> int:
        return sum(map(len, self.members))


def build_exposure_index(
    trajectories: Iterable[TrajectoryRecord],
    slots: Sequence[BillboardSlot],
    gamma: float = DEFAULT_GAMMA,
) -> ExposureIndex:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    trajectories = list(trajectories)
    user_ids = tuple(sorted({r.user_id for r in trajectories}))
    upos = {u: i for i, u in enumerate(user_ids)}

    boards: dict[str, list[int]] = {}
    for i, s in enumerate(slots):
        boards.setdefault(s.board_id, []).append(i)
    board_names = sorted(boards)
    board_lat = [slots[boards[b][0]].lat for b in board_names]
    board_lon = [slots[boards[b][0]].lon for b in board_names]
    max_lat = max((abs(r.lat) for r in trajectories), default=0.0)
    grid = GridIndex(board_lat, board_lon, gamma, max_abs_lat=max(max_lat, max(map(abs, board_lat), default=0.0)))

    # per board: slot windows for the overlap test
    windows = []
    for b in board_names:
        idx = np.asarray(boards[b])
        starts = np.array([slots[i].t_start for i in idx])
        ends = np.array([slots[i].t_end for i in idx])
        windows.append((idx, starts, ends))

    exposed: list[set[int]] = [set() for _ in slots]
    for r in trajectories:
        u = upos[r.user_id]
        for b in grid.query(r.lat, r.lon):
            idx, starts, ends = windows[b]
            hit = idx[(starts <= r.t_end) & (ends >= r.t_start)]
            for s in hit.tolist():
                exposed[s].add(u)

    return ExposureIndex(
        user_ids=user_ids,
        slot_ids=tuple(s.slot_id for s in slots),
        members=tuple(tuple(sorted(e)) for e in exposed),
        gamma=float(gamma),
    )


class AffinityTable:
    """Dense users x tags matrix of ``Pr(u|x)``; absent pairs are 0."""

    def __init__(self, affinities: Iterable[TagAffinity], user_ids: Sequence[str]):
        affinities = list(affinities)
        self.user_ids = tuple(user_ids)
        self.tag_ids = tuple(sorted({a.tag_id for a in affinities}))
        self._upos = {u: i for i, u in enumerate(self.user_ids)}
        self.tag_index = {t: j for j, t in enumerate(self.tag_ids)}
        self.matrix = np.zeros((len(self.user_ids), len(self.tag_ids)))
        for a in affinities:
            i = self._upos.get(a.user_id)
            if i is not None:
                self.matrix[i, self.tag_index[a.tag_id]] = a.prob

    def columns(self, tags: Iterable[str]) -> list[int]:
        """Matrix columns for the known tags among ``tags``, in tag-id order."""
        return sorted({self.tag_index[t] for t in tags if t in self.tag_index})

    def probs(self, tags: Iterable[str]) -> np.ndarray:
        """``Pr(u|T) = 1 - prod_{x in T} (1 - Pr(u|x))`` for every user."""
        q = np.ones(len(self.user_ids))
        for j in self.columns(tags):
            q *= 1.0 - self.matrix[:, j]
        return 1.0 - q

    def tag_prob(self, user_id: str, tags: Iterable[str]) -> float:
        i = self._upos.get(user_id)
        if i is None:
            return 0.0
        q = 1.0
        for j in self.columns(tags):
            q *= 1.0 - float(self.matrix[i, j])
        return 1.0 - q


def tag_prob(user_id: str, tags: Iterable[str], table: AffinityTable) -> float:
    return table.tag_prob(user_id, tags)


def coverage_value(probs: Sequence[float], counts: dict[int, int]) -> float:
    """``sum_u 1 - (1 - p_u) ** c_u`` over users with a positive count."""
    return math.fsum(1.0 - (1.0 - probs[u]) ** c for u, c in counts.items() if c)


class _ExactSum:
    """Exact running sum of floats as non-overlapping partials (Shewchuk).

    Adding and later subtracting the same value leaves no residue, so the
    rounded value always equals ``math.fsum`` of the live terms.
    """

    __slots__ = ("partials",)

    def __init__(self):
        self.partials: list[float] = []

    def add(self, x: float) -> None:
        out = []
        for y in self.partials:
            if abs(x) < abs(y):
                x, y = y, x
            hi = x + y
            lo = y - (hi - x)
            if lo:
                out.append(lo)
            x = hi
        out.append(x)
        self.partials = out

    def value(self) -> float:
        return math.fsum(self.partials)


class InfluenceAccumulator:
    """Running state of ``I(S | T)`` for one growing slot set.

    ``marginal_gain`` and ``add`` cost O(|exposure(s)|). ``total`` is exact,
    so demand checks agree bit-for-bit with :meth:`InfluenceEngine.influence`.
    """

    def __init__(self, members: Sequence[Sequence[int]], probs: Sequence[float]):
        self._members = members
        self.probs = list(map(float, probs))
        self.counts: dict[int, int] = {}
        self.slots: list[int] = []
        self._sum = _ExactSum()
        self._total = 0.0

    def copy(self) -> "InfluenceAccumulator":
        other = InfluenceAccumulator.__new__(InfluenceAccumulator)
        other._members = self._members
        other.probs = self.probs
        other.counts = dict(self.counts)
        other.slots = list(self.slots)
        other._sum = _ExactSum()
        other._sum.partials = list(self._sum.partials)
        other._total = self._total
        return other

    @property
    def total(self) -> float:
        return self._total

    def marginal_gain(self, s: int, probs: Sequence[float] | None = None) -> float:
        """Influence added by slot ``s``; ``probs`` re-prices under another tag set."""
        p = self.probs if probs is None else probs
        counts = self.counts
        g = 0.0
        for u in self._members[s]:
            pu = p[u]
            if pu:
                g += (1.0 - pu) ** counts.get(u, 0) * pu
        return g

    def value(self, probs: Sequence[float]) -> float:
        """Influence of the current slot set under other per-user probabilities."""
        return coverage_value(probs, self.counts)

    def add(self, s: int) -> float:
        """Commit slot ``s``; returns the exact change in total."""
        before = self._total
        p, counts = self.probs, self.counts
        for u in self._members[s]:
            c = counts.get(u, 0)
            counts[u] = c + 1
            pu = p[u]
            if pu:
                if c:
                    self._sum.add(-(1.0 - (1.0 - pu) ** c))
                self._sum.add(1.0 - (1.0 - pu) ** (c + 1))
        self.slots.append(s)
        self._total = self._sum.value()
        return self._total - before


class InfluenceEngine:
    """Exposure index plus affinity table: the full influence model of an instance.

    Implements the :class:`trmoa.model.InfluenceModel` protocol.
    """

    def __init__(self, instance: Instance, gamma: float = DEFAULT_GAMMA, index: ExposureIndex | None = None):
        self.instance = instance
        self.index = index if index is not None else build_exposure_index(instance.trajectories, instance.slots, gamma)
        self.gamma = self.index.gamma
        self.affinity = AffinityTable(instance.affinities, self.index.user_ids)
        self.slot_ids = self.index.slot_ids
        self._spos = {s: i for i, s in enumerate(self.slot_ids)}
        self.members = self.index.members

    @property
    def n_users(self) -> int:
        return len(self.index.user_ids)

    def positions(self, slot_ids: Iterable[str]) -> list[int]:
        try:
            return [self._spos[s] for s in slot_ids]
        except KeyError as e:
            raise UnknownSlotError(e.args[0]) from None

    def probs(self, tags: Iterable[str]) -> list[float]:
        return self.affinity.probs(tags).tolist()

    def tag_prob(self, user_id: str, tags: Iterable[str]) -> float:
        return self.affinity.tag_prob(user_id, tags)

    def counts(self, positions: Iterable[int]) -> dict[int, int]:
        c: dict[int, int] = {}
        for s in set(positions):
            for u in self.members[s]:
                c[u] = c.get(u, 0) + 1
        return c

    def influence(self, slot_ids: Iterable[str], tags: Iterable[str]) -> float:
        return coverage_value(self.probs(tags), self.counts(self.positions(slot_ids)))

    def plain_influence(self, slot_ids: Iterable[str]) -> float:
        """Tag-agnostic influence: tag probability over the whole tag universe."""
        return self.influence(slot_ids, self.affinity.tag_ids)

    def base_influences(self) -> list[float]:
        p = self.probs(self.affinity.tag_ids)
        return [coverage_value(p, {u: 1 for u in m}) for m in self.members]

    def accumulator(self, tags: Iterable[str] | None = None, probs: Sequence[float] | None = None) -> InfluenceAccumulator:
        if probs is None:
            probs = self.probs(tags or ())
        return InfluenceAccumulator(self.members, probs)

    def subset_table(self, slot_ids: Sequence[str], tags: Iterable[str]) -> list[float]:
        """Influence of every subset of ``slot_ids``, indexed by bitmask."""
        pos = self.positions(slot_ids)
        p = self.probs(tags)
        table = [0.0] * (1 << len(pos))
        for mask in range(1, len(table)):
            table[mask] = coverage_value(p, self.counts(pos[i] for i in range(len(pos)) if mask >> i & 1))
        return table
