"""Domain entities for billboard-slot allocation with tag-specific demands.

Everything here is immutable after construction. Identifiers are plain
strings; ordering between identifiers (used for deterministic tie-breaks)
is ordinary string ordering, so generated ids are zero-padded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Protocol, Sequence


@dataclass(frozen=True)
class TrajectoryRecord:
    """One user seen at one location during a closed interval of seconds."""

    user_id: str
    lat: float
    lon: float
    t_start: int
    t_end: int


@dataclass(frozen=True)
class TagAffinity:
    user_id: str
    tag_id: str
    prob: float


@dataclass(frozen=True)
class Billboard:
    board_id: str
    lat: float
    lon: float


@dataclass(frozen=True)
class BillboardSlot:
    """A (board, time window) pair: the atomic allocatable resource.

    ``base_influence`` caches the tag-agnostic influence of the slot on its
    own, which feeds the supply total and the slot cost.
    """

    slot_id: str
    board_id: str
    lat: float
    lon: float
    t_start: int
    t_end: int
    cost: float = 0.0
    base_influence: float = 0.0


@dataclass(frozen=True)
class Advertiser:
    adv_id: str
    demand: float
    payment: float
    tags: tuple[str, ...]

    @property
    def ratio(self) -> float:
        return self.payment / self.demand


@dataclass(frozen=True)
class Instance:
    """A complete problem instance: trajectories, affinities, slots, advertisers.

    ``horizon`` is the global ``(T1, T2)`` span and ``slot_duration`` the fixed
    slot length, both in whole seconds. ``meta`` carries provenance such as
    generator parameters; it does not take part in equality.
    """

    trajectories: tuple[TrajectoryRecord, ...]
    affinities: tuple[TagAffinity, ...]
    slots: tuple[BillboardSlot, ...]
    advertisers: tuple[Advertiser, ...]
    horizon: tuple[int, int]
    slot_duration: int
    meta: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        # canonical order: slot index order == slot_id order
        object.__setattr__(self, "slots", tuple(sorted(self.slots, key=lambda s: s.slot_id)))
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        object.__setattr__(self, "affinities", tuple(self.affinities))
        object.__setattr__(self, "advertisers", tuple(self.advertisers))

    @cached_property
    def user_ids(self) -> tuple[str, ...]:
        return tuple(sorted({r.user_id for r in self.trajectories}))

    @cached_property
    def tag_ids(self) -> tuple[str, ...]:
        """Tag universe: every tag that some user has an affinity for."""
        return tuple(sorted({a.tag_id for a in self.affinities}))

    @cached_property
    def slot_ids(self) -> tuple[str, ...]:
        return tuple(s.slot_id for s in self.slots)

    @cached_property
    def slot_position(self) -> dict[str, int]:
        return {sid: i for i, sid in enumerate(self.slot_ids)}

    @cached_property
    def board_ids(self) -> tuple[str, ...]:
        return tuple(sorted({s.board_id for s in self.slots}))

    def advertiser(self, adv_id: str) -> Advertiser:
        for a in self.advertisers:
            if a.adv_id == adv_id:
                return a
        raise KeyError(adv_id)

    @property
    def supply(self) -> float:
        """Total tag-agnostic influence supply (sum of per-slot influence)."""
        return math.fsum(s.base_influence for s in self.slots)

    def validate(self) -> "ValidationResult":
        return validate_instance(
            self.trajectories,
            self.affinities,
            self.slots,
            self.advertisers,
            horizon=self.horizon,
            slot_duration=self.slot_duration,
        )


@dataclass(frozen=True)
class Allocation:
    """Advertiser -> tag -> ordered slot ids, plus the unassigned pool.

    The union of an advertiser's tag buckets is its slot set. Buckets keep
    insertion order so a trace replay can be compared exactly.
    """

    buckets: Mapping[str, Mapping[str, tuple[str, ...]]]
    unassigned: tuple[str, ...] = ()

    @classmethod
    def empty(cls, advertisers: Iterable[Advertiser], slot_ids: Iterable[str]) -> "Allocation":
        return cls({a.adv_id: {} for a in advertisers}, tuple(sorted(slot_ids)))

    def slots_of(self, adv_id: str) -> tuple[str, ...]:
        bucket = self.buckets.get(adv_id, {})
        return tuple(s for tag in sorted(bucket) for s in bucket[tag])

    def assigned(self) -> dict[str, str]:
        """slot_id -> adv_id for every allocated slot (last writer wins)."""
        owner = {}
        for adv_id in sorted(self.buckets):
            for s in self.slots_of(adv_id):
                owner[s] = adv_id
        return owner

    def n_allocated(self) -> int:
        return sum(len(self.slots_of(a)) for a in self.buckets)

    def canonical(self) -> tuple:
        return (
            tuple(
                (a, tuple((t, tuple(self.buckets[a][t])) for t in sorted(self.buckets[a])))
                for a in sorted(self.buckets)
            ),
            tuple(sorted(self.unassigned)),
        )

    def __eq__(self, other):
        if not isinstance(other, Allocation):
            return NotImplemented
        return self.canonical() == other.canonical()


REGRET_KINDS = ("unsatisfied", "excessive", "zero")


@dataclass(frozen=True)
class AdvertiserRegret:
    adv_id: str
    achieved: float
    demand: float
    payment: float
    regret: float
    kind: str

    @property
    def satisfied(self) -> bool:
        return self.kind != "unsatisfied"


@dataclass(frozen=True)
class RegretReport:
    entries: tuple[AdvertiserRegret, ...]

    @property
    def total(self) -> float:
        return math.fsum(e.regret for e in self.entries)

    @property
    def excessive(self) -> float:
        return math.fsum(e.regret for e in self.entries if e.kind == "excessive")

    @property
    def unsatisfied(self) -> float:
        return math.fsum(e.regret for e in self.entries if e.kind == "unsatisfied")

    @property
    def n_satisfied(self) -> int:
        return sum(e.satisfied for e in self.entries)

    def entry(self, adv_id: str) -> AdvertiserRegret:
        for e in self.entries:
            if e.adv_id == adv_id:
                return e
        raise KeyError(adv_id)


class InfluenceModel(Protocol):
    """Anything that can price a slot set for a tag set.

    The coverage model lives in :mod:`trmoa.influence`; tests also use
    additive stubs.
    """

    slot_ids: Sequence[str]

    def influence(self, slot_ids: Iterable[str], tags: Sequence[str]) -> float: ...


class UnknownSlotError(KeyError):
    """An allocation references a slot that is not in the catalog."""


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def _finite(*xs) -> bool:
    return all(isinstance(x, (int, float)) and math.isfinite(x) for x in xs)


def validate_instance(
    trajectories: Iterable[TrajectoryRecord],
    affinities: Iterable[TagAffinity],
    slots: Iterable[BillboardSlot],
    advertisers: Iterable[Advertiser],
    *,
    horizon: tuple[int, int] | None = None,
    slot_duration: int | None = None,
) -> ValidationResult:
    """Scan the four collections and report every violation found.

    Violations are returned as data; nothing is raised and nothing mutated.
    """
    out: list[str] = []
    trajectories = list(trajectories)
    users = {r.user_id for r in trajectories}

    for i, r in enumerate(trajectories):
        where = f"trajectory {i} (user {r.user_id})"
        if not _finite(r.lat, r.lon) or not (-90 <= r.lat <= 90 and -180 <= r.lon <= 180):
            out.append(f"{where}: coordinates out of range")
        if r.t_start > r.t_end:
            out.append(f"{where}: t1 > t2")
        if horizon is not None and not (horizon[0] <= r.t_start and r.t_end <= horizon[1]):
            out.append(f"{where}: interval outside horizon")

    seen_pairs = set()
    for i, a in enumerate(affinities):
        where = f"affinity {i} ({a.user_id},{a.tag_id})"
        if not _finite(a.prob) or not 0.0 <= a.prob <= 1.0:
            out.append(f"{where}: probability out of range")
        if (a.user_id, a.tag_id) in seen_pairs:
            out.append(f"{where}: duplicate (user, tag) pair")
        seen_pairs.add((a.user_id, a.tag_id))
        if a.user_id not in users:
            out.append(f"{where}: dangling user id")

    slots = list(slots)
    by_board: dict[str, list[BillboardSlot]] = {}
    seen_slots = set()
    for s in slots:
        where = f"slot {s.slot_id}"
        if s.slot_id in seen_slots:
            out.append(f"{where}: duplicate slot id")
        seen_slots.add(s.slot_id)
        if s.t_start > s.t_end:
            out.append(f"{where}: t1 > t2")
        if not _finite(s.cost, s.base_influence) or s.cost < 0 or s.base_influence < 0:
            out.append(f"{where}: cost/base_influence must be finite and non-negative")
        if not _finite(s.lat, s.lon) or not (-90 <= s.lat <= 90 and -180 <= s.lon <= 180):
            out.append(f"{where}: coordinates out of range")
        by_board.setdefault(s.board_id, []).append(s)

    if horizon is not None and slot_duration is not None:
        t1, t2 = horizon
        if slot_duration <= 0 or (t2 - t1) % slot_duration:
            out.append("slot duration must be positive and divide the horizon")
        else:
            expected = [(t, t + slot_duration) for t in range(t1, t2, slot_duration)]
            for board, group in sorted(by_board.items()):
                windows = sorted((s.t_start, s.t_end) for s in group)
                if windows != expected:
                    out.append(f"board {board}: slot windows do not tile the horizon")

    seen_adv = set()
    for a in advertisers:
        where = f"advertiser {a.adv_id}"
        if a.adv_id in seen_adv:
            out.append(f"{where}: duplicate advertiser id")
        seen_adv.add(a.adv_id)
        if not _finite(a.demand) or a.demand <= 0:
            out.append(f"{where}: demand must be positive")
        if not _finite(a.payment) or a.payment <= 0:
            out.append(f"{where}: payment must be positive")
        if not a.tags:
            out.append(f"{where}: empty tag list")
        if len(set(a.tags)) != len(a.tags):
            out.append(f"{where}: duplicate tags")

    return ValidationResult(tuple(out))


@dataclass(frozen=True)
class FeasibilityVerdict:
    disjoint: bool
    conflicts: tuple[str, ...]
    demand_met: Mapping[str, bool]
    achieved: Mapping[str, float]

    @property
    def feasible(self) -> bool:
        return self.disjoint and all(self.demand_met.values())


def allocation_is_feasible(
    alloc: Allocation,
    advertisers: Iterable[Advertiser],
    tag_selection: Mapping[str, Sequence[str]],
    influence: InfluenceModel,
) -> FeasibilityVerdict:
    """Check disjointness and per-advertiser demand satisfaction.

    Unmet demand is diagnostic only; solvers may legitimately leave demand
    unmet when supply runs out. Raises :class:`UnknownSlotError` for slot ids
    the influence model does not know.
    """
    known = set(influence.slot_ids)
    owners: dict[str, set[str]] = {}
    for adv_id in alloc.buckets:
        for s in alloc.slots_of(adv_id):
            if s not in known:
                raise UnknownSlotError(s)
            owners.setdefault(s, set()).add(adv_id)
    # a slot listed twice for one advertiser, or also left in the pool, is a clash too
    conflicts = {s for s, o in owners.items() if len(o) > 1}
    for adv_id in alloc.buckets:
        slots = alloc.slots_of(adv_id)
        conflicts.update(s for s in slots if slots.count(s) > 1)
    conflicts.update(s for s in alloc.unassigned if s in owners)

    met, achieved = {}, {}
    for a in advertisers:
        value = influence.influence(alloc.slots_of(a.adv_id), tag_selection.get(a.adv_id, ()))
        achieved[a.adv_id] = value
        met[a.adv_id] = value >= a.demand
    return FeasibilityVerdict(not conflicts, tuple(sorted(conflicts)), met, achieved)
