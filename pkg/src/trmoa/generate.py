"""Seeded synthetic instances.

Users walk along random street-like polylines inside a square city patch;
billboards stand next to the same streets. Slots tile the horizon per board.
Slot influence and cost, supply, demands and payments follow the usual
parameterisation: demand-supply ratio ``alpha`` and average individual demand
ratio ``beta`` (so ``round(alpha / beta)`` advertisers), demand
``floor(psi * supply * beta)`` with ``psi ~ U[0.8, 1.2]``, payment
``floor(eta * demand)`` with ``eta ~ U[0.9, 1.1]`` and slot cost
``floor(tau * I(s) / 10)`` with ``tau ~ U[0.9, 1.1]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .geo import EARTH_RADIUS_M
from .influence import InfluenceEngine
from .model import Advertiser, BillboardSlot, Instance, TagAffinity, TrajectoryRecord

COST_UNIT = 0.01  # slot costs are kept in cents so small slots are not all free


@dataclass(frozen=True)
class GeneratorParams:
    alpha: float = 1.0
    beta: float = 0.05
    n_users: int = 200
    n_boards: int = 30
    n_tags: int = 50
    t1: int = 0
    t2: int = 86_400
    slot_duration: int = 1_800
    gamma: float = 100.0
    tags_per_advertiser: tuple[int, int] = (100, 500)
    interests_per_user: tuple[int, int] = (2, 6)
    records_per_user: tuple[int, int] = (3, 8)
    record_duration: tuple[int, int] = (300, 2_400)
    n_streets: int = 8
    extent_m: float = 3_000.0
    center: tuple[float, float] = (40.7580, -73.9855)
    seed: int = 0

    @property
    def n_advertisers(self) -> int:
        return round(self.alpha / self.beta)

    def check(self) -> None:
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        if self.beta > self.alpha or self.n_advertisers < 1:
            raise ValueError(f"beta={self.beta} > alpha={self.alpha} leaves no advertisers")
        for name in ("n_users", "n_boards", "n_tags", "n_streets"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.slot_duration <= 0 or self.t2 <= self.t1 or (self.t2 - self.t1) % self.slot_duration:
            raise ValueError("slot_duration must be positive and divide t2 - t1")
        for name in ("tags_per_advertiser", "interests_per_user", "records_per_user", "record_duration"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ValueError(f"{name} must be a non-empty range of positive values, got {(lo, hi)}")
        if self.gamma <= 0 or self.extent_m <= 0:
            raise ValueError("gamma and extent_m must be positive")


PRESETS = {
    "nyc-micro": GeneratorParams(),
    "micro": GeneratorParams(
        alpha=0.6,
        beta=0.2,
        n_users=12,
        n_boards=2,
        n_tags=6,
        t2=4 * 1_800,
        tags_per_advertiser=(2, 5),
        interests_per_user=(1, 3),
        records_per_user=(1, 3),
        n_streets=1,
        extent_m=300.0,
    ),
}


def preset(name: str, **overrides) -> GeneratorParams:
    return replace(PRESETS[name], **overrides)


def _ids(prefix: str, n: int) -> list[str]:
    width = max(2, len(str(n - 1)))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


class _Streets:
    """Polylines in local meters, sampled by arc length."""

    def __init__(self, rng: np.random.RandomState, n: int, extent: float):
        self.lines = []
        for _ in range(n):
            pts = [rng.uniform(-extent / 2, extent / 2, size=2)]
            heading = rng.randint(4) * math.pi / 2
            for _ in range(rng.randint(3, 7)):
                heading += rng.normal(0.0, math.radians(8.0))
                if rng.uniform() < 0.3:
                    heading += rng.choice([-1, 1]) * math.pi / 2
                step = rng.uniform(0.1, 0.3) * extent
                nxt = pts[-1] + step * np.array([math.cos(heading), math.sin(heading)])
                pts.append(np.clip(nxt, -extent / 2, extent / 2))
            pts = np.array(pts)
            seg = np.hypot(*np.diff(pts, axis=0).T)
            self.lines.append((pts, np.concatenate([[0.0], np.cumsum(seg)])))

    def length(self, k: int) -> float:
        return float(self.lines[k][1][-1])

    def point(self, k: int, d: float) -> np.ndarray:
        pts, cum = self.lines[k]
        d = min(max(d, 0.0), cum[-1])
        i = min(int(np.searchsorted(cum, d, side="right")) - 1, len(pts) - 2)
        span = cum[i + 1] - cum[i]
        f = 0.0 if span == 0 else (d - cum[i]) / span
        return pts[i] + f * (pts[i + 1] - pts[i])


def _to_latlon(xy, center):
    lat0, lon0 = center
    lat = lat0 + math.degrees(xy[1] / EARTH_RADIUS_M)
    lon = lon0 + math.degrees(xy[0] / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
    return round(lat, 7), round(lon, 7)


def tile_slots(boards, t1: int, t2: int, slot_duration: int) -> list[BillboardSlot]:
    """Cut ``[t1, t2]`` into windows of ``slot_duration`` seconds on every board.

    ``boards`` holds ``(board_id, lat, lon)`` triples. Cost and influence are 0
    until priced by :func:`price_slots`.
    """
    n = (t2 - t1) // slot_duration
    width = max(2, len(str(n - 1)))
    return [
        BillboardSlot(f"{b}-{k:0{width}d}", b, lat, lon, t1 + k * slot_duration, t1 + (k + 1) * slot_duration)
        for b, lat, lon in boards
        for k in range(n)
    ]


def price_slots(instance: Instance, gamma: float, rng: np.random.RandomState) -> tuple[BillboardSlot, ...]:
    """Fill in tag-agnostic influence and the influence-proportional cost of each slot."""
    engine = InfluenceEngine(instance, gamma)
    base = engine.base_influences()
    tau = rng.uniform(0.9, 1.1, size=len(base))
    out = []
    for s, b, t in zip(instance.slots, base, tau):
        cents = max(1, math.floor(t * b / 10 / COST_UNIT))
        out.append(replace(s, cost=round(cents * COST_UNIT, 2), base_influence=b))
    return tuple(out)


def demand_unit(supply: float, alpha: float, beta: float) -> int:
    """Smallest power-of-ten subdivision that keeps every floored demand positive
    and the rescaled demand total within 1% of ``alpha * supply``."""
    m = 1
    while supply * beta * m < 10 or 0.5 / m > 0.01 * alpha * supply:
        m *= 10
    return m


def _apportion(weights: np.ndarray, total_units: int) -> np.ndarray:
    """Integer units proportional to ``weights`` summing to ``total_units`` (largest remainder)."""
    raw = weights / weights.sum() * total_units
    units = np.floor(raw).astype(np.int64)
    short = total_units - int(units.sum())
    order = np.lexsort((np.arange(len(raw)), -(raw - units)))
    units[order[:short]] += 1
    return np.maximum(units, 1)


def generate_instance(params: GeneratorParams = GeneratorParams()) -> Instance:
    """Build a full instance; a pure function of ``params`` (seed included)."""
    params.check()
    rng = np.random.RandomState(np.random.MT19937(np.random.SeedSequence(params.seed)))
    streets = _Streets(rng, params.n_streets, params.extent_m)

    board_ids = _ids("b", params.n_boards)
    boards = []
    for b in board_ids:
        k = rng.randint(params.n_streets)
        xy = streets.point(k, rng.uniform(0, streets.length(k))) + rng.normal(0.0, 10.0, size=2)
        boards.append((b, *_to_latlon(xy, params.center)))

    user_ids = _ids("u", params.n_users)
    records = []
    for u in user_ids:
        k = rng.randint(params.n_streets)
        d = rng.uniform(0, streets.length(k))
        direction = rng.choice([-1.0, 1.0])
        t = int(rng.randint(params.t1, params.t2))
        for _ in range(rng.randint(params.records_per_user[0], params.records_per_user[1] + 1)):
            dur = int(rng.randint(params.record_duration[0], params.record_duration[1] + 1))
            if t + dur > params.t2:
                break
            xy = streets.point(k, d) + rng.normal(0.0, 15.0, size=2)
            records.append(TrajectoryRecord(u, *_to_latlon(xy, params.center), t, t + dur))
            d += direction * rng.uniform(50.0, 400.0)
            t += dur + int(rng.randint(0, 1_800))
        if not any(r.user_id == u for r in records[-1:]):
            # every user keeps at least one record
            dur = params.record_duration[0]
            t0 = int(rng.randint(params.t1, params.t2 - dur + 1))
            xy = streets.point(k, d)
            records.append(TrajectoryRecord(u, *_to_latlon(xy, params.center), t0, t0 + dur))

    tag_ids = _ids("t", params.n_tags)
    affinities = []
    for u in user_ids:
        lo, hi = params.interests_per_user
        n = min(int(rng.randint(lo, hi + 1)), params.n_tags)
        for j in sorted(rng.choice(params.n_tags, size=n, replace=False)):
            affinities.append(TagAffinity(u, tag_ids[j], round(float(rng.uniform(0.05, 0.95)), 6)))

    horizon = (params.t1, params.t2)
    draft = Instance(tuple(records), tuple(affinities), tuple(tile_slots(boards, params.t1, params.t2, params.slot_duration)), (), horizon, params.slot_duration)
    slots = price_slots(draft, params.gamma, rng)
    supply = math.fsum(s.base_influence for s in slots)
    if supply <= 0:
        raise ValueError("generated instance has zero influence supply; increase users, boards or gamma")

    n_adv = params.n_advertisers
    m = demand_unit(supply, params.alpha, params.beta)
    psi = rng.uniform(0.8, 1.2, size=n_adv)
    floored = np.floor(psi * supply * params.beta * m)
    units = _apportion(floored, round(params.alpha * supply * m))
    eta = rng.uniform(0.9, 1.1, size=n_adv)
    lo, hi = params.tags_per_advertiser
    advertisers = []
    for a, un, e in zip(_ids("a", n_adv), units, eta):
        demand = int(un) / m
        payment = max(1, math.floor(e * int(un))) / m
        k = min(int(rng.randint(lo, hi + 1)), params.n_tags)
        tags = tuple(tag_ids[j] for j in sorted(rng.choice(params.n_tags, size=k, replace=False)))
        advertisers.append(Advertiser(a, demand, payment, tags))

    meta = {k: str(v) for k, v in asdict(params).items()}
    meta.update(supply=repr(supply), demand_unit=str(m))
    return Instance(tuple(records), tuple(affinities), slots, tuple(advertisers), horizon, params.slot_duration, meta)
