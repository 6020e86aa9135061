"""Instance builders and slow reference implementations for the tests.

The reference functions restate the model definitions directly (products over
exposures and tags, plain loops) and share no code with the package, so they
serve as an independent oracle.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from trmoa.model import Advertiser, BillboardSlot, Instance, TagAffinity, TrajectoryRecord

DURATION = 1_800
BASE = (40.0, -74.0)


def board_position(k: int) -> tuple[float, float]:
    # boards 0.01 deg (about 1.1 km) apart, far beyond any test radius
    return BASE[0] + 0.01 * k, BASE[1]


def exposure_instance(exposures, probs, advertisers=(), costs=None) -> Instance:
    """One board per slot, one slot per board, all over ``[0, DURATION]``.

    ``exposures[k]`` lists the users seen at slot ``k``; ``probs`` maps
    user -> {tag: prob}. Users that see nothing get a record far away.
    """
    slots, records = [], []
    seen = set()
    for k, users in enumerate(exposures):
        lat, lon = board_position(k)
        cost = 1.0 if costs is None else costs[k]
        slots.append(BillboardSlot(f"s{k}", f"b{k}", lat, lon, 0, DURATION, cost, 0.0))
        for u in users:
            records.append(TrajectoryRecord(u, lat, lon, 0, DURATION))
            seen.add(u)
    for u in sorted(set(probs) - seen):
        records.append(TrajectoryRecord(u, BASE[0] - 1.0, BASE[1], 0, DURATION))
    affinities = [TagAffinity(u, t, p) for u in sorted(probs) for t, p in sorted(probs[u].items())]
    return Instance(tuple(records), tuple(affinities), tuple(slots), tuple(advertisers), (0, DURATION), DURATION)


def random_micro(rng: np.random.Generator, max_users=20, max_slots=8, max_tags=6, n_adv=0, density=0.3):
    """Random exposure sets, sparse affinities and (optionally) advertisers."""
    n_users = int(rng.integers(1, max_users + 1))
    n_slots = int(rng.integers(1, max_slots + 1))
    n_tags = int(rng.integers(1, max_tags + 1))
    users = [f"u{i:02d}" for i in range(n_users)]
    tags = [f"t{j}" for j in range(n_tags)]
    exposures = [[u for u in users if rng.random() < density] for _ in range(n_slots)]
    probs = {}
    for u in users:
        chosen = [t for t in tags if rng.random() < 0.5] or [tags[int(rng.integers(n_tags))]]
        probs[u] = {t: round(float(rng.uniform(0.05, 0.95)), 4) for t in chosen}
    advertisers = []
    for i in range(n_adv):
        k = int(rng.integers(1, n_tags + 1))
        atags = tuple(sorted(rng.choice(tags, size=k, replace=False).tolist()))
        demand = round(float(rng.uniform(0.3, 3.0)), 3)
        payment = round(float(rng.uniform(1.0, 10.0)), 3)
        advertisers.append(Advertiser(f"a{i}", demand, payment, atags))
    costs = [round(float(rng.uniform(0.1, 2.0)), 2) for _ in range(n_slots)]
    return exposure_instance(exposures, probs, advertisers, costs), exposures, probs


def ref_tag_prob(user_probs: dict, tags) -> float:
    q = 1.0
    for t in tags:
        q *= 1.0 - user_probs.get(t, 0.0)
    return 1.0 - q


def ref_influence(slot_idx, tags, exposures, probs) -> float:
    total = 0.0
    for u, up in probs.items():
        c = sum(1 for k in set(slot_idx) if u in exposures[k])
        total += 1.0 - (1.0 - ref_tag_prob(up, tags)) ** c
    return total


def ref_regret(x, sigma, u, delta) -> float:
    if x < sigma:
        return u * (1 - delta * x / sigma)
    if x > sigma:
        return u * (x - sigma) / sigma
    return 0.0


def ref_best_total(exposures, probs, advertisers, tags, delta) -> float:
    """Minimum total regret over every slot -> {nobody, advertiser} map."""
    m, n = len(exposures), len(advertisers)
    best = math.inf
    for owner in itertools.product(range(n + 1), repeat=m):
        total = 0.0
        for i, a in enumerate(advertisers):
            mine = [k for k in range(m) if owner[k] == i + 1]
            x = ref_influence(mine, tags[a.adv_id], exposures, probs) if mine else 0.0
            total += ref_regret(x, a.demand, a.payment, delta)
        best = min(best, total)
    return best


class AdditiveModel:
    """Influence that ignores tags and adds fixed per-slot values."""

    def __init__(self, values: dict[str, float]):
        self.values = dict(values)
        self.slot_ids = tuple(sorted(values))

    def influence(self, slot_ids, tags) -> float:
        return float(sum(self.values[s] for s in set(slot_ids)))


# the worked three-advertiser, five-slot example
EXAMPLE_SLOTS = {"s1": 4.0, "s2": 5.0, "s3": 3.0, "s4": 6.0, "s5": 2.0}
EXAMPLE_ADVERTISERS = (
    Advertiser("a1", 6.0, 9.0, ("x",)),
    Advertiser("a2", 7.0, 12.0, ("x",)),
    Advertiser("a3", 8.0, 18.0, ("x",)),
)
EXAMPLE_TAGS = {"a1": ("x",), "a2": ("x",), "a3": ("x",)}
