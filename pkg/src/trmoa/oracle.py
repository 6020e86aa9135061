"""Exact minimum-regret allocation for tiny instances.

Depth-first over slots; each slot goes to nobody or to one advertiser. Per
advertiser the influence of every slot subset is tabulated up front (by
bitmask), so a node costs a few table lookups. A branch is cut when a lower
bound on its total regret cannot beat the incumbent: influence is monotone,
so an advertiser's final influence lies between what it holds now and what it
would hold if it received every undecided slot, and the regret curve is
decreasing below demand and increasing above it.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

from .model import Advertiser, Allocation, InfluenceModel
from .regret import advertiser_regret

MAX_SLOTS = 12
MAX_ADVERTISERS = 3


class OracleTooLarge(ValueError):
    pass


def _lower_bound(now: float, most: float, sigma: float, u: float, delta: float) -> float:
    if now >= sigma:
        return advertiser_regret(now, sigma, u, delta)[0]
    if most >= sigma:
        return 0.0
    return advertiser_regret(most, sigma, u, delta)[0]


def _subset_table(model: InfluenceModel, slot_ids: Sequence[str], tags: Sequence[str]) -> list[float]:
    if hasattr(model, "subset_table"):
        return model.subset_table(slot_ids, tags)
    table = [0.0] * (1 << len(slot_ids))
    for mask in range(1, len(table)):
        table[mask] = model.influence([s for i, s in enumerate(slot_ids) if mask >> i & 1], tags)
    return table


def exhaustive_allocation(
    slot_ids: Sequence[str],
    advertisers: Sequence[Advertiser],
    tags: Mapping[str, Sequence[str]],
    model: InfluenceModel,
    delta: float,
    max_slots: int = MAX_SLOTS,
    max_advertisers: int = MAX_ADVERTISERS,
) -> tuple[Allocation, int]:
    """Return a minimum-total-regret allocation and the number of search nodes visited."""
    m, n = len(slot_ids), len(advertisers)
    if m > max_slots or n > max_advertisers:
        raise OracleTooLarge(
            f"oracle limited to {max_slots} slots and {max_advertisers} advertisers, got {m} and {n}"
        )
    slot_ids = list(slot_ids)
    tables = [_subset_table(model, slot_ids, tags.get(a.adv_id, ())) for a in advertisers]
    params = [(a.demand, a.payment) for a in advertisers]
    # advertisers with no usable tags can never gain influence; keep them out of the search
    owners = [i for i, a in enumerate(advertisers) if tags.get(a.adv_id)]
    full = (1 << m) - 1

    best = [math.inf, None]
    masks = [0] * n
    nodes = 0

    def bound(rem: int) -> float:
        return math.fsum(
            _lower_bound(tables[i][masks[i]], tables[i][masks[i] | rem], params[i][0], params[i][1], delta)
            for i in range(n)
        )

    def visit(j: int) -> None:
        nonlocal nodes
        nodes += 1
        rem = full & ~((1 << j) - 1)
        if bound(rem) >= best[0]:
            return
        if j == m:
            total = math.fsum(
                advertiser_regret(tables[i][masks[i]], params[i][0], params[i][1], delta)[0] for i in range(n)
            )
            if total < best[0]:
                best[0], best[1] = total, list(masks)
            return
        bit = 1 << j
        visit(j + 1)
        for i in owners:
            masks[i] |= bit
            visit(j + 1)
            masks[i] &= ~bit

    visit(0)
    return _to_allocation(best[1], slot_ids, advertisers, tags), nodes


def _to_allocation(masks, slot_ids, advertisers, tags) -> Allocation:
    buckets, taken = {}, set()
    for i, a in enumerate(advertisers):
        mine = [s for j, s in enumerate(slot_ids) if masks[i] >> j & 1]
        taken.update(mine)
        refined = list(tags.get(a.adv_id, ()))
        b: dict[str, list[str]] = {}
        for k, s in enumerate(mine):
            b.setdefault(refined[k % len(refined)], []).append(s)
        buckets[a.adv_id] = {t: tuple(v) for t, v in b.items()}
    return Allocation(buckets, tuple(sorted(set(slot_ids) - taken)))
