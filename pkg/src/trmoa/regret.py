"""Two-sided advertiser regret and its aggregate over an allocation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .model import Advertiser, AdvertiserRegret, Allocation, InfluenceModel, RegretReport

DEFAULT_DELTA = 0.5


@dataclass(frozen=True)
class RegretParams:
    """``delta`` is the share of the payment still collected, pro rata, from an unsatisfied advertiser."""

    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")


def advertiser_regret(achieved: float, demand: float, payment: float, delta: float = DEFAULT_DELTA) -> tuple[float, str]:
    """Regret of serving ``achieved`` influence against ``demand``.

    Short of demand the provider loses ``payment * (1 - delta * achieved / demand)``;
    at or beyond demand it loses the excess priced at ``payment / demand`` per
    unit. The comparison is exact: at ``achieved == demand`` the regret is 0,
    while just below it the regret is close to ``payment * (1 - delta)``.
    """
    if not demand > 0:
        raise ValueError(f"demand must be positive, got {demand}")
    if demand > achieved:
        return payment * (1.0 - delta * achieved / demand), "unsatisfied"
    if achieved > demand:
        return payment * (achieved - demand) / demand, "excessive"
    return 0.0, "zero"


def regret_entry(adv: Advertiser, achieved: float, delta: float) -> AdvertiserRegret:
    value, kind = advertiser_regret(achieved, adv.demand, adv.payment, delta)
    return AdvertiserRegret(adv.adv_id, achieved, adv.demand, adv.payment, value, kind)


def total_regret(
    alloc: Allocation,
    advertisers: Iterable[Advertiser],
    tag_selections: Mapping[str, Sequence[str]],
    params: RegretParams | float,
    influence: InfluenceModel,
) -> RegretReport:
    """Per-advertiser and aggregate regret of ``alloc``.

    Each advertiser's achieved influence is priced under its own selected tags.
    Unknown slot ids propagate :class:`~trmoa.model.UnknownSlotError`.
    """
    delta = params.delta if isinstance(params, RegretParams) else RegretParams(params).delta
    entries = []
    for adv in advertisers:
        slots = alloc.slots_of(adv.adv_id)
        achieved = influence.influence(slots, tag_selections.get(adv.adv_id, ())) if slots else 0.0
        entries.append(regret_entry(adv, achieved, delta))
    return RegretReport(tuple(entries))
