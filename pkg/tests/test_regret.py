import math
from fractions import Fraction

import numpy as np
import pytest

from _helpers import EXAMPLE_ADVERTISERS, EXAMPLE_SLOTS, EXAMPLE_TAGS, AdditiveModel, random_micro, ref_regret
from trmoa.influence import InfluenceEngine
from trmoa.model import Allocation
from trmoa.regret import RegretParams, advertiser_regret, total_regret

STRATEGY_ONE = Allocation({"a1": {"x": ("s2", "s5")}, "a2": {"x": ("s4",)}, "a3": {"x": ("s1", "s3")}})
STRATEGY_TWO = Allocation({"a1": {"x": ("s1", "s5")}, "a2": {"x": ("s2", "s3")}, "a3": {"x": ("s4",)}})


def test_strategy_two_golden_values():
    assert advertiser_regret(6.0, 6.0, 9.0, 0.5) == (0.0, "zero")
    value, kind = advertiser_regret(8.0, 7.0, 12.0, 0.5)
    assert kind == "excessive" and value == 12 / 7
    assert advertiser_regret(6.0, 8.0, 18.0, 0.5) == (11.25, "unsatisfied")


def test_nothing_delivered_costs_the_payment():
    assert advertiser_regret(0.0, 5.0, 3.5, 0.5) == (3.5, "unsatisfied")
    assert advertiser_regret(0.0, 5.0, 3.5, 1.0) == (3.5, "unsatisfied")


def test_boundary_discontinuity():
    sigma, u = 8.0, 18.0
    assert advertiser_regret(sigma, sigma, u, 0.5) == (0.0, "zero")
    below = np.nextafter(sigma, 0.0)
    value, kind = advertiser_regret(below, sigma, u, 0.5)
    assert kind == "unsatisfied"
    assert value == pytest.approx(u * 0.5, rel=1e-12)
    above, kind = advertiser_regret(np.nextafter(sigma, 20.0), sigma, u, 0.5)
    assert kind == "excessive" and 0.0 < above < 1e-12


def test_regret_rejects_non_positive_demand():
    with pytest.raises(ValueError):
        advertiser_regret(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        RegretParams(1.5)


def test_regret_matches_exact_arithmetic():
    rng = np.random.default_rng(0)
    for _ in range(200):
        x, s, u, d = (float(v) for v in (rng.uniform(0, 10), rng.uniform(0.1, 10), rng.uniform(0.1, 10), rng.uniform(0, 1)))
        X, S, U, D = map(Fraction, (x, s, u, d))
        exact = U * (1 - D * X / S) if X < S else U * (X - S) / S
        assert math.isclose(advertiser_regret(x, s, u, d)[0], float(exact), rel_tol=1e-12, abs_tol=1e-12)


def test_empty_allocation_total_is_sum_of_payments():
    model = AdditiveModel(EXAMPLE_SLOTS)
    report = total_regret(Allocation.empty(EXAMPLE_ADVERTISERS, EXAMPLE_SLOTS), EXAMPLE_ADVERTISERS, EXAMPLE_TAGS, 0.5, model)
    assert report.total == 39.0
    assert report.unsatisfied == 39.0 and report.excessive == 0.0


def test_strategy_two_beats_strategy_one():
    model = AdditiveModel(EXAMPLE_SLOTS)
    one = total_regret(STRATEGY_ONE, EXAMPLE_ADVERTISERS, EXAMPLE_TAGS, RegretParams(0.5), model)
    two = total_regret(STRATEGY_TWO, EXAMPLE_ADVERTISERS, EXAMPLE_TAGS, RegretParams(0.5), model)
    assert two.total == pytest.approx(12 / 7 + 11.25, abs=1e-12)
    assert one.total == pytest.approx(1.5 + 12 * 4 / 7 + 18 * 9 / 16, abs=1e-12)
    assert two.total < one.total
    assert [e.kind for e in two.entries] == ["zero", "excessive", "unsatisfied"]


def test_single_advertiser_exactly_satisfied():
    model = AdditiveModel(EXAMPLE_SLOTS)
    adv = EXAMPLE_ADVERTISERS[:1]
    report = total_regret(Allocation({"a1": {"x": ("s1", "s5")}}), adv, EXAMPLE_TAGS, 0.5, model)
    assert report.total == 0.0


def test_report_is_sum_of_parts_on_random_instances():
    rng = np.random.default_rng(42)
    for _ in range(200):
        inst, exposures, probs = random_micro(rng, n_adv=3)
        eng = InfluenceEngine(inst)
        tags = {a.adv_id: a.tags for a in inst.advertisers}
        owner = rng.integers(0, 4, size=len(inst.slots))
        buckets = {a.adv_id: {a.tags[0]: tuple(s for s, o in zip(inst.slot_ids, owner) if o == i + 1)}
                   for i, a in enumerate(inst.advertisers)}
        delta = float(rng.choice([0.0, 0.5, 1.0]))
        report = total_regret(Allocation(buckets), inst.advertisers, tags, delta, eng)
        assert math.isclose(report.excessive + report.unsatisfied, report.total, abs_tol=1e-9)
        for i, a in enumerate(inst.advertisers):
            e = report.entry(a.adv_id)
            mine = [k for k, o in enumerate(owner) if o == i + 1]
            x = eng.influence([inst.slot_ids[k] for k in mine], a.tags)
            assert e.achieved == x
            assert math.isclose(e.regret, ref_regret(x, a.demand, a.payment, delta), abs_tol=1e-12)
