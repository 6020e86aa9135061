import itertools
import math
from dataclasses import replace

import numpy as np
import pytest

from _helpers import EXAMPLE_ADVERTISERS, exposure_instance, random_micro
from trmoa.allocators import (
    SolverConfig,
    bg_solve,
    random_solve,
    rg_sample_size,
    rg_solve,
    rls_solve,
    solve,
    sort_advertisers,
)
from trmoa.generate import generate_instance, preset
from trmoa.influence import InfluenceEngine
from trmoa.instance_io import serialize_allocation
from trmoa.model import Advertiser, allocation_is_feasible

HEURISTICS = ("bg", "rg", "rls", "random")


@pytest.fixture(scope="module")
def small_nyc():
    return generate_instance(preset("nyc-micro", n_users=80, n_boards=8, alpha=1.0, beta=0.2, seed=7))


def test_sort_by_payment_per_demand():
    assert [a.adv_id for a in sort_advertisers(EXAMPLE_ADVERTISERS)] == ["a3", "a2", "a1"]


def test_sort_ties_by_id_and_singleton():
    a = Advertiser("b", 2.0, 4.0, ("x",))
    b = Advertiser("a", 1.0, 2.0, ("x",))
    assert [x.adv_id for x in sort_advertisers([a, b])] == ["a", "b"]
    assert sort_advertisers([a]) == [a]


def test_sort_equal_ratios_at_different_scales():
    a = Advertiser("b", 0.5, 0.75, ("x",))
    b = Advertiser("a", 4.0, 6.0, ("x",))
    assert [x.adv_id for x in sort_advertisers([a, b])] == ["a", "b"]


def test_sample_size():
    assert rg_sample_size(1000, 0.01) == 47
    assert rg_sample_size(5, 0.01) == 5
    assert rg_sample_size(1000, 1 - 1e-12) == 1
    assert all(1 <= rg_sample_size(n, e) <= n for n in range(1, 300) for e in (0.01, 0.2, 0.9))
    with pytest.raises(ValueError):
        rg_sample_size(0, 0.1)


def test_no_slots_leaves_everyone_unserved():
    inst = exposure_instance([], {"u": {"x": 0.5}}, [Advertiser("a", 1.0, 3.0, ("x",)), Advertiser("b", 1.0, 2.0, ("x",))])
    for algo in HEURISTICS:
        res = solve(inst, SolverConfig(algorithm=algo))
        assert res.allocation.n_allocated() == 0
        assert res.report.total == 5.0


def test_minimal_prefix_matches_brute_force():
    # six slots, each reaching one distinct user; demand is two users' worth
    users = [f"u{i}" for i in range(6)]
    probs = {u: {"x": 1.0} for u in users}
    costs = [3.0, 1.0, 2.0, 1.0, 5.0, 4.0]
    inst = exposure_instance([[u] for u in users], probs, [Advertiser("a", 2.0, 10.0, ("x",))], costs)
    res = bg_solve(inst)
    assert res.allocation.slots_of("a") == ("s1", "s3")
    assert res.report.total == 0.0
    eng = InfluenceEngine(inst)
    best = min(
        (abs(eng.influence(c, ["x"]) - 2.0), sum(costs[int(s[1:])] for s in c))
        for k in range(1, 7) for c in itertools.combinations(inst.slot_ids, k)
    )
    assert best == (0.0, 2.0)


def test_one_step_after_demand_is_met():
    inst = exposure_instance([["u"], ["v"], ["w"]], {u: {"x": 0.9} for u in "uvw"}, [Advertiser("a", 1.0, 1.0, ("x",))])
    res = bg_solve(inst)
    # 0.9 < 1 after one slot, so exactly two slots are taken
    assert len(res.allocation.slots_of("a")) == 2
    assert len(res.trace.steps) == 2


def test_empty_refined_tags_are_skipped_with_warning():
    inst = exposure_instance([["u"]], {"u": {"x": 0.5}}, [Advertiser("a", 1.0, 1.0, ("nobody-likes-this",))])
    res = bg_solve(inst)
    assert res.allocation.n_allocated() == 0
    assert res.trace.warnings and "empty refined tag set" in res.trace.warnings[0]
    assert res.report.total == 1.0


def check_invariants(inst, res, eng):
    verdict = allocation_is_feasible(res.allocation, inst.advertisers, res.tags, eng)
    assert verdict.disjoint
    assert res.allocation.n_allocated() + len(res.leftover) == len(inst.slots)
    assert set(res.allocation.unassigned) == set(res.leftover)
    assert len(res.trace.steps) <= len(inst.slots)


@pytest.mark.parametrize("algo", HEURISTICS)
def test_invariants_on_random_instances(algo):
    rng = np.random.default_rng(hash(algo) % 2**32)
    for _ in range(40):
        inst, _, _ = random_micro(rng, n_adv=3)
        eng = InfluenceEngine(inst)
        res = solve(inst, SolverConfig(algorithm=algo, seed=int(rng.integers(1000)), rls_iters=5), engine=eng)
        check_invariants(inst, res, eng)


@pytest.mark.parametrize("algo", ("bg", "rg"))
def test_no_selection_after_satisfaction(algo, small_nyc):
    res = solve(small_nyc, SolverConfig(algorithm=algo, seed=3))
    by_adv = {}
    for st in res.trace.steps:
        by_adv.setdefault(st.adv_id, []).append(st.remaining)
    for adv, remaining in by_adv.items():
        # demand was unmet before every step except possibly after the last
        assert all(r > 0 for r in remaining[:-1])


def test_round_robin_pointer_cycles_tags(small_nyc):
    res = bg_solve(small_nyc)
    for adv in small_nyc.advertisers:
        tags = res.tags[adv.adv_id]
        steps = [s for s in res.trace.steps if s.adv_id == adv.adv_id]
        assert [s.pointer for s in steps] == [k % len(tags) for k in range(len(steps))]
        assert [s.tag_id for s in steps] == [tags[k % len(tags)] for k in range(len(steps))]


def test_trace_replay_rebuilds_allocation(small_nyc):
    for algo in HEURISTICS:
        res = solve(small_nyc, SolverConfig(algorithm=algo, seed=1, rls_iters=3))
        replay = res.trace.replay([a.adv_id for a in small_nyc.advertisers], small_nyc.slot_ids)
        assert replay == res.allocation


@pytest.mark.parametrize("algo", HEURISTICS)
def test_seeded_determinism(algo, small_nyc):
    cfg = SolverConfig(algorithm=algo, seed=11, rls_iters=5)
    a, b = solve(small_nyc, cfg), solve(small_nyc, cfg)
    assert serialize_allocation(a.allocation, a.report) == serialize_allocation(b.allocation, b.report)


def test_rg_with_full_sample_is_bg(small_nyc):
    bg = bg_solve(small_nyc)
    rg = rg_solve(small_nyc, SolverConfig(algorithm="rg", epsilon=1e-300, seed=5))
    assert rg.allocation == bg.allocation
    assert rg.report.total == bg.report.total
    assert [s.score for s in rg.trace.steps] == [s.score for s in bg.trace.steps]


def test_rg_samples_when_pool_is_large(small_nyc):
    rg = rg_solve(small_nyc, SolverConfig(algorithm="rg", seed=5))
    assert rg.trace.draws > 0


def test_rls_one_iteration_without_improvement_is_rg(small_nyc):
    for seed in range(10):
        cfg = SolverConfig(algorithm="rls", seed=seed, rls_iters=1)
        rls = rls_solve(small_nyc, cfg)
        if rls.info["accepted"] == 0 and not rls.info["extended"]:
            rg = rg_solve(small_nyc, replace(cfg, algorithm="rg"))
            assert rls.allocation == rg.allocation
            assert rls.report.total == rg.report.total
            break
    else:
        pytest.fail("every seed improved on the warm start")


def test_rls_never_worse_than_rg(small_nyc):
    for seed in range(20):
        cfg = SolverConfig(algorithm="rls", seed=seed, rls_iters=10)
        rls = rls_solve(small_nyc, cfg)
        rg = rg_solve(small_nyc, replace(cfg, algorithm="rg"))
        assert rls.info["warm_start"] == rg.allocation
        assert rls.info["warm_start_regret"] == rg.report.total
        assert rls.report.total <= rg.report.total


def test_random_exhausts_small_pool():
    inst = exposure_instance([["u"], ["v"]], {"u": {"x": 0.5}, "v": {"x": 0.5}},
                             [Advertiser("a", 5.0, 1.0, ("x",)), Advertiser("b", 5.0, 1.0, ("x",))])
    res = random_solve(inst, SolverConfig(algorithm="random", seed=4))
    assert res.leftover == ()
    assert res.allocation.slots_of("b") == ()  # input order: a drains the pool first
    assert res.report.entry("a").kind == "unsatisfied"


def test_random_seed_changes_outcome(small_nyc):
    outs = {solve(small_nyc, SolverConfig(algorithm="random", seed=s)).report.total for s in range(5)}
    assert len(outs) > 1


def test_denominator_and_context_options(small_nyc):
    for ctx in ("tag", "full"):
        for den in ("cost", "influence"):
            res = bg_solve(small_nyc, SolverConfig(score_context=ctx, score_denominator=den))
            check_invariants(small_nyc, res, InfluenceEngine(small_nyc))


def test_early_stop_never_overshoots_for_free(small_nyc):
    plain = bg_solve(small_nyc)
    early = bg_solve(small_nyc, SolverConfig(early_stop=True))
    assert len(early.trace.steps) <= len(plain.trace.steps)


def test_zero_cost_slot_is_preferred_when_it_helps():
    inst = exposure_instance([["u"], ["v"]], {"u": {"x": 0.5}, "v": {"x": 0.5}},
                             [Advertiser("a", 0.5, 1.0, ("x",))], costs=[1.0, 0.0])
    res = bg_solve(inst)
    assert res.allocation.slots_of("a") == ("s1",)
    assert math.isinf(res.trace.steps[0].score)


def test_config_validation():
    for bad in (dict(algorithm="nope"), dict(epsilon=0.0), dict(epsilon=1.0), dict(rls_iters=0), dict(delta=1.5),
                dict(omega=1.0), dict(gamma=0.0), dict(score_context="x"), dict(score_denominator="x"), dict(seed=-1)):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_invalid_instance_is_refused():
    inst = exposure_instance([["u"]], {"u": {"x": 0.5}}, [Advertiser("a", -1.0, 1.0, ("x",))])
    with pytest.raises(ValueError, match="demand must be positive"):
        bg_solve(inst)
