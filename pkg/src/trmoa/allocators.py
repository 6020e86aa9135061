"""Slot allocation heuristics: round-robin greedy, sampled greedy, randomized
local search and a uniform random baseline.

All solvers share one loop. Advertisers are served in order; each one cycles
a pointer over its refined tags and takes one slot per step, filing it under
the current tag, until its influence under the refined tag set reaches its
demand or the pool is empty. Slots leave the pool when taken, so the result
is always disjoint.

Randomness comes from one ``numpy.random.RandomState`` (MT19937, whose
stream numpy keeps stable across releases) per solve, seeded from the
config. RLS draws its warm start first, so its warm start is exactly the
RG result for the same seed.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from ._validation import (
    check_choice,
    check_instance,
    check_open_unit,
    check_positive,
    check_positive_int,
    check_unit_interval,
)
from .influence import DEFAULT_GAMMA, InfluenceAccumulator, InfluenceEngine
from .model import Advertiser, Allocation, Instance, RegretReport
from .regret import DEFAULT_DELTA, total_regret
from .tags import DEFAULT_OMEGA, aits

log = logging.getLogger(__name__)

ALGORITHMS = ("bg", "rg", "rls", "random", "oracle")
SCORE_CONTEXTS = ("tag", "full")
SCORE_DENOMINATORS = ("cost", "influence")


@dataclass(frozen=True)
class SolverConfig:
    """Everything a solve depends on besides the instance.

    ``score_context`` picks the tag set used to price a candidate slot:
    ``"tag"`` uses only the tag under the round-robin pointer, ``"full"`` the
    advertiser's whole refined set (the default; tag-only pricing
    overshoots because it sees a fraction of the influence the demand check
    counts). The demand check always uses the full
    refined set. ``score_denominator`` divides the regret reduction by the
    slot cost or by its tag-agnostic influence.
    """

    algorithm: str = "bg"
    epsilon: float = 0.01
    rls_iters: int = 20
    seed: int = 0
    delta: float = DEFAULT_DELTA
    omega: float = DEFAULT_OMEGA
    gamma: float = DEFAULT_GAMMA
    score_context: str = "full"
    score_denominator: str = "cost"
    early_stop: bool = False

    def __post_init__(self):
        check_choice("algorithm", self.algorithm, ALGORITHMS)
        check_open_unit("epsilon", self.epsilon)
        check_positive_int("rls_iters", self.rls_iters)
        check_unit_interval("delta", self.delta)
        check_open_unit("omega", self.omega)
        check_positive("gamma", self.gamma)
        check_choice("score_context", self.score_context, SCORE_CONTEXTS)
        check_choice("score_denominator", self.score_denominator, SCORE_DENOMINATORS)
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")


@dataclass(frozen=True)
class TraceStep:
    adv_id: str
    pointer: int
    tag_id: str
    slot_id: str
    score: float
    remaining: float  # demand minus achieved influence after this step


@dataclass
class RunTrace:
    steps: list[TraceStep] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    wall_time: float = 0.0
    draws: int = 0

    def replay(self, adv_ids: Iterable[str], slot_ids: Iterable[str]) -> Allocation:
        """Rebuild the allocation these steps produce from an empty start."""
        buckets: dict[str, dict[str, list[str]]] = {a: {} for a in adv_ids}
        taken = set()
        for st in self.steps:
            buckets[st.adv_id].setdefault(st.tag_id, []).append(st.slot_id)
            taken.add(st.slot_id)
        return Allocation(
            {a: {t: tuple(v) for t, v in b.items()} for a, b in buckets.items()},
            tuple(sorted(set(slot_ids) - taken)),
        )


class SolveResult(NamedTuple):
    allocation: Allocation
    report: RegretReport
    trace: RunTrace
    leftover: tuple[str, ...]
    tags: dict[str, tuple[str, ...]]
    info: dict


def sort_advertisers(book: Iterable[Advertiser]) -> list[Advertiser]:
    """Descending payment/demand ratio, ties by ascending adv_id (exact arithmetic)."""
    return sorted(book, key=lambda a: (-(Fraction(a.payment) / Fraction(a.demand)), a.adv_id))


def rg_sample_size(remaining: int, epsilon: float) -> int:
    """Candidates drawn per sampled-greedy step: ``ceil(remaining / k * ln(1/eps))``
    with ``k = ceil(0.1 * remaining)``, clamped to ``[1, remaining]``."""
    if remaining < 1:
        raise ValueError(f"remaining must be >= 1, got {remaining}")
    k = max(1, math.ceil(0.10 * remaining))
    size = math.ceil(remaining / k * math.log(1.0 / epsilon))
    return max(1, min(remaining, size))


def refine_tags(instance: Instance, engine: InfluenceEngine, omega: float) -> dict[str, tuple[str, ...]]:
    return {a.adv_id: aits(a.tags, engine.affinity, omega) for a in instance.advertisers}


class _Problem:
    """Per-solve constants: refined tags, per-user probabilities, scoring inputs."""

    def __init__(self, instance: Instance, engine: InfluenceEngine, config: SolverConfig, tags=None):
        self.instance = instance
        self.engine = engine
        self.config = config
        self.delta = config.delta
        self.advertisers = list(instance.advertisers)
        self.tags = tags if tags is not None else refine_tags(instance, engine, config.omega)
        self.probs = {a.adv_id: engine.probs(self.tags[a.adv_id]) for a in self.advertisers}
        self._tag_probs: dict[str, list[float]] = {}
        if config.score_denominator == "cost":
            self.denominator = [s.cost for s in instance.slots]
        else:
            self.denominator = [s.base_influence for s in instance.slots]
        self.n_slots = len(instance.slots)
        self.slot_ids = instance.slot_ids

    def tag_probs(self, tag: str) -> list[float]:
        p = self._tag_probs.get(tag)
        if p is None:
            p = self._tag_probs[tag] = self.engine.probs([tag])
        return p


class _Pool:
    """Remaining slots with O(1) removal and uniform sampling."""

    def __init__(self, n: int):
        self.items = list(range(n))
        self.where = list(range(n))
        self.alive = [True] * n

    def copy(self) -> "_Pool":
        other = _Pool.__new__(_Pool)
        other.items, other.where, other.alive = list(self.items), list(self.where), list(self.alive)
        return other

    def __len__(self):
        return len(self.items)

    def remove(self, s: int) -> None:
        i = self.where[s]
        last = self.items[-1]
        self.items[i] = last
        self.where[last] = i
        self.items.pop()
        self.alive[s] = False

    def ascending(self) -> list[int]:
        alive = self.alive
        return [s for s in range(len(alive)) if alive[s]]


class _State:
    """One allocation under construction."""

    def __init__(self, problem: _Problem):
        self.problem = problem
        self.pool = _Pool(problem.n_slots)
        self.acc = {a.adv_id: InfluenceAccumulator(problem.engine.members, problem.probs[a.adv_id]) for a in problem.advertisers}
        self.buckets: dict[str, dict[str, list[int]]] = {a.adv_id: {} for a in problem.advertisers}
        self.pointer = {a.adv_id: 0 for a in problem.advertisers}
        self.steps: list[TraceStep] = []
        self.warnings: list[str] = []

    def copy(self) -> "_State":
        other = _State.__new__(_State)
        other.problem = self.problem
        other.pool = self.pool.copy()
        other.acc = {k: v.copy() for k, v in self.acc.items()}
        other.buckets = {a: {t: list(v) for t, v in b.items()} for a, b in self.buckets.items()}
        other.pointer = dict(self.pointer)
        other.steps = list(self.steps)
        other.warnings = list(self.warnings)
        return other

    def assign(self, adv: Advertiser, tag: str, s: int, score: float) -> None:
        acc = self.acc[adv.adv_id]
        acc.add(s)
        self.pool.remove(s)
        self.buckets[adv.adv_id].setdefault(tag, []).append(s)
        self.steps.append(
            TraceStep(adv.adv_id, self.pointer[adv.adv_id], tag, self.problem.slot_ids[s], score, adv.demand - acc.total)
        )

    def regret(self) -> float:
        d = self.problem.delta
        return math.fsum(_regret(self.acc[a.adv_id].total, a.demand, a.payment, d) for a in self.problem.advertisers)

    def allocation(self) -> Allocation:
        ids = self.problem.slot_ids
        buckets = {a: {t: tuple(ids[s] for s in v) for t, v in b.items()} for a, b in self.buckets.items()}
        return Allocation(buckets, self.leftover())

    def leftover(self) -> tuple[str, ...]:
        ids = self.problem.slot_ids
        return tuple(ids[s] for s in self.pool.ascending())


def _regret(x: float, sigma: float, u: float, delta: float) -> float:
    if sigma > x:
        return u * (1.0 - delta * x / sigma)
    return u * (x - sigma) / sigma


class _Rng:
    """RandomState wrapper that counts draws for the trace."""

    def __init__(self, seed: int):
        self.rs = np.random.RandomState(np.random.MT19937(np.random.SeedSequence(int(seed))))
        self.draws = 0

    def index(self, n: int) -> int:
        self.draws += 1
        return int(self.rs.randint(n))

    def subset(self, n: int, k: int) -> np.ndarray:
        self.draws += 1
        return self.rs.choice(n, size=k, replace=False)


def _best_slot(state: _State, adv: Advertiser, tag: str, candidates: Sequence[int]) -> tuple[int, float]:
    """Argmax of regret reduction per unit denominator; ties to the lowest slot index."""
    prob = state.problem
    acc = state.acc[adv.adv_id]
    if prob.config.score_context == "tag":
        probs = prob.tag_probs(tag)
        base = acc.value(probs)
    else:
        probs = None
        base = acc.total
    sigma, u, delta = adv.demand, adv.payment, prob.delta
    before = _regret(base, sigma, u, delta)
    den = prob.denominator
    best, best_score = -1, -math.inf
    for s in candidates:
        x = base + acc.marginal_gain(s, probs)
        after = u * (1.0 - delta * x / sigma) if sigma > x else u * (x - sigma) / sigma
        red = before - after
        d = den[s]
        if d > 0:
            score = red / d
        else:
            score = math.inf if red > 0 else (-math.inf if red < 0 else 0.0)
        if score > best_score or best < 0:
            best, best_score = s, score
    return best, best_score


def _serve(state: _State, order: Sequence[Advertiser], rng: _Rng | None, mode: str) -> None:
    """Run the per-advertiser loop.

    ``mode`` is ``"greedy"`` (scan the whole pool), ``"sample"`` (scan a random
    subset sized by :func:`rg_sample_size`) or ``"random"`` (uniform pick).
    """
    prob = state.problem
    cfg = prob.config
    pool = state.pool
    for adv in order:
        tags = prob.tags[adv.adv_id]
        if not tags:
            state.warnings.append(f"advertiser {adv.adv_id}: empty refined tag set, skipped")
            continue
        acc = state.acc[adv.adv_id]
        while acc.total < adv.demand and len(pool):
            k = state.pointer[adv.adv_id]
            tag = tags[k]
            if mode == "random":
                s, score = pool.items[rng.index(len(pool))], math.nan
            else:
                n = len(pool)
                if mode == "sample" and rg_sample_size(n, cfg.epsilon) < n:
                    picks = rng.subset(n, rg_sample_size(n, cfg.epsilon))
                    candidates = sorted(pool.items[j] for j in picks)
                else:
                    candidates = pool.ascending()
                s, score = _best_slot(state, adv, tag, candidates)
                if cfg.early_stop:
                    after = _regret(acc.total + acc.marginal_gain(s), adv.demand, adv.payment, prob.delta)
                    if after > _regret(acc.total, adv.demand, adv.payment, prob.delta):
                        break
            state.assign(adv, tag, s, score)
            state.pointer[adv.adv_id] = (k + 1) % len(tags)


def _finish(state: _State, rng: _Rng | None, t0: float, info=None) -> SolveResult:
    prob = state.problem
    alloc = state.allocation()
    report = total_regret(alloc, prob.instance.advertisers, prob.tags, prob.delta, prob.engine)
    trace = RunTrace(state.steps, state.warnings, time.perf_counter() - t0, rng.draws if rng else 0)
    for w in state.warnings:
        log.warning(w)
    return SolveResult(alloc, report, trace, state.leftover(), dict(prob.tags), info or {})


def _setup(instance, config, engine, tags):
    check_instance(instance)
    if engine is None or engine.gamma != config.gamma:
        engine = InfluenceEngine(instance, config.gamma)
    return _Problem(instance, engine, config, tags)


def bg_solve(instance: Instance, config: SolverConfig = SolverConfig(), engine=None, tags=None) -> SolveResult:
    t0 = time.perf_counter()
    prob = _setup(instance, config, engine, tags)
    state = _State(prob)
    _serve(state, sort_advertisers(prob.advertisers), None, "greedy")
    return _finish(state, None, t0)


def rg_solve(instance: Instance, config: SolverConfig = SolverConfig(), engine=None, tags=None) -> SolveResult:
    t0 = time.perf_counter()
    prob = _setup(instance, config, engine, tags)
    rng = _Rng(config.seed)
    state = _State(prob)
    _serve(state, sort_advertisers(prob.advertisers), rng, "sample")
    return _finish(state, rng, t0)


def rls_solve(instance: Instance, config: SolverConfig = SolverConfig(), engine=None, tags=None) -> SolveResult:
    """Sampled-greedy warm start, then ``rls_iters`` uniform random rebuilds;
    a rebuild replaces the incumbent only if its total regret is strictly lower.
    Leftover slots finally go through the sampled-greedy loop again (same
    order, same refined tags), kept only if that lowers total regret."""
    t0 = time.perf_counter()
    prob = _setup(instance, config, engine, tags)
    rng = _Rng(config.seed)
    order = sort_advertisers(prob.advertisers)

    best = _State(prob)
    _serve(best, order, rng, "sample")
    warm_regret = best.regret()
    warm_alloc = best.allocation()
    best_regret = warm_regret
    accepted = 0
    for _ in range(config.rls_iters):
        cand = _State(prob)
        _serve(cand, order, rng, "random")
        r = cand.regret()
        if r < best_regret:
            best, best_regret = cand, r
            accepted += 1

    extended = False
    if len(best.pool):
        ext = best.copy()
        _serve(ext, order, rng, "sample")
        ext.warnings = best.warnings
        if ext.regret() < best_regret:
            best, best_regret, extended = ext, ext.regret(), True

    info = {"warm_start_regret": warm_regret, "warm_start": warm_alloc, "accepted": accepted, "extended": extended}
    return _finish(best, rng, t0, info)


def random_solve(instance: Instance, config: SolverConfig = SolverConfig(), engine=None, tags=None) -> SolveResult:
    """Uniform random baseline: advertisers in input order, slots drawn uniformly."""
    t0 = time.perf_counter()
    prob = _setup(instance, config, engine, tags)
    rng = _Rng(config.seed)
    state = _State(prob)
    _serve(state, prob.advertisers, rng, "random")
    return _finish(state, rng, t0)


def oracle_solve(instance: Instance, config: SolverConfig = SolverConfig(), engine=None, tags=None) -> SolveResult:
    from .oracle import exhaustive_allocation

    t0 = time.perf_counter()
    prob = _setup(instance, config, engine, tags)
    alloc, nodes = exhaustive_allocation(prob.slot_ids, prob.advertisers, prob.tags, prob.engine, prob.delta)
    report = total_regret(alloc, instance.advertisers, prob.tags, prob.delta, prob.engine)
    trace = RunTrace(wall_time=time.perf_counter() - t0)
    return SolveResult(alloc, report, trace, alloc.unassigned, dict(prob.tags), {"nodes": nodes})


SOLVERS = {"bg": bg_solve, "rg": rg_solve, "rls": rls_solve, "random": random_solve, "oracle": oracle_solve}


def solve(instance: Instance, config: SolverConfig = SolverConfig(), engine=None, tags=None) -> SolveResult:
    return SOLVERS[config.algorithm](instance, config, engine=engine, tags=tags)


def with_algorithm(config: SolverConfig, algorithm: str) -> SolverConfig:
    return replace(config, algorithm=algorithm)
