"""Estimator-style front end to the solvers.

Each allocator takes its knobs in ``__init__`` (so ``get_params`` /
``set_params`` / ``clone`` work) and is fitted on an :class:`Instance`::

    >>> est = GreedyAllocator(delta=0.5).fit(instance)   # doctest: +SKIP
    >>> est.report_.total                                  # doctest: +SKIP

``score`` returns negated total regret, so larger is better as usual.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .allocators import SolverConfig, solve
from .influence import DEFAULT_GAMMA, InfluenceEngine
from .model import Instance
from .regret import DEFAULT_DELTA, total_regret
from .tags import DEFAULT_OMEGA


class _Allocator(BaseEstimator):
    _algorithm = ""

    def _config(self) -> SolverConfig:
        params = self.get_params()
        return SolverConfig(algorithm=self._algorithm, **params)

    def fit(self, instance: Instance, y=None, engine=None):
        """Allocate the slots of ``instance``.

        Sets ``allocation_``, ``report_``, ``trace_``, ``leftover_``,
        ``tags_`` (refined tag set per advertiser) and ``info_``.
        """
        self.config_ = self._config()
        res = solve(instance, self.config_, engine=engine)
        self.allocation_ = res.allocation
        self.report_ = res.report
        self.trace_ = res.trace
        self.leftover_ = res.leftover
        self.tags_ = res.tags
        self.info_ = res.info
        self.n_advertisers_ = len(instance.advertisers)
        return self

    def score(self, instance: Instance, y=None, engine=None) -> float:
        """Negated total regret of the fitted allocation, priced on ``instance``."""
        check_is_fitted(self, "allocation_")
        if engine is None:
            engine = InfluenceEngine(instance, self.config_.gamma)
        return -total_regret(self.allocation_, instance.advertisers, self.tags_, self.config_.delta, engine).total


class GreedyAllocator(_Allocator):
    """Round-robin greedy (BG): every step scans the whole remaining pool.

    Parameters
    ----------
    delta : float, default=0.5
        Penalty ratio in [0, 1].
    omega : float, default=0.01
        Tag-selection stopping fraction.
    gamma : float, default=100.0
        Exposure radius in meters.
    score_context : {"full", "tag"}, default="full"
    score_denominator : {"cost", "influence"}, default="cost"
    early_stop : bool, default=False
        Stop serving an advertiser when its best slot would raise regret.
    """

    _algorithm = "bg"

    def __init__(self, delta=DEFAULT_DELTA, omega=DEFAULT_OMEGA, gamma=DEFAULT_GAMMA,
                 score_context="full", score_denominator="cost", early_stop=False):
        self.delta = delta
        self.omega = omega
        self.gamma = gamma
        self.score_context = score_context
        self.score_denominator = score_denominator
        self.early_stop = early_stop


class RandomizedGreedyAllocator(_Allocator):
    """Sampled greedy (RG): each step scans a random subset of the pool.

    ``epsilon`` sets the subset size, about ``10 * ln(1 / epsilon)`` slots.
    """

    _algorithm = "rg"

    def __init__(self, epsilon=0.01, seed=0, delta=DEFAULT_DELTA, omega=DEFAULT_OMEGA, gamma=DEFAULT_GAMMA,
                 score_context="full", score_denominator="cost", early_stop=False):
        self.epsilon = epsilon
        self.seed = seed
        self.delta = delta
        self.omega = omega
        self.gamma = gamma
        self.score_context = score_context
        self.score_denominator = score_denominator
        self.early_stop = early_stop


class LocalSearchAllocator(_Allocator):
    """Randomized local search (RLS) warm-started from sampled greedy.

    After fitting, ``warm_start_report_`` prices the warm start; the fitted
    ``report_`` is never worse.
    """

    _algorithm = "rls"

    def __init__(self, rls_iters=20, epsilon=0.01, seed=0, delta=DEFAULT_DELTA, omega=DEFAULT_OMEGA,
                 gamma=DEFAULT_GAMMA, score_context="full", score_denominator="cost", early_stop=False):
        self.rls_iters = rls_iters
        self.epsilon = epsilon
        self.seed = seed
        self.delta = delta
        self.omega = omega
        self.gamma = gamma
        self.score_context = score_context
        self.score_denominator = score_denominator
        self.early_stop = early_stop

    def fit(self, instance: Instance, y=None, engine=None):
        super().fit(instance, y, engine)
        engine = engine if engine is not None and engine.gamma == self.gamma else InfluenceEngine(instance, self.gamma)
        self.warm_start_ = self.info_["warm_start"]
        self.warm_start_report_ = total_regret(self.warm_start_, instance.advertisers, self.tags_, self.delta, engine)
        return self


class RandomAllocator(_Allocator):
    """Uniform random baseline."""

    _algorithm = "random"

    def __init__(self, seed=0, delta=DEFAULT_DELTA, omega=DEFAULT_OMEGA, gamma=DEFAULT_GAMMA):
        self.seed = seed
        self.delta = delta
        self.omega = omega
        self.gamma = gamma


class ExhaustiveAllocator(_Allocator):
    """Exact minimum-regret allocation; refuses instances over 12 slots or 3 advertisers."""

    _algorithm = "oracle"

    def __init__(self, delta=DEFAULT_DELTA, omega=DEFAULT_OMEGA, gamma=DEFAULT_GAMMA):
        self.delta = delta
        self.omega = omega
        self.gamma = gamma


ESTIMATORS = {
    "bg": GreedyAllocator,
    "rg": RandomizedGreedyAllocator,
    "rls": LocalSearchAllocator,
    "random": RandomAllocator,
    "oracle": ExhaustiveAllocator,
}
