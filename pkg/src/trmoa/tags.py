"""Adaptive influential tag selection.

Greedy over tags with the user-level objective ``F(T) = sum_u Pr(u|T)``: add
the tag with the largest marginal gain until that gain drops below
``omega * F(T)``. Ties go to the lowest column (lowest tag id).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_open_unit

DEFAULT_OMEGA = 0.01


def greedy_tag_order(probs: np.ndarray, omega: float = DEFAULT_OMEGA) -> tuple[list[int], list[float]]:
    """Selected columns of a users x tags probability matrix, in pick order, with their gains."""
    n_users, n_tags = probs.shape
    q = np.ones(n_users)  # per-user prod(1 - Pr(u|x)) over picked tags
    remaining = np.ones(n_tags, dtype=bool)
    current = 0.0
    order, gains = [], []
    while remaining.any():
        g = q @ probs
        g[~remaining] = -np.inf
        best = int(np.argmax(g))
        # the explicit <= 0 stop keeps the loop finite when F(T) == 0
        if g[best] <= 0.0 or g[best] < omega * current:
            break
        order.append(best)
        gains.append(float(g[best]))
        remaining[best] = False
        q = q * (1.0 - probs[:, best])
        current = float(np.sum(1.0 - q))
    return order, gains


class AdaptiveTagSelector(SelectorMixin, BaseEstimator):
    """Select influential tag columns from a users x tags affinity matrix.

    Parameters
    ----------
    omega : float, default=0.01
        Stopping fraction in (0, 1): selection ends once the best marginal
        gain is below ``omega`` times the influence already reached.

    Attributes
    ----------
    order_ : list of int
        Selected columns in the order they were picked.
    gains_ : list of float
        Marginal gain of each pick; non-increasing.
    support_ : ndarray of bool
    """

    def __init__(self, omega: float = DEFAULT_OMEGA):
        self.omega = omega

    def fit(self, X, y=None):
        check_open_unit("omega", self.omega)
        X = check_array(X, dtype=float, ensure_min_features=0, ensure_min_samples=0)
        if X.size and (X.min() < 0.0 or X.max() > 1.0):
            raise ValueError("affinity probabilities must lie in [0, 1]")
        self.n_features_in_ = X.shape[1]
        self.order_, self.gains_ = greedy_tag_order(X, self.omega)
        self.support_ = np.zeros(X.shape[1], dtype=bool)
        self.support_[self.order_] = True
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_")
        return self.support_


def aits(candidate_tags: Sequence[str], table, omega: float = DEFAULT_OMEGA) -> tuple[str, ...]:
    """Refined tag set for one advertiser, in insertion order.

    ``table`` is an :class:`~trmoa.influence.AffinityTable`. Candidate tags
    nobody has an affinity for cannot be picked.
    """
    check_open_unit("omega", omega)
    tags = sorted(set(candidate_tags))
    known = [t for t in tags if t in table.tag_index]
    if not known:
        return ()
    X = table.matrix[:, [table.tag_index[t] for t in known]]
    order, _ = greedy_tag_order(X, omega)
    return tuple(known[j] for j in order)
