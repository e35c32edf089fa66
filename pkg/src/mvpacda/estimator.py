"""Scikit-learn style classifier around the bound-minimizing learner."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .bounds import BoundParams
from .domains import Schema, make_sample
from .learner import minimize_da_bound
from .validation import check_binary_labels, check_Xs
from .voters import build_stump_grid, sign_with_tie, uniform_ensemble, vote_margins


class MultiViewDAClassifier(ClassifierMixin, BaseEstimator):
    """Multi-view majority vote of decision stumps adapted to an unlabeled target.

    Parameters
    ----------
    n_thresholds : int
        Stump thresholds per feature.
    c, alpha : float
        Trade-off constants of the two Catoni-type terms.
    delta : float
        Confidence parameter of the minimized bound.
    max_iter : int
        Exponentiated-gradient iterations.
    eta0 : float
        Initial step size of each backtracking search.
    mode : {"literal", "cross"}
        Reading of the voter-pair expectation.

    Attributes
    ----------
    classes_ : ndarray of shape (2,)
    ensemble_ : PosteriorEnsemble
    trace_ : LearnTrace
    bound_ : float
        Final objective value, the bound without its lambda term.
    """

    def __init__(self, n_thresholds=3, c=1.0, alpha=0.5, delta=0.05, max_iter=100, eta0=1.0,
                 mode="literal"):
        self.n_thresholds = n_thresholds
        self.c = c
        self.alpha = alpha
        self.delta = delta
        self.max_iter = max_iter
        self.eta0 = eta0
        self.mode = mode

    def fit(self, Xs, y, Xt=None):
        """Fit on labeled source views ``Xs`` and unlabeled target views ``Xt``.

        Without ``Xt`` the source views stand in for the target.
        """
        Xs = check_Xs(Xs)
        schema = Schema(len(Xs), [X.shape[1] for X in Xs])
        Xt = Xs if Xt is None else check_Xs(Xt, schema.n_views, schema.dims)
        self.classes_, y_pm = check_binary_labels(y, Xs[0].shape[0])
        S = make_sample(schema, Xs, y_pm)
        T = make_sample(schema, Xt)
        E0 = uniform_ensemble(build_stump_grid(S, self.n_thresholds))
        p = BoundParams(m=S.m, n=T.m, delta=self.delta, c=self.c, alpha=self.alpha)
        self.trace_ = minimize_da_bound(E0, S, T, p, self.max_iter, self.eta0, mode=self.mode)
        self.ensemble_ = self.trace_.ensemble
        self.bound_ = self.trace_.final_objective
        self.schema_ = schema
        return self

    def decision_function(self, Xs):
        """Expected vote ``E_v E_h h(x^v)`` in ``[-1, 1]``; positive favors ``classes_[1]``."""
        check_is_fitted(self, "ensemble_")
        Xs = check_Xs(Xs, self.schema_.n_views, self.schema_.dims)
        return vote_margins(self.ensemble_, Xs)

    def predict(self, Xs):
        margins = self.decision_function(Xs)
        return self.classes_[(sign_with_tie(margins) == 1).astype(int)]
