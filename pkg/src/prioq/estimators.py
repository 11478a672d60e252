"""scikit-learn style wrappers around the closed forms, the oracle and the fitter.

Hyperparameters are stored verbatim by ``__init__`` and validated in
``fit``; fitted state ends in an underscore.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import asymptotics as asy
from .exceptions import DimensionMismatch
from .model import new_params
from .oracle import Direction, Method, fit_sequence, solve_truncated


def _pairs(X):
    X = check_array(X, dtype=np.int64, ensure_2d=True)
    if X.shape[1] != 2:
        raise DimensionMismatch(f"expected (n, 2) index pairs, got shape {X.shape}")
    if (X < 0).any():
        raise DimensionMismatch("indices must be nonnegative")
    return X


class PriorityTailModel(BaseEstimator):
    """Closed-form tail laws in one direction.

    ``predict`` takes rows ``(fixed_index, n)``.  For ``direction="low"``
    the fixed index is the high-priority count i and n = j; for
    ``direction="high"`` it is j and n = i.
    """

    def __init__(self, p=0.1, q=0.1, mu_h=0.45, mu_l=0.35, direction="low"):
        self.p = p
        self.q = q
        self.mu_h = mu_h
        self.mu_l = mu_l
        self.direction = direction

    def fit(self, X=None, y=None):
        self.params_ = new_params(self.p, self.q, self.mu_h, self.mu_l)
        self.direction_ = Direction(self.direction)
        if self.direction_ is Direction.LOW:
            self.regime_ = asy.classify_regime(self.params_)
        else:
            self.params_.require_stable()
            self.regime_ = None
        self._laws = {}
        return self

    def law(self, fixed_index: int) -> asy.TailAsymptotics:
        check_is_fitted(self, "params_")
        k = int(fixed_index)
        if k not in self._laws:
            if self.direction_ is Direction.LOW:
                self._laws[k] = asy.low_joint_asym(self.params_, k, self.regime_)
            else:
                self._laws[k] = asy.high_joint_asym(self.params_, k)
        return self._laws[k]

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = _pairs(X)
        return np.array([self.law(k).predict(float(n)) for k, n in X])


class StationaryOracle(BaseEstimator):
    """Truncated-chain stationary distribution; ``predict`` looks up pi_{i,j}."""

    def __init__(self, p=0.1, q=0.1, mu_h=0.45, mu_l=0.35, Nh=400, Nl=400, method="direct"):
        self.p = p
        self.q = q
        self.mu_h = mu_h
        self.mu_l = mu_l
        self.Nh = Nh
        self.Nl = Nl
        self.method = method

    def fit(self, X=None, y=None):
        params = new_params(self.p, self.q, self.mu_h, self.mu_l)
        self.grid_ = solve_truncated(params, int(self.Nh), int(self.Nl), Method(self.method))
        self.params_ = params
        return self

    def predict(self, X):
        check_is_fitted(self, "grid_")
        X = _pairs(X)
        if (X[:, 0] > self.grid_.Nh).any() or (X[:, 1] > self.grid_.Nl).any():
            raise DimensionMismatch("index pair outside the truncation box")
        return self.grid_.values[X[:, 0], X[:, 1]]


class TailFit(BaseEstimator):
    """Median fit of ``y ~ constant * x**power * rate**x`` on consecutive x."""

    def __init__(self, power=0.0, rate=None):
        self.power = power
        self.rate = rate

    def fit(self, X, y):
        x = check_array(np.asarray(X).reshape(-1, 1), dtype=np.float64).ravel()
        y = check_array(np.asarray(y, dtype=float).reshape(-1, 1)).ravel()
        if x.size != y.size:
            raise DimensionMismatch(f"{x.size} indices but {y.size} values")
        order = np.argsort(x)
        res = fit_sequence(y[order], x[order], float(self.power), self.rate)
        self.rate_ = res.rate
        self.constant_ = res.constant
        self.window_ = res.window
        self.max_deviation_ = res.max_deviation
        return self

    def predict(self, X):
        check_is_fitted(self, "rate_")
        x = check_array(np.asarray(X).reshape(-1, 1), dtype=np.float64).ravel()
        return self.constant_ * x**self.power * self.rate_**x
