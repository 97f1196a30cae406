"""scikit-learn compatible estimators.

The estimators normalize columns internally (unit empirical second
moment, no centering) and report ``coef_`` on the caller's scale. No
intercept is fitted: add a column of ones to ``X`` if one is wanted.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .certify import check_kkt
from .core import Dataset
from .penalty import (
    Algorithm1Params,
    PenaltyKind,
    PenaltyScheme,
    lasso_scheme,
    run_algorithm1,
    symmetric_scheme,
)
from .postsel import ols_post
from .solvers import SolverOptions, fit


class _SparseLinearBase(RegressorMixin, BaseEstimator):
    def _solver_options(self, warm_start=None):
        return SolverOptions(tol=self.tol, max_sweeps=self.max_sweeps, method=self.method,
                             warm_start=warm_start)

    def _store(self, dataset, scheme, result):
        self.dataset_ = dataset
        self.scheme_ = scheme
        self.fit_result_ = result
        beta = result.beta
        if self.post:
            self.penalized_coef_ = dataset.to_raw_scale(beta)
            beta = ols_post(dataset, result.support).beta
        self.coef_normalized_ = beta
        self.coef_ = dataset.to_raw_scale(beta)
        self.support_ = np.flatnonzero(beta)
        self.intercept_ = 0.0
        self.n_iter_ = result.iterations
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return X @ self.coef_


class SqrtLasso(_SparseLinearBase):
    """Square-root lasso with pivotal, self-tuned penalty.

    Parameters
    ----------
    penalty : {'algorithm1', 'symmetric', 'fixed'}, default='algorithm1'
        ``'algorithm1'`` iterates heteroskedasticity-adaptive loadings;
        ``'symmetric'`` uses the heavy-tail choice (max absolute column
        entries); ``'fixed'`` uses ``lam`` and ``loadings`` as given.
    lam : float, optional
        Penalty level for ``penalty='fixed'``.
    loadings : array-like, optional
        Loadings for ``penalty='fixed'`` (defaults to ones).
    alpha, c, u_n, w : float
        Penalty parameters; ``None`` for ``alpha``/``u_n`` means
        ``0.05/log n`` and ``0.1/log n``.
    max_loading_iter, loading_tol : int, float
        Caps for the loading iteration.
    loading_residuals : {'sqrt_lasso', 'post_ols'}
        Residuals used to refine loadings.
    post : bool, default=False
        Refit least squares on the selected support.
    method : {'cd', 'fo'}
    tol, max_sweeps
        Solver controls.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    coef_normalized_ : ndarray
        Coefficients on the normalized design.
    support_ : ndarray
    scheme_ : PenaltyScheme
    trace_ : LoadingTrace or None
    fit_result_ : FitResult
    """

    def __init__(self, penalty="algorithm1", lam=None, loadings=None, alpha=None, c=1.01, u_n=None,
                 w=2.0, max_loading_iter=15, loading_tol=1e-4, loading_residuals="sqrt_lasso",
                 post=False, method="cd", tol=1e-10, max_sweeps=10_000):
        self.penalty = penalty
        self.lam = lam
        self.loadings = loadings
        self.alpha = alpha
        self.c = c
        self.u_n = u_n
        self.w = w
        self.max_loading_iter = max_loading_iter
        self.loading_tol = loading_tol
        self.loading_residuals = loading_residuals
        self.post = post
        self.method = method
        self.tol = tol
        self.max_sweeps = max_sweeps

    def _scheme(self, dataset):
        self.trace_ = None
        if self.penalty == "fixed":
            if self.lam is None:
                raise ValueError("penalty='fixed' needs lam")
            loadings = np.ones(dataset.p) if self.loadings is None else self.loadings
            return PenaltyScheme(self.lam, loadings, PenaltyKind.CUSTOM)
        if self.penalty == "symmetric":
            return symmetric_scheme(dataset, alpha=self.alpha, c=self.c, u_n=self.u_n)
        if self.penalty == "algorithm1":
            if self.loading_residuals not in ("sqrt_lasso", "post_ols"):
                raise ValueError("loading_residuals must be 'sqrt_lasso' or 'post_ols'")
            params = Algorithm1Params(alpha=self.alpha, c=self.c, u_n=self.u_n, w=self.w,
                                      max_iter=self.max_loading_iter, tol=self.loading_tol,
                                      use_post_ols=self.loading_residuals == "post_ols")
            scheme, self.trace_ = run_algorithm1(
                dataset, params,
                lambda ds, sch, warm: fit(ds, sch, self._solver_options(warm)))
            return scheme
        raise ValueError(f"unknown penalty {self.penalty!r}")

    def fit(self, X, y):
        X, y = validate_data(self, X, y, reset=True, y_numeric=True)
        dataset = Dataset.from_raw(X, y)
        scheme = self._scheme(dataset)
        return self._store(dataset, scheme, fit(dataset, scheme, self._solver_options()))

    def certificate(self, tol=1e-6):
        """Dual optimality certificate of the penalized fit."""
        check_is_fitted(self, "fit_result_")
        return check_kkt(self.fit_result_, self.dataset_, self.scheme_, tol=tol)


class KnownSigmaLasso(_SparseLinearBase):
    """Lasso with the classical level ``2 c sigma sqrt(n) Phi^-1(1 - alpha/2p)``.

    Needs the noise level ``sigma``; included as the infeasible benchmark.
    """

    def __init__(self, sigma=1.0, alpha=0.05, c=1.1, post=False, method="cd", tol=1e-10,
                 max_sweeps=10_000):
        self.sigma = sigma
        self.alpha = alpha
        self.c = c
        self.post = post
        self.method = method
        self.tol = tol
        self.max_sweeps = max_sweeps

    def fit(self, X, y):
        X, y = validate_data(self, X, y, reset=True, y_numeric=True)
        dataset = Dataset.from_raw(X, y)
        scheme = lasso_scheme(dataset.n, dataset.p, self.sigma, alpha=self.alpha, c=self.c)
        return self._store(dataset, scheme, fit(dataset, scheme, self._solver_options()))
