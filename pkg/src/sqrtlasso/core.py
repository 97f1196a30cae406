"""Domain types and the empirical-moment primitives used throughout.

Every empirical average here is a plain ``1/n`` mean. Designs are normalized
so that each column has unit empirical second moment; an intercept, if
wanted, is simply a column of ones and is already normalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch, IdenticallyZeroColumn, InvalidParameter


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def normalize_design(raw_x):
    """Rescale columns to unit empirical second moment.

    Returns
    -------
    x : ndarray, shape (n, p)
        Normalized design.
    col_scales : ndarray, shape (p,)
        Positive divisors, ``col_scales[j] = sqrt(mean(raw_x[:, j] ** 2))``.
    """
    raw_x = np.asarray(raw_x, dtype=float)
    if raw_x.ndim != 2:
        raise DimensionMismatch(f"design must be 2-D, got shape {raw_x.shape}")
    if not np.all(np.isfinite(raw_x)):
        raise InvalidParameter("design contains non-finite values")
    scales = np.sqrt(np.mean(raw_x**2, axis=0))
    zero = np.flatnonzero(scales == 0.0)
    if zero.size:
        raise IdenticallyZeroColumn(int(zero[0]))
    x = raw_x / scales
    # a second pass removes the last-ulp drift so normalization is idempotent
    second = np.sqrt(np.mean(x**2, axis=0))
    x = x / second
    return x, scales * second


@dataclass(frozen=True)
class Dataset:
    """Response plus normalized design.

    Use :meth:`from_raw` to build one from unnormalized data.
    """

    y: np.ndarray
    x: np.ndarray
    col_scales: np.ndarray

    def __post_init__(self):
        y = _frozen(self.y).reshape(-1)
        x = _frozen(self.x)
        scales = _frozen(self.col_scales).reshape(-1)
        if x.ndim != 2:
            raise DimensionMismatch("design must be 2-D")
        n, p = x.shape
        if n < 1 or p < 1:
            raise DimensionMismatch("design must have n >= 1 and p >= 1")
        if y.shape[0] != n:
            raise DimensionMismatch(f"y has {y.shape[0]} entries, design has {n} rows")
        if scales.shape[0] != p or np.any(scales <= 0):
            raise InvalidParameter("col_scales must be p positive reals")
        if not np.all(np.isfinite(y)):
            raise InvalidParameter("response contains non-finite values")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "col_scales", scales)

    @classmethod
    def from_raw(cls, raw_x, y):
        x, scales = normalize_design(raw_x)
        return cls(y=y, x=x, col_scales=scales)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    def with_response(self, y):
        return Dataset(y=y, x=self.x, col_scales=self.col_scales)

    def to_raw_scale(self, beta):
        """Map coefficients on the normalized design back to raw columns."""
        return np.asarray(beta, dtype=float) / self.col_scales

    def from_raw_scale(self, beta_raw):
        return np.asarray(beta_raw, dtype=float) * self.col_scales


@dataclass(frozen=True)
class FitResult:
    beta: np.ndarray
    q_hat: float
    objective: float
    iterations: int
    converged: bool
    method: str = "cd"
    provenance: str = "sqrt_lasso"
    support: np.ndarray = field(init=False)

    def __post_init__(self):
        beta = _frozen(self.beta)
        object.__setattr__(self, "beta", beta)
        support = np.flatnonzero(beta != 0.0)
        support.setflags(write=False)
        object.__setattr__(self, "support", support)

    def to_dict(self):
        return {
            "beta": self.beta.tolist(),
            "support": self.support.tolist(),
            "q_hat": self.q_hat,
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "method": self.method,
            "provenance": self.provenance,
        }


@dataclass(frozen=True)
class OracleTarget:
    """Solution of the bias/variance oracle problem.

    ``c_s`` is the root mean squared approximation error of ``beta0``.
    """

    beta0: np.ndarray
    c_s: float
    support_T: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta0", _frozen(self.beta0))
        support = np.array(sorted(int(j) for j in self.support_T), dtype=int)
        support.setflags(write=False)
        object.__setattr__(self, "support_T", support)

    @property
    def s(self):
        return int(self.support_T.size)


def _design_of(design):
    return design.x if isinstance(design, Dataset) else np.asarray(design, dtype=float)


def _rms(v):
    # scaled by max |v| so very small or large entries do not under/overflow
    m = float(np.max(np.abs(v))) if v.size else 0.0
    if m == 0.0 or not np.isfinite(m):
        return m
    return m * float(np.sqrt(np.mean((v / m) ** 2)))


def prediction_norm(delta, design):
    """Root mean square of ``x_i'delta`` over the sample."""
    x = _design_of(design)
    delta = np.asarray(delta, dtype=float).reshape(-1)
    if delta.shape[0] != x.shape[1]:
        raise DimensionMismatch(f"delta has {delta.shape[0]} entries, expected {x.shape[1]}")
    return _rms(x @ delta)


def residuals(beta, dataset):
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape[0] != dataset.p:
        raise DimensionMismatch(f"beta has {beta.shape[0]} entries, expected {dataset.p}")
    return dataset.y - dataset.x @ beta


def q_hat(beta, dataset):
    """Empirical mean of squared residuals."""
    r = residuals(beta, dataset)
    return float(np.mean(r**2))


def sqrt_lasso_objective(beta, dataset, lam, loadings):
    beta = np.asarray(beta, dtype=float)
    return float(_rms(residuals(beta, dataset)) + lam / dataset.n * np.sum(loadings * np.abs(beta)))


def lasso_objective(beta, dataset, lam, loadings):
    beta = np.asarray(beta, dtype=float)
    return float(q_hat(beta, dataset) + lam / dataset.n * np.sum(loadings * np.abs(beta)))
