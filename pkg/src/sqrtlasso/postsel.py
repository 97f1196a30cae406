"""Ordinary least squares refit on a selected support."""

import numpy as np
from scipy.linalg import lstsq

from .core import FitResult, q_hat
from .exceptions import DimensionMismatch


def ols_post(dataset, support, provenance="ols_post"):
    """Least squares restricted to ``support``; zero elsewhere.

    Uses a complete orthogonal factorization with column pivoting, so
    collinear selections get the minimum-norm coefficients.
    """
    support = np.unique(np.asarray(support, dtype=int).reshape(-1))
    if support.size and (support[0] < 0 or support[-1] >= dataset.p):
        raise DimensionMismatch(f"support indices must lie in [0, {dataset.p})")
    beta = np.zeros(dataset.p)
    if support.size:
        xs = dataset.x[:, support]
        # numpy's rank convention; columns equal up to rounding count once
        cond = np.finfo(float).eps * max(xs.shape)
        coef, _, _, _ = lstsq(xs, dataset.y, cond=cond, lapack_driver="gelsy")
        beta[support] = coef
    q = q_hat(beta, dataset)
    return FitResult(beta=beta, q_hat=q, objective=q, iterations=0, converged=True,
                     method="ols", provenance=provenance)
