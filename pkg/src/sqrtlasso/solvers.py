"""Lasso and square-root lasso solvers.

Two routes are provided: cyclic coordinate descent with closed-form
one-dimensional updates, and a smoothed first-order method that works on
the conic dual of the square-root lasso (soft-thresholded primal step,
ball-projected dual step, accelerated template, proximal-center
continuation).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .certify import scaled_dual_value
from .core import Dataset, FitResult, lasso_objective, q_hat, residuals, sqrt_lasso_objective
from .exceptions import DimensionMismatch, InvalidParameter, NotConverged, PenaltyTooLarge
from .penalty import PenaltyScheme

logger = logging.getLogger(__name__)


class Method(str, enum.Enum):
    COORDINATE_DESCENT = "cd"
    FIRST_ORDER = "fo"


@dataclass(frozen=True)
class SolverOptions:
    """Solver controls.

    ``tol`` is the sup-norm coordinate-change threshold for coordinate
    descent; ``fo_tol`` the relative duality-gap threshold of the
    first-order method. ``fo_smoothing`` is its proximal weight mu;
    ``None`` picks ``fo_smoothing_scale / initial objective``, which keeps
    the iterates equivariant to rescaling ``y``.
    """

    tol: float = 1e-10
    max_sweeps: int = 10_000
    method: Method = Method.COORDINATE_DESCENT
    fo_smoothing: float | None = None
    fo_smoothing_scale: float = 0.01
    fo_max_iter: int = 200_000
    fo_tol: float = 1e-8
    warm_start: np.ndarray | None = None
    shuffle: bool = False
    seed: int = 0
    raise_on_failure: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidParameter("tol must be positive")
        if self.max_sweeps < 1:
            raise InvalidParameter("max_sweeps must be >= 1")
        if self.fo_smoothing is not None and not self.fo_smoothing > 0:
            raise InvalidParameter("fo_smoothing must be positive")
        object.__setattr__(self, "method", Method(self.method))


def _penalty_vector(dataset, scheme):
    if scheme.loadings.shape[0] != dataset.p:
        raise DimensionMismatch(f"{scheme.loadings.shape[0]} loadings for {dataset.p} columns")
    return scheme.lam * scheme.loadings / dataset.n


def objective(beta, dataset, scheme):
    if scheme.is_lasso:
        return lasso_objective(beta, dataset, scheme.lam, scheme.loadings)
    return sqrt_lasso_objective(beta, dataset, scheme.lam, scheme.loadings)


def _partial_moments(j, beta, dataset):
    beta = np.asarray(beta, dtype=float)
    if beta.shape[0] != dataset.p:
        raise DimensionMismatch(f"beta has {beta.shape[0]} entries, expected {dataset.p}")
    minus = beta.copy()
    minus[j] = 0.0
    r = dataset.y - dataset.x @ minus
    xj = dataset.x[:, j]
    return float(np.mean(xj * r)), float(np.mean(xj**2)), float(np.mean(r**2))


def cd_update_lasso(j, beta, dataset, scheme):
    """Optimal ``beta_j`` for the lasso with the other coordinates fixed."""
    rho, d, _ = _partial_moments(j, beta, dataset)
    return float(_kernels.lasso_update(rho, d, scheme.lam * scheme.loadings[j] / dataset.n))


def cd_update_sqrt(j, beta, dataset, scheme):
    """Optimal ``beta_j`` for the square-root lasso with the other coordinates fixed.

    Raises
    ------
    PenaltyTooLarge
        If the nonzero branch is reached while ``lam*gamma_j >= n*sqrt(E_n[x_j^2])``.
        For nonzero partial residuals this cannot happen: Cauchy-Schwarz puts
        such coordinates in the zero branch.
    """
    rho, d, qm = _partial_moments(j, beta, dataset)
    b, ok = _kernels.sqrt_update(rho, d, qm, scheme.lam * scheme.loadings[j] / dataset.n)
    if not ok:
        raise PenaltyTooLarge(j)
    return float(b)


def _finish(beta, dataset, scheme, iterations, converged, method, options, trajectory=None):
    beta = np.asarray(beta, dtype=float)
    result = FitResult(
        beta=beta,
        q_hat=q_hat(beta, dataset),
        objective=objective(beta, dataset, scheme),
        iterations=int(iterations),
        converged=bool(converged),
        method=method,
        provenance="lasso" if scheme.is_lasso else "sqrt_lasso",
    )
    if trajectory is not None:
        object.__setattr__(result, "trajectory", np.asarray(trajectory))
    if not converged:
        logger.warning("%s solver stopped after %d iterations without converging", method, iterations)
        if options.raise_on_failure:
            raise NotConverged(f"{method} did not converge in {iterations} iterations", result)
    return result


def _initial_beta(dataset, options):
    if options.warm_start is None:
        return np.zeros(dataset.p)
    beta = np.array(options.warm_start, dtype=float).reshape(-1)
    if beta.shape[0] != dataset.p:
        raise DimensionMismatch("warm start has the wrong length")
    return beta


def fit(dataset: Dataset, scheme: PenaltyScheme, options: SolverOptions | None = None) -> FitResult:
    """Fit the lasso (``LassoKnownSigma`` schemes) or square-root lasso.

    The returned ``FitResult`` carries an extra ``trajectory`` attribute
    with the objective after every sweep (or after every continuation
    stage for the first-order method).
    """
    options = options or SolverOptions()
    if options.method is Method.FIRST_ORDER:
        return fit_first_order(dataset, scheme, options)
    pen = _penalty_vector(dataset, scheme)
    beta = _initial_beta(dataset, options)
    x = np.ascontiguousarray(dataset.x)
    sweeps, status, bad_j, trajectory = _kernels.cd_sweeps(
        x, np.ascontiguousarray(dataset.y), pen, beta, options.tol, options.max_sweeps,
        not scheme.is_lasso, options.shuffle, options.seed,
    )
    if status == 2:
        raise PenaltyTooLarge(int(bad_j))
    return _finish(beta, dataset, scheme, sweeps, status == 0, "cd", options, trajectory)


def _soft(v, thresh):
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def _project_ball(z, radius):
    norm = np.linalg.norm(z)
    if norm <= radius:
        return z
    return z * (radius / norm)


def _residual_dual_value(beta, dataset, scheme):
    r = residuals(beta, dataset)
    norm = np.linalg.norm(r)
    if norm == 0.0:
        return -np.inf
    return scaled_dual_value(np.sqrt(dataset.n) * r / norm, dataset, scheme)


def fit_first_order(dataset: Dataset, scheme: PenaltyScheme, options: SolverOptions | None = None) -> FitResult:
    """Square-root lasso by a smoothed accelerated first-order method.

    Each continuation stage maximizes the dual of the smoothed problem

        min_beta  max_{||z|| <= 1/sqrt(n)} z'(y - X beta)
                  + (lam/n) ||Gamma beta||_1 + (mu/2) ||beta - center||^2

    by accelerated projected gradient ascent in ``z``. For fixed ``z`` the
    primal minimizer is the soft-threshold
    ``sign(v) max(|v| - lam gamma_j / (n mu), 0)`` with
    ``v = center + X'z / mu``, and the dual gradient is ``y - X beta(z)``.
    After each stage the center moves to the stage's primal average.
    Iteration stops once the duality gap, relative to ``1 + |primal|``,
    drops below ``options.fo_tol``.
    """
    options = options or SolverOptions(method=Method.FIRST_ORDER)
    if scheme.is_lasso:
        raise InvalidParameter("the first-order route solves the square-root lasso only")
    x, y, n = dataset.x, dataset.y, dataset.n
    thresh_base = scheme.lam * scheme.loadings / n
    radius = 1.0 / np.sqrt(n)
    center = _initial_beta(dataset, options)
    primal = objective(center, dataset, scheme)
    if primal == 0.0:
        result = _finish(center, dataset, scheme, 0, True, "fo", options, [primal])
        object.__setattr__(result, "max_dual_norm", 0.0)
        return result
    mu = options.fo_smoothing
    if mu is None:
        mu = options.fo_smoothing_scale / primal
    lipschitz = np.linalg.norm(x, 2) ** 2 / mu
    step = 1.0 / lipschitz
    thresh = thresh_base / mu

    def primal_of(z):
        return _soft(center + (x.T @ z) / mu, thresh)

    r0 = residuals(center, dataset)
    z_tilde = _project_ball(r0 / max(np.linalg.norm(r0), 1e-300) * radius, radius)
    best_beta, best_primal = center.copy(), primal
    trajectory = [primal]
    max_dual_norm = float(np.linalg.norm(z_tilde))
    total = 0
    converged = False
    stage_len = 50
    while total < options.fo_max_iter:
        z_bar = z_tilde.copy()
        beta_bar = primal_of(z_bar)
        theta = 1.0
        for _ in range(stage_len):
            z_mid = (1.0 - theta) * z_bar + theta * z_tilde
            beta_mid = primal_of(z_mid)
            grad = y - x @ beta_mid
            z_tilde = _project_ball(z_tilde + (step / theta) * grad, radius)
            max_dual_norm = max(max_dual_norm, float(np.linalg.norm(z_tilde)))
            z_bar = (1.0 - theta) * z_bar + theta * z_tilde
            beta_bar = (1.0 - theta) * beta_bar + theta * beta_mid
            theta = 2.0 / (1.0 + np.sqrt(1.0 + 4.0 / theta**2))
            total += 1
        # the averaged primal is dense-ish; its thresholded twin is exact on zeros
        candidates = (beta_bar, primal_of(z_bar))
        for cand in candidates:
            val = objective(cand, dataset, scheme)
            if val < best_primal:
                best_primal, best_beta = val, cand.copy()
        center = best_beta.copy()
        trajectory.append(best_primal)
        lower = max(scaled_dual_value(n * z_bar, dataset, scheme),
                    _residual_dual_value(best_beta, dataset, scheme))
        gap = best_primal - lower
        if gap <= options.fo_tol * (1.0 + abs(best_primal)):
            converged = True
            break
        stage_len = min(2 * stage_len, 2000)
    result = _finish(best_beta, dataset, scheme, total, converged, "fo", options, trajectory)
    object.__setattr__(result, "max_dual_norm", max_dual_norm)
    return result
