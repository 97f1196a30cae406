"""Optimality certificates for square-root lasso fits via the conic dual.

The dual problem is

    max_a  E_n[y_i a_i]   s.t.  |E_n[x_ij a_i]| <= lam gamma_j / n,  ||a|| <= sqrt(n),

and at an optimum the normalized residual ``a = (y - X beta) / sqrt(Q(beta))``
is dual optimal. A candidate built that way is scaled uniformly into the
feasible set, which makes ``primal - E_n[y a]`` a sound bound on
suboptimality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import residuals, sqrt_lasso_objective
from .exceptions import InvalidParameter, ZeroResidualFit

ZERO_RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True)
class Certificate:
    dual_a: np.ndarray
    max_constraint_violation: float
    active_set_residual: float
    ball_slack: float
    gap: float
    relative_gap: float
    primal: float
    dual_value: float
    scale: float
    feasible_after_scaling: bool
    zero_residual: bool
    passed: bool

    def to_dict(self):
        return {
            "dual_a": self.dual_a.tolist(),
            "max_constraint_violation": self.max_constraint_violation,
            "active_set_residual": self.active_set_residual,
            "ball_slack": self.ball_slack,
            "gap": self.gap,
            "relative_gap": self.relative_gap,
            "primal": self.primal,
            "dual_value": self.dual_value,
            "scale": self.scale,
            "feasible_after_scaling": self.feasible_after_scaling,
            "zero_residual": self.zero_residual,
            "passed": self.passed,
        }


def feasibility_scale(a, dataset, scheme):
    """Largest ``t <= 1`` with ``t * a`` dual feasible."""
    n = dataset.n
    limits = scheme.lam * scheme.loadings / n
    corr = np.abs(dataset.x.T @ a) / n
    scale = 1.0
    norm = float(np.linalg.norm(a))
    if norm > np.sqrt(n):
        scale = np.sqrt(n) / norm
    hot = corr > 0
    if np.any(hot):
        scale = min(scale, float(np.min(limits[hot] / corr[hot])))
    return scale


def scaled_dual_value(a, dataset, scheme):
    a = np.asarray(a, dtype=float)
    return feasibility_scale(a, dataset, scheme) * float(np.mean(dataset.y * a))


def _is_zero_residual(r, dataset):
    return np.linalg.norm(r) <= ZERO_RESIDUAL_RTOL * max(np.linalg.norm(dataset.y), 1e-300)


def dual_vector(fit, dataset):
    """Normalized residuals ``(y - X beta) / sqrt(Q(beta))``; ``||a|| = sqrt(n)``."""
    beta = fit.beta if hasattr(fit, "beta") else np.asarray(fit, dtype=float)
    r = residuals(beta, dataset)
    if _is_zero_residual(r, dataset):
        raise ZeroResidualFit("fit has zero residuals; dual candidate undefined")
    return r / np.sqrt(np.mean(r**2))


def check_kkt(fit, dataset, scheme, tol=1e-6, gap_tol=1e-8):
    """Certify a square-root lasso fit.

    Checks dual feasibility of the normalized residual, the sign equalities
    ``E_n[x_ij a_i] = sign(beta_j) lam gamma_j / n`` on the support, and a
    duality gap bounded by ``gap_tol * (1 + |primal|)``. A zero-residual
    (exact interpolation) fit is certified from the primal side only.
    """
    if scheme.is_lasso:
        raise InvalidParameter("check_kkt certifies square-root lasso fits only")
    beta = fit.beta if hasattr(fit, "beta") else np.asarray(fit, dtype=float)
    n = dataset.n
    primal = sqrt_lasso_objective(beta, dataset, scheme.lam, scheme.loadings)
    try:
        a = dual_vector(beta, dataset)
    except ZeroResidualFit:
        penalty = scheme.lam / n * float(np.sum(scheme.loadings * np.abs(beta)))
        r = residuals(beta, dataset)
        ok = bool(abs(primal - penalty) <= tol * (1 + abs(primal)) and _is_zero_residual(r, dataset))
        return Certificate(
            dual_a=np.zeros(n), max_constraint_violation=0.0, active_set_residual=0.0,
            ball_slack=float(np.sqrt(n)), gap=0.0, relative_gap=0.0, primal=primal,
            dual_value=primal, scale=0.0, feasible_after_scaling=True, zero_residual=True,
            passed=ok,
        )
    limits = scheme.lam * scheme.loadings / n
    corr = dataset.x.T @ a / n
    violation = float(np.max(np.maximum(np.abs(corr) - limits, 0.0)))
    support = np.flatnonzero(beta != 0.0)
    if support.size:
        active = float(np.max(np.abs(corr[support] - np.sign(beta[support]) * limits[support])))
    else:
        active = 0.0
    scale = feasibility_scale(a, dataset, scheme)
    a_tilde = scale * a
    dual_value = float(np.mean(dataset.y * a_tilde))
    gap = primal - dual_value
    relative_gap = gap / (1.0 + abs(primal))
    feasible = bool(
        np.all(np.abs(dataset.x.T @ a_tilde / n) <= limits + 1e-12)
        and np.linalg.norm(a_tilde) <= np.sqrt(n) + 1e-12
    )
    passed = bool(
        violation <= tol and active <= tol and relative_gap <= gap_tol
        and gap >= -1e-10 and feasible
    )
    return Certificate(
        dual_a=a, max_constraint_violation=violation, active_set_residual=active,
        ball_slack=float(np.sqrt(n) - np.linalg.norm(a)), gap=float(gap),
        relative_gap=float(relative_gap), primal=primal, dual_value=dual_value,
        scale=float(scale), feasible_after_scaling=feasible, zero_residual=False, passed=passed,
    )
