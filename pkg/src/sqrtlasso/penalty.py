"""Penalty levels and penalty loadings.

Covers the self-tuned square-root lasso choice (with iterative loading
estimation), the classical known-sigma lasso level, and the heavy-tail
choice for symmetric errors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .core import Dataset, _design_of, residuals
from .exceptions import InvalidParameter, OutOfRange, ZeroResiduals

_STD_NORMAL = NormalDist()
ZERO_RESIDUAL_RTOL = 1e-10


class PenaltyKind(str, enum.Enum):
    SQRT_LASSO_ITERATIVE = "SqrtLassoIterative"
    LASSO_KNOWN_SIGMA = "LassoKnownSigma"
    SYMMETRIC_HEAVY_TAIL = "SymmetricHeavyTail"
    CUSTOM = "Custom"


class StopReason(str, enum.Enum):
    TOLERANCE_MET = "ToleranceMet"
    MAX_ITERATIONS = "MaxIterations"
    ZERO_RESIDUALS = "ZeroResiduals"


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


@dataclass(frozen=True)
class PenaltyScheme:
    """Penalty level ``lam`` and per-column loadings (all >= 1).

    ``kind`` decides the objective: ``LassoKnownSigma`` is fit with the
    squared-loss lasso, every other kind with the square-root lasso.
    """

    lam: float
    loadings: np.ndarray
    kind: PenaltyKind = PenaltyKind.CUSTOM
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        loadings = np.array(self.loadings, dtype=float).reshape(-1)
        if not np.isfinite(self.lam) or self.lam < 0:
            raise InvalidParameter(f"penalty level must be >= 0, got {self.lam}")
        if loadings.size == 0 or np.any(~np.isfinite(loadings)) or np.any(loadings < 1.0):
            raise InvalidParameter("penalty loadings must be finite and >= 1")
        loadings.setflags(write=False)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "loadings", loadings)
        object.__setattr__(self, "kind", PenaltyKind(self.kind))
        object.__setattr__(self, "params", dict(self.params))

    @property
    def is_lasso(self):
        return self.kind is PenaltyKind.LASSO_KNOWN_SIGMA

    def with_loadings(self, loadings):
        return PenaltyScheme(self.lam, loadings, self.kind, self.params)

    def to_dict(self):
        return {
            "lambda": self.lam,
            "loadings": self.loadings.tolist(),
            "kind": self.kind.value,
            "params": {k: _plain(v) for k, v in self.params.items()},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["lambda"], d["loadings"], PenaltyKind(d.get("kind", "Custom")), d.get("params", {}))


@dataclass
class LoadingTrace:
    """History of the iterative loading estimation.

    ``loadings[0]`` is the initial vector; ``loadings[k]`` for k >= 1 are
    the refinements, and ``changes[k-1]`` the sup-norm change that produced
    ``loadings[k]``.
    """

    loadings: list = field(default_factory=list)
    changes: list = field(default_factory=list)
    stop_reason: StopReason | None = None

    @property
    def refinements(self):
        return len(self.changes)


def normal_quantile(q):
    """Standard normal quantile function."""
    q = float(q)
    if not 0.0 < q < 1.0:
        raise OutOfRange(f"probability must lie in (0, 1), got {q}")
    return _STD_NORMAL.inv_cdf(q)


def default_alpha(n):
    return 0.05 / math.log(n)


def default_u_n(n):
    return 0.1 / math.log(n)


def _resolve_defaults(n, alpha, u_n):
    if n < 2 and (alpha is None or u_n is None):
        raise InvalidParameter("default alpha and u_n need n >= 2 (they divide by log n)")
    alpha = default_alpha(n) if alpha is None else alpha
    u_n = default_u_n(n) if u_n is None else u_n
    return alpha, u_n


def _check_common(n, p, alpha):
    if int(n) < 1 or int(p) < 1:
        raise InvalidParameter("n and p must be positive")
    if not 0.0 < alpha <= 1.0:
        raise InvalidParameter(f"alpha must lie in (0, 1], got {alpha}")


def lambda_sqrt_lasso(n, p, alpha=None, c=1.01, u_n=None):
    """Self-tuned penalty level ``(1+u) c sqrt(n) (z + 1 + u)``, ``z = Phi^-1(1 - alpha/2p)``.

    ``alpha = 1`` with ``p = 1`` is accepted as a degenerate case (``z = 0``).
    """
    alpha, u_n = _resolve_defaults(n, alpha, u_n)
    _check_common(n, p, alpha)
    if not c > 1.0:
        raise InvalidParameter(f"c must exceed 1 for the square-root lasso, got {c}")
    if u_n < 0:
        raise InvalidParameter(f"u_n must be >= 0, got {u_n}")
    z = normal_quantile(1.0 - alpha / (2.0 * p))
    return (1.0 + u_n) * c * math.sqrt(n) * (z + 1.0 + u_n)


def lambda_lasso_known_sigma(n, p, alpha=0.05, c=1.1, sigma=1.0):
    """Classical lasso level ``2 c sigma sqrt(n) Phi^-1(1 - alpha/2p)``."""
    _check_common(n, p, alpha)
    if c < 1.0:
        raise InvalidParameter(f"c must be >= 1, got {c}")
    if sigma < 0:
        raise InvalidParameter(f"sigma must be >= 0, got {sigma}")
    return 2.0 * c * sigma * math.sqrt(n) * normal_quantile(1.0 - alpha / (2.0 * p))


def lambda_sqrt_lasso_homoskedastic(n, p, alpha=0.05, c=1.1):
    """Square-root lasso counterpart of the lasso level, unit loadings: ``c sqrt(n) Phi^-1(1 - alpha/2p)``."""
    _check_common(n, p, alpha)
    if c < 1.0:
        raise InvalidParameter(f"c must be >= 1, got {c}")
    return c * math.sqrt(n) * normal_quantile(1.0 - alpha / (2.0 * p))


def lambda_symmetric(n, p, alpha=None, c=1.01, u_n=None):
    """Heavy-tail level ``(1+u) c sqrt(n) (1 + sqrt(2 log(2p/alpha)))``."""
    alpha, u_n = _resolve_defaults(n, alpha, u_n)
    _check_common(n, p, alpha)
    if not c > 1.0:
        raise InvalidParameter(f"c must exceed 1, got {c}")
    return (1.0 + u_n) * c * math.sqrt(n) * (1.0 + math.sqrt(2.0 * math.log(2.0 * p / alpha)))


def initial_loadings(design, w=2.0):
    """``w * (E_n[x_ij^4])^(1/4)`` per column."""
    if not w > 0:
        raise InvalidParameter(f"w must be positive, got {w}")
    x = _design_of(design)
    return w * np.mean(x**4, axis=0) ** 0.25


def refine_loadings(design, resid):
    """``max(1, sqrt(E_n[x_ij^2 e_i^2]) / sqrt(E_n[e_i^2]))`` per column.

    Raises
    ------
    ZeroResiduals
        If every residual is zero; the ratio is then undefined.
    """
    x = _design_of(design)
    e2 = np.asarray(resid, dtype=float).reshape(-1) ** 2
    denom = np.mean(e2)
    if denom == 0.0:
        raise ZeroResiduals("residuals are identically zero; loadings cannot be refined")
    num = np.mean(x**2 * e2[:, None], axis=0)
    return np.maximum(1.0, np.sqrt(num / denom))


def ideal_loadings(design, noise):
    """Infeasible loadings computed from the true noise vector."""
    return refine_loadings(design, noise)


def symmetric_scheme(design, alpha=None, c=1.01, u_n=None):
    """Heavy-tail scheme: loadings are per-column max absolute entries."""
    x = _design_of(design)
    n, p = x.shape
    alpha, u_n = _resolve_defaults(n, alpha, u_n)
    lam = lambda_symmetric(n, p, alpha=alpha, c=c, u_n=u_n)
    # max|x_ij| >= sqrt(E_n[x_ij^2]) = 1 on a normalized design; clip rounding
    loadings = np.maximum(1.0, np.max(np.abs(x), axis=0))
    return PenaltyScheme(lam, loadings, PenaltyKind.SYMMETRIC_HEAVY_TAIL,
                         {"alpha": alpha, "c": c, "u_n": u_n})


def homoskedastic_sqrt_scheme(n, p, alpha=0.05, c=1.1):
    lam = lambda_sqrt_lasso_homoskedastic(n, p, alpha=alpha, c=c)
    return PenaltyScheme(lam, np.ones(p), PenaltyKind.CUSTOM, {"alpha": alpha, "c": c})


def lasso_scheme(n, p, sigma, alpha=0.05, c=1.1, loadings=None):
    lam = lambda_lasso_known_sigma(n, p, alpha=alpha, c=c, sigma=sigma)
    loadings = np.ones(p) if loadings is None else loadings
    return PenaltyScheme(lam, loadings, PenaltyKind.LASSO_KNOWN_SIGMA,
                         {"alpha": alpha, "c": c, "sigma": sigma})


@dataclass(frozen=True)
class Algorithm1Params:
    """Parameters of the iterative loading estimation.

    ``max_iter`` caps the number of completed loading refinements at
    ``max_iter + 1``: the loop stops after the refinement made at
    iteration k whenever ``k >= max_iter``.
    """

    alpha: float | None = None
    c: float = 1.01
    u_n: float | None = None
    w: float = 2.0
    max_iter: int = 15
    tol: float = 1e-4
    use_post_ols: bool = False

    def resolved(self, n):
        alpha, u_n = _resolve_defaults(n, self.alpha, self.u_n)
        return Algorithm1Params(alpha, self.c, u_n, self.w, self.max_iter, self.tol, self.use_post_ols)

    def validate(self):
        if not self.c > 1.0:
            raise InvalidParameter(f"c must exceed 1, got {self.c}")
        if self.w < 1.0:
            raise InvalidParameter(f"w must be >= 1 so initial loadings stay >= 1, got {self.w}")
        if self.max_iter < 0:
            raise InvalidParameter("max_iter must be >= 0")
        if self.tol < 0:
            raise InvalidParameter("tol must be >= 0")
        if self.alpha is not None and not 0 < self.alpha < 1:
            raise InvalidParameter(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.u_n is not None and self.u_n < 0:
            raise InvalidParameter("u_n must be >= 0")

    def as_dict(self):
        return {
            "alpha": self.alpha, "c": self.c, "u_n": self.u_n, "w": self.w,
            "max_iter": self.max_iter, "tol": self.tol, "use_post_ols": self.use_post_ols,
        }


def run_algorithm1(dataset: Dataset, params: Algorithm1Params | None = None, solver=None):
    """Iteratively estimate square-root lasso loadings.

    Parameters
    ----------
    dataset : Dataset
    params : Algorithm1Params, optional
        Defaults follow the recommended settings (alpha = 0.05/log n,
        c = 1.01, u_n = 0.1/log n, w = 2).
    solver : callable, optional
        ``solver(dataset, scheme, warm_start) -> FitResult``. Defaults to
        coordinate descent.

    Returns
    -------
    scheme : PenaltyScheme
        Final level and loadings (the most recent refinement).
    trace : LoadingTrace
    """
    params = (params or Algorithm1Params()).resolved(dataset.n)
    params.validate()
    if solver is None:
        from .solvers import SolverOptions, fit

        def solver(ds, scheme, warm_start):
            return fit(ds, scheme, SolverOptions(warm_start=warm_start))

    lam = lambda_sqrt_lasso(dataset.n, dataset.p, params.alpha, params.c, params.u_n)
    current = np.maximum(initial_loadings(dataset, params.w), 1.0)
    trace = LoadingTrace(loadings=[current.copy()])
    warm = None
    k = 0
    while True:
        scheme = PenaltyScheme(lam, current, PenaltyKind.SQRT_LASSO_ITERATIVE, params.as_dict())
        result = solver(dataset, scheme, warm)
        warm = result.beta
        beta = result.beta
        if params.use_post_ols:
            from .postsel import ols_post

            beta = ols_post(dataset, result.support).beta
        resid = residuals(beta, dataset)
        try:
            # round-off residuals of an exact fit carry no loading information
            if np.linalg.norm(resid) <= ZERO_RESIDUAL_RTOL * np.linalg.norm(dataset.y):
                raise ZeroResiduals("fit interpolates the response")
            refined = refine_loadings(dataset, resid)
        except ZeroResiduals:
            trace.stop_reason = StopReason.ZERO_RESIDUALS
            break
        change = float(np.max(np.abs(refined - current)))
        trace.loadings.append(refined.copy())
        trace.changes.append(change)
        current = refined
        if change <= params.tol:
            trace.stop_reason = StopReason.TOLERANCE_MET
            break
        if k >= params.max_iter:
            trace.stop_reason = StopReason.MAX_ITERATIONS
            break
        k += 1
    final = PenaltyScheme(lam, current, PenaltyKind.SQRT_LASSO_ITERATIVE,
                          {**params.as_dict(), "refinements": trace.refinements,
                           "stop_reason": trace.stop_reason.value})
    return final, trace
