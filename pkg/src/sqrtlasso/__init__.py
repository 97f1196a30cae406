"""Square-root lasso: pivotal sparse regression with self-tuned penalties."""

__version__ = "0.1.0"

from .certify import Certificate, check_kkt
from .core import Dataset, FitResult, OracleTarget, normalize_design, prediction_norm, q_hat
from .estimators import KnownSigmaLasso, SqrtLasso
from .penalty import Algorithm1Params, PenaltyKind, PenaltyScheme, lambda_sqrt_lasso, run_algorithm1
from .postsel import ols_post
from .solvers import SolverOptions, fit, fit_first_order

__all__ = [
    "Algorithm1Params",
    "Certificate",
    "Dataset",
    "FitResult",
    "KnownSigmaLasso",
    "OracleTarget",
    "PenaltyKind",
    "PenaltyScheme",
    "SolverOptions",
    "SqrtLasso",
    "check_kkt",
    "fit",
    "fit_first_order",
    "lambda_sqrt_lasso",
    "normalize_design",
    "ols_post",
    "prediction_norm",
    "q_hat",
    "run_algorithm1",
]
