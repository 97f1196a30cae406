"""Data-generating processes, oracle targets and the Monte Carlo runner.

Designs are Gaussian with Toeplitz correlation ``rho^|j-k|`` (AR(1)
recursion across columns), normalized to unit column second moments. The
regression function is ``f = X beta_star``. By default the design is drawn
once per configuration and held fixed across replications, so the oracle
target and the bias norm are well defined; each replication redraws the
noise only. The unit-scale noise of a replication is shared across the
sigma grid (common random numbers).
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from .core import Dataset, OracleTarget, normalize_design, prediction_norm
from .diagnostics import event_check, score_vector
from .exceptions import InvalidParameter, SqrtLassoError, ZeroResiduals
from .penalty import (
    Algorithm1Params,
    PenaltyKind,
    PenaltyScheme,
    homoskedastic_sqrt_scheme,
    ideal_loadings,
    lasso_scheme,
    run_algorithm1,
    symmetric_scheme,
)
from .postsel import ols_post
from .solvers import SolverOptions, fit

logger = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 10**5
_DESIGN_STREAM = 0
_NOISE_STREAM = 1


class ErrorLaw(str, enum.Enum):
    GAUSSIAN = "Gaussian"
    T4_SCALED = "T4Scaled"
    HETEROSKEDASTIC_GAUSSIAN = "HeteroskedasticGaussian"
    T2 = "T2"


class Estimator(str, enum.Enum):
    LASSO_KNOWN_SIGMA = "LassoKnownSigma"
    OLS_POST_LASSO = "OlsPostLasso"
    SQRT_LASSO = "SqrtLasso"
    OLS_POST_SQRT_LASSO = "OlsPostSqrtLasso"
    IDEAL_SQRT_LASSO = "IdealSqrtLasso"
    OLS_POST_IDEAL_SQRT_LASSO = "OlsPostIdealSqrtLasso"
    ORACLE = "OracleEstimator"


class ConfigError(SqrtLassoError, ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


def _rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def gen_design(n, p, rho, seed, normalize=True):
    """Gaussian rows with covariance ``rho^|j-k|``.

    Returns the normalized design and its column scales (or the raw draw
    when ``normalize`` is False, with unit scales).
    """
    if not 0.0 <= rho < 1.0:
        raise InvalidParameter(f"rho must lie in [0, 1), got {rho}")
    if n < 1 or p < 1:
        raise InvalidParameter("n and p must be positive")
    z = _rng(seed).standard_normal((n, p))
    x = np.empty((n, p))
    x[:, 0] = z[:, 0]
    innovation = math.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        x[:, j] = rho * x[:, j - 1] + innovation * z[:, j]
    if not normalize:
        return x, np.ones(p)
    return normalize_design(x)


def beta_star_vector(rule, p, custom=None):
    if rule == "InvJ32":
        return 1.0 / np.arange(1, p + 1) ** 1.5
    if rule == "InvJ2":
        return 1.0 / np.arange(1, p + 1) ** 2.0
    if rule == "Custom":
        if custom is None:
            raise InvalidParameter("Custom beta_star rule needs a vector")
        b = np.zeros(p)
        custom = np.asarray(custom, dtype=float)
        if custom.size > p:
            raise InvalidParameter("custom beta_star longer than p")
        b[: custom.size] = custom
        return b
    raise InvalidParameter(f"unknown beta_star rule {rule!r}")


def _student_t(rng, dof, size):
    z = rng.standard_normal(size)
    chi2 = np.sum(rng.standard_normal((dof, size)) ** 2, axis=0)
    return z / np.sqrt(chi2 / dof)


def gen_errors(n, law, sigma, design=None, beta_star=None, seed=0):
    """Draw unit-scale errors and per-observation scales.

    The noise entering the response is ``scales * eps``. Heteroskedastic
    scales satisfy ``mean(scales**2) == sigma**2`` exactly in-sample.
    """
    law = ErrorLaw(law)
    if sigma < 0:
        raise InvalidParameter("sigma must be >= 0")
    rng = _rng(seed)
    if law is ErrorLaw.GAUSSIAN:
        eps = rng.standard_normal(n)
    elif law is ErrorLaw.T4_SCALED:
        eps = _student_t(rng, 4, n) / math.sqrt(2.0)
    elif law is ErrorLaw.T2:
        eps = _student_t(rng, 2, n)
    else:
        eps = rng.standard_normal(n)
    if law is ErrorLaw.HETEROSKEDASTIC_GAUSSIAN:
        if design is None or beta_star is None:
            raise InvalidParameter("heteroskedastic errors need the design and beta_star")
        x = design.x if isinstance(design, Dataset) else np.asarray(design)
        level = (1.0 + x @ np.asarray(beta_star)) ** 2
        scales = sigma * np.sqrt(level / np.mean(level))
    else:
        scales = np.full(n, float(sigma))
    return eps, scales


def _ls_error(f, x, support):
    if not support:
        return float(np.mean(f**2)), np.zeros(0)
    xs = x[:, list(support)]
    coef, *_ = np.linalg.lstsq(xs, f, rcond=None)
    r = f - xs @ coef
    return float(np.mean(r**2)), coef


def _nested_supports(f, x, k_max):
    """Greedy nested supports: add the column most correlated with the current residual."""
    n, p = x.shape
    chosen = []
    r = f.copy()
    yield ()
    for _ in range(k_max):
        corr = np.abs(x.T @ r)
        corr[chosen] = -np.inf
        j = int(np.argmax(corr))
        if not np.isfinite(corr[j]):
            return
        chosen.append(j)
        _, coef = _ls_error(f, x, chosen)
        r = f - x[:, chosen] @ coef
        yield tuple(chosen)


def oracle_target(f_values, design, sigma, method="auto", k_max=None, exhaustive_limit=EXHAUSTIVE_LIMIT):
    """Minimize ``min_beta ||f - X_S beta||^2_n + sigma^2 |S| / n`` over supports.

    ``method='nested'`` scans greedy nested supports; ``'exhaustive'`` scans
    every support of size <= ``k_max``; ``'auto'`` is exhaustive when that
    is at most ``exhaustive_limit`` supports. Ties go to the smaller support.
    """
    x = design.x if isinstance(design, Dataset) else np.asarray(design, dtype=float)
    f = np.asarray(f_values, dtype=float).reshape(-1)
    n, p = x.shape
    k_max = min(n, p) if k_max is None else min(k_max, n, p)
    n_supports = sum(math.comb(p, k) for k in range(k_max + 1))
    if method == "auto":
        method = "exhaustive" if n_supports <= exhaustive_limit else "nested"
    if method == "exhaustive":
        candidates = itertools.chain.from_iterable(
            itertools.combinations(range(p), k) for k in range(k_max + 1))
    elif method == "nested":
        candidates = _nested_supports(f, x, k_max)
    else:
        raise InvalidParameter(f"unknown oracle method {method!r}")
    var_n = sigma**2 / n
    scale = max(float(np.mean(f**2)), 1e-300)
    best_val, best_support, best_coef = np.inf, (), np.zeros(0)
    for support in candidates:
        penalty = var_n * len(support)
        if penalty > best_val:
            if method == "nested":
                break
            continue
        err, coef = _ls_error(f, x, support)
        # relative slack keeps exact-fit ties on the smaller support
        if err + penalty < best_val - 1e-12 * scale:
            best_val, best_support, best_coef = err + penalty, support, coef
    beta0 = np.zeros(p)
    if best_support:
        beta0[list(best_support)] = best_coef
    c_s = math.sqrt(max(float(np.mean((f - x @ beta0) ** 2)), 0.0))
    return OracleTarget(beta0=beta0, c_s=c_s, support_T=np.flatnonzero(beta0))


@dataclass
class McConfig:
    """Monte Carlo experiment definition.

    ``sqrt_penalty`` selects the square-root lasso penalty:
    ``'algorithm1'`` (self-tuned level with iterated loadings),
    ``'homoskedastic'`` (``c sqrt(n) Phi^-1(1 - alpha/2p)``, unit loadings,
    with ``lasso_c``/``lasso_alpha``) or ``'symmetric'`` (heavy-tail
    scheme). The known-sigma lasso always uses ``lasso_c``/``lasso_alpha``.
    """

    n: int
    p: int
    sigmas: list
    n_reps: int
    seed: int
    rho_toeplitz: float = 0.5
    beta_star_rule: str = "InvJ32"
    beta_star: list | None = None
    error_law: str = "Gaussian"
    estimators: list = field(default_factory=lambda: [e.value for e in Estimator])
    sqrt_penalty: str = "algorithm1"
    lasso_c: float = 1.1
    lasso_alpha: float = 0.05
    algorithm1: dict = field(default_factory=dict)
    fixed_design: bool = True
    solver_tol: float = 1e-8
    threads: int = 1
    name: str = ""

    def validate(self):
        def need(cond, path, message):
            if not cond:
                raise ConfigError(path, message)

        need(isinstance(self.n, int) and self.n >= 2, "$.n", "must be an integer >= 2")
        need(isinstance(self.p, int) and self.p >= 1, "$.p", "must be a positive integer")
        need(isinstance(self.n_reps, int) and self.n_reps >= 1, "$.n_reps", "must be an integer >= 1")
        need(isinstance(self.seed, int) and 0 <= self.seed < 2**64, "$.seed", "must be a 64-bit unsigned integer")
        need(isinstance(self.sigmas, (list, tuple)) and len(self.sigmas) > 0, "$.sigmas", "must be a non-empty list")
        for i, s in enumerate(self.sigmas):
            need(isinstance(s, (int, float)) and s >= 0, f"$.sigmas[{i}]", "must be a nonnegative number")
        need(isinstance(self.rho_toeplitz, (int, float)) and 0 <= self.rho_toeplitz < 1,
             "$.rho_toeplitz", "must lie in [0, 1)")
        need(self.beta_star_rule in ("InvJ32", "InvJ2", "Custom"), "$.beta_star_rule",
             "must be one of InvJ32, InvJ2, Custom")
        if self.beta_star_rule == "Custom":
            need(isinstance(self.beta_star, list) and 0 < len(self.beta_star) <= self.p,
                 "$.beta_star", "Custom rule needs a list of at most p numbers")
        need(self.error_law in [e.value for e in ErrorLaw], "$.error_law",
             f"must be one of {[e.value for e in ErrorLaw]}")
        need(isinstance(self.estimators, list) and self.estimators, "$.estimators", "must be a non-empty list")
        for i, e in enumerate(self.estimators):
            need(e in [x.value for x in Estimator], f"$.estimators[{i}]", f"unknown estimator {e!r}")
        need(self.sqrt_penalty in ("algorithm1", "homoskedastic", "symmetric"), "$.sqrt_penalty",
             "must be one of algorithm1, homoskedastic, symmetric")
        need(isinstance(self.algorithm1, dict), "$.algorithm1", "must be an object")
        unknown = set(self.algorithm1) - set(Algorithm1Params().as_dict())
        need(not unknown, "$.algorithm1", f"unknown keys {sorted(unknown)}")
        need(isinstance(self.threads, int) and self.threads >= 1, "$.threads", "must be a positive integer")
        return self

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("$", "config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"$.{unknown[0]}", "unknown field")
        for req in ("n", "p", "sigmas", "n_reps", "seed"):
            if req not in d:
                raise ConfigError(f"$.{req}", "required field missing")
        return cls(**d).validate()

    def to_dict(self):
        return asdict(self)


def load_preset(name):
    """Bundled configuration by name (e.g. ``'fig1-desk'``)."""
    try:
        text = resources.files("sqrtlasso.presets").joinpath(f"{name}.json").read_text()
    except FileNotFoundError as exc:
        raise ConfigError("$", f"unknown preset {name!r}") from exc
    return McConfig.from_dict(json.loads(text))


def list_presets():
    return sorted(p.name[:-5] for p in resources.files("sqrtlasso.presets").iterdir()
                  if p.name.endswith(".json"))


@dataclass
class McReport:
    """Per-(estimator, sigma) metric rows."""

    rows: list
    config: dict
    oracle: dict

    COLUMNS = ("estimator", "sigma", "mean_risk", "median_risk", "bias_norm", "mean_support",
               "event_coverage", "oracle_s", "oracle_c_s", "n_success", "n_failed")

    def get(self, estimator, sigma):
        for row in self.rows:
            if row["estimator"] == estimator and row["sigma"] == sigma:
                return row
        raise KeyError((estimator, sigma))

    def column(self, estimator, key):
        return [row[key] for row in self.rows if row["estimator"] == estimator]

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: row[k] for k in self.COLUMNS})
        return buf.getvalue()

    def summary(self):
        return {"config": self.config, "oracle": self.oracle, "rows": self.rows}


def _sqrt_scheme(config, ds, a1_params):
    n, p = ds.n, ds.p
    if config.sqrt_penalty == "homoskedastic":
        return homoskedastic_sqrt_scheme(n, p, alpha=config.lasso_alpha, c=config.lasso_c), None
    if config.sqrt_penalty == "symmetric":
        return symmetric_scheme(ds), None
    return None, a1_params


class _Replication:
    """Everything one replication needs; shared read-only across workers."""

    def __init__(self, config, x, scales, beta_star, targets):
        self.config = config
        self.x = x
        self.scales = scales
        self.beta_star = beta_star
        self.f = x @ beta_star
        self.targets = targets
        self.estimators = [Estimator(e) for e in config.estimators]
        self.a1 = Algorithm1Params(**config.algorithm1)
        self.options = SolverOptions(tol=config.solver_tol)

    def _solver(self, ds, scheme, warm):
        return fit(ds, scheme, SolverOptions(tol=self.config.solver_tol, warm_start=warm))

    def noise(self, rep):
        cfg = self.config
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _NOISE_STREAM, rep]))
        x, scales_design = self.x, self.scales
        if not cfg.fixed_design:
            x, scales_design = gen_design(
                cfg.n, cfg.p, cfg.rho_toeplitz,
                np.random.default_rng(np.random.SeedSequence([cfg.seed, _DESIGN_STREAM, rep])))
        eps, unit_scales = gen_errors(cfg.n, cfg.error_law, 1.0, x, self.beta_star, rng)
        return x, scales_design, unit_scales * eps

    def run(self, rep):
        cfg = self.config
        x, col_scales, unit_noise = self.noise(rep)
        f = x @ self.beta_star
        out = {}
        for sigma in cfg.sigmas:
            target = self.targets[sigma] if cfg.fixed_design else oracle_target(f, x, sigma)
            noise = sigma * unit_noise
            ds = Dataset(y=f + noise, x=x, col_scales=col_scales)
            try:
                out[sigma] = self._estimate(ds, target, noise, sigma)
            except (SqrtLassoError, np.linalg.LinAlgError) as exc:
                logger.warning("replication %d sigma %g failed: %s", rep, sigma, exc)
                out[sigma] = None
        return out

    def _estimate(self, ds, target, noise, sigma):
        cfg = self.config
        wanted = set(self.estimators)
        beta0 = target.beta0
        composite = ds.y - ds.x @ beta0
        # a numerically zero composite error leaves the score undefined
        score = None
        if np.linalg.norm(composite) > 1e-10 * np.linalg.norm(ds.y):
            score = score_vector(ds, composite)
        results = {}

        def record(est, beta, event):
            results[est] = (np.asarray(beta, dtype=float), event)

        if wanted & {Estimator.LASSO_KNOWN_SIGMA, Estimator.OLS_POST_LASSO}:
            scheme = lasso_scheme(ds.n, ds.p, sigma, alpha=cfg.lasso_alpha, c=cfg.lasso_c)
            res = fit(ds, scheme, self.options)
            event = None
            if score is not None:
                lasso_score = 2.0 * (ds.x.T @ composite) / ds.n
                event = event_check(scheme.lam, ds.n, lasso_score, scheme.loadings, cfg.lasso_c)
            record(Estimator.LASSO_KNOWN_SIGMA, res.beta, event)
            record(Estimator.OLS_POST_LASSO, ols_post(ds, res.support).beta, event)

        sqrt_family = {Estimator.SQRT_LASSO, Estimator.OLS_POST_SQRT_LASSO,
                       Estimator.IDEAL_SQRT_LASSO, Estimator.OLS_POST_IDEAL_SQRT_LASSO}
        if wanted & sqrt_family:
            scheme, a1 = _sqrt_scheme(cfg, ds, self.a1)
            if scheme is None:
                scheme, _ = run_algorithm1(ds, a1, self._solver)
            c = scheme.params.get("c", cfg.lasso_c)
            if wanted & {Estimator.SQRT_LASSO, Estimator.OLS_POST_SQRT_LASSO}:
                res = fit(ds, scheme, self.options)
                event = None if score is None else event_check(scheme.lam, ds.n, score,
                                                               scheme.loadings, c)
                record(Estimator.SQRT_LASSO, res.beta, event)
                record(Estimator.OLS_POST_SQRT_LASSO, ols_post(ds, res.support).beta, event)
            if wanted & {Estimator.IDEAL_SQRT_LASSO, Estimator.OLS_POST_IDEAL_SQRT_LASSO}:
                try:
                    ideal = ideal_loadings(ds, noise)
                except ZeroResiduals:
                    ideal = np.ones(ds.p)
                ideal_scheme = PenaltyScheme(scheme.lam, ideal, PenaltyKind.CUSTOM, scheme.params)
                res = fit(ds, ideal_scheme, self.options)
                event = None if score is None else event_check(scheme.lam, ds.n, score, ideal, c)
                record(Estimator.IDEAL_SQRT_LASSO, res.beta, event)
                record(Estimator.OLS_POST_IDEAL_SQRT_LASSO, ols_post(ds, res.support).beta, event)

        if Estimator.ORACLE in wanted:
            record(Estimator.ORACLE, ols_post(ds, target.support_T).beta, None)

        metrics = {}
        for est in self.estimators:
            beta, event = results[est]
            diff = beta - beta0
            metrics[est] = {
                "risk": prediction_norm(diff, ds),
                "diff": diff,
                "support": int(np.count_nonzero(beta)),
                "event": event,
            }
        return metrics


def run_mc(config: McConfig) -> McReport:
    """Run every replication and reduce to per-(estimator, sigma) metrics.

    Deterministic given the config: replication r draws from the stream
    ``(seed, r)`` and results are reduced in replication order.
    """
    config.validate()
    beta_star = beta_star_vector(config.beta_star_rule, config.p, config.beta_star)
    x, scales = gen_design(config.n, config.p, config.rho_toeplitz,
                           np.random.default_rng(np.random.SeedSequence([config.seed, _DESIGN_STREAM])))
    f = x @ beta_star
    targets = {}
    if config.fixed_design:
        targets = {s: oracle_target(f, x, s) for s in config.sigmas}
    job = _Replication(config, x, scales, beta_star, targets)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            per_rep = list(pool.map(job.run, range(config.n_reps)))
    else:
        per_rep = [job.run(r) for r in range(config.n_reps)]

    rows = []
    for est in job.estimators:
        for sigma in config.sigmas:
            ok = [rep[sigma][est] for rep in per_rep if rep[sigma] is not None]
            failed = config.n_reps - len(ok)
            if ok:
                risks = np.array([m["risk"] for m in ok])
                bias = np.mean(np.stack([m["diff"] for m in ok]), axis=0)
                events = [m["event"] for m in ok if m["event"] is not None]
                row = {
                    "mean_risk": float(np.mean(risks)),
                    "median_risk": float(np.median(risks)),
                    "bias_norm": float(np.linalg.norm(bias)),
                    "mean_support": float(np.mean([m["support"] for m in ok])),
                    "event_coverage": float(np.mean(events)) if events else float("nan"),
                }
            else:
                row = dict.fromkeys(("mean_risk", "median_risk", "bias_norm", "mean_support",
                                     "event_coverage"), float("nan"))
            target = targets.get(sigma)
            row.update({
                "estimator": est.value,
                "sigma": float(sigma),
                "oracle_s": target.s if target is not None else -1,
                "oracle_c_s": target.c_s if target is not None else float("nan"),
                "n_success": len(ok),
                "n_failed": failed,
            })
            rows.append(row)
    oracle = {str(s): {"s": t.s, "c_s": t.c_s, "support": t.support_T.tolist()} for s, t in targets.items()}
    return McReport(rows=rows, config=config.to_dict(), oracle=oracle)
