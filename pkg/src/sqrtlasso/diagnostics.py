"""Design-condition quantities.

Sparse eigenvalues are computed exactly by enumerating supports. The
restricted eigenvalue, its repeated-regressor-robust generalization
``kappa_bar`` and the score-dependent ``varrho`` are nonconvex programs;
they are estimated by seeded random search in the relevant cone followed
by coordinate polishing, and reported as one-sided bounds (upper bounds
for the infima, lower bounds for the supremum).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, _design_of
from .exceptions import (
    DimensionMismatch,
    EmptySupport,
    EnumerationTooLarge,
    InvalidParameter,
    ZeroCompositeError,
)

logger = logging.getLogger(__name__)

ENUMERATION_LIMIT = 10**6


def gram_matrix(design):
    x = _design_of(design)
    return x.T @ x / x.shape[0]


def _as_gram(design_or_gram):
    if isinstance(design_or_gram, Dataset):
        return gram_matrix(design_or_gram)
    g = np.asarray(design_or_gram, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DimensionMismatch("expected a Dataset or a square gram matrix")
    return g


def _check_support(support_T, p):
    T = np.unique(np.asarray(list(support_T), dtype=int))
    if T.size and (T[0] < 0 or T[-1] >= p):
        raise DimensionMismatch(f"support indices must lie in [0, {p})")
    return T


def count_supports(p, T_size, m):
    return math.comb(p - T_size, min(m, p - T_size))


def sparse_eigenvalues(gram, m, support_T=(), limit=ENUMERATION_LIMIT, randomized=False,
                       n_random=10_000, seed=0):
    """Minimal and maximal m-sparse eigenvalues relative to ``support_T``.

    Extremal Rayleigh quotients over ``delta != 0`` with at most ``m``
    nonzeros outside ``support_T``. By eigenvalue interlacing it suffices
    to scan off-support sets of size exactly ``min(m, p - |T|)``.

    Raises
    ------
    EnumerationTooLarge
        If the number of supports exceeds ``limit`` and ``randomized`` is
        False. With ``randomized=True`` a seeded subsample of ``n_random``
        supports is scanned instead, giving an outer bound pair
        (phi_min over-estimated, phi_max under-estimated).
    """
    g = np.asarray(gram, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DimensionMismatch("gram must be square")
    if not np.allclose(g, g.T, atol=1e-12, rtol=0):
        raise InvalidParameter("gram must be symmetric")
    p = g.shape[0]
    T = _check_support(support_T, p)
    if m < 0:
        raise InvalidParameter("m must be >= 0")
    if m == 0 and T.size == 0:
        raise InvalidParameter("m = 0 with an empty support leaves only delta = 0")
    rest = np.setdiff1d(np.arange(p), T)
    k = min(m, rest.size)
    count = math.comb(rest.size, k)
    if count > limit:
        if not randomized:
            raise EnumerationTooLarge(count, limit)
        logger.info("sampling %d of %d supports for m=%d", n_random, count, m)
        rng = np.random.default_rng(seed)
        subsets = (rng.choice(rest, size=k, replace=False) for _ in range(n_random))
    else:
        subsets = itertools.combinations(rest.tolist(), k)
    lo, hi = np.inf, -np.inf
    for extra in subsets:
        idx = np.concatenate([T, np.asarray(extra, dtype=int)])
        ev = np.linalg.eigvalsh(g[np.ix_(idx, idx)])
        lo = min(lo, ev[0])
        hi = max(hi, ev[-1])
    return float(lo), float(hi)


def sparse_eigen_table(gram, ms, support_T=(), **kwargs):
    phi_min, phi_max = {}, {}
    for m in ms:
        phi_min[int(m)], phi_max[int(m)] = sparse_eigenvalues(gram, m, support_T, **kwargs)
    return phi_min, phi_max


def re_lower_bound(phi_min, phi_max, s, c_bar, loadings_sup=1.0):
    """Sparse-eigenvalue lower bound on the restricted eigenvalue.

    Maximizes ``sqrt(phi_min(m)) / |Gamma|_inf * (1 - sqrt(phi_max(m)/phi_min(m)) c_bar sqrt(s/m))``
    over the tabulated m > 0, floored at 0.
    """
    best = 0.0
    for m, lo in phi_min.items():
        if m <= 0 or lo <= 0:
            continue
        hi = phi_max[m]
        value = math.sqrt(lo) / loadings_sup * (1.0 - math.sqrt(hi / lo) * c_bar * math.sqrt(s / m))
        best = max(best, value)
    return best


class _ConeSearch:
    """Seeded random search plus coordinate polishing over a cone of directions.

    Directions have unit-scale entries on ``T``; off-support mass is placed
    on a random subset and scaled to a random fraction (up to ``max_ratio``)
    of the weighted on-support l1 norm.
    """

    def __init__(self, gram, loadings, T, value, maximize, max_ratio, strict, seed):
        self.g = gram
        self.w = np.asarray(loadings, dtype=float)
        self.p = gram.shape[0]
        self.T = T
        self.Tc = np.setdiff1d(np.arange(self.p), T)
        self.in_T = np.zeros(self.p, dtype=bool)
        self.in_T[T] = True
        self.value = value
        self.sign = -1.0 if maximize else 1.0
        self.max_ratio = max_ratio
        self.strict = strict
        self.rng = np.random.default_rng(seed)

    def feasible(self, delta):
        on = np.sum(self.w[self.in_T] * np.abs(delta[self.in_T]))
        off = np.sum(self.w[~self.in_T] * np.abs(delta[~self.in_T]))
        if on <= 0:
            return False
        return off < self.max_ratio * on if self.strict else off <= self.max_ratio * on

    def score(self, delta):
        if not self.feasible(delta):
            return np.inf
        return self.sign * self.value(delta)

    def sample(self):
        s = self.T.size
        delta = np.zeros(self.p)
        kind = self.rng.integers(3)
        if kind == 0:
            delta[self.T] = self.rng.choice([-1.0, 1.0], size=s) / self.w[self.T]
        elif kind == 1:
            delta[self.T] = self.rng.standard_normal(s)
        else:
            delta[self.T] = self.rng.choice([-1.0, 1.0], size=s) * self.rng.uniform(0.2, 1.0, size=s)
        if self.Tc.size and self.rng.random() < 0.8:
            k = int(self.rng.integers(1, min(self.Tc.size, max(2 * s, 3)) + 1))
            idx = self.rng.choice(self.Tc, size=k, replace=False)
            vals = self.rng.standard_normal(k)
            on = np.sum(self.w[self.T] * np.abs(delta[self.T]))
            frac = self.rng.uniform(0.0, self.max_ratio) * (0.999 if self.strict else 1.0)
            delta[idx] = vals / np.sum(self.w[idx] * np.abs(vals)) * frac * on
        return delta

    def polish(self, delta, rounds=30):
        best = self.score(delta)
        step = 0.25 * np.max(np.abs(delta))
        # local search on the current pattern keeps the cost independent of p
        coords = np.union1d(self.T, np.flatnonzero(delta))
        for _ in range(rounds):
            improved = False
            for j in coords:
                for direction in (1.0, -1.0):
                    trial = delta.copy()
                    trial[j] += direction * step
                    val = self.score(trial)
                    if val < best - 1e-15 * abs(best):
                        delta, best, improved = trial, val, True
                        break
            if not improved:
                step *= 0.5
                if step < 1e-9 * np.max(np.abs(delta)):
                    break
        return delta, best

    def run(self, n_samples, n_polish=5, extra=()):
        found = [(self.score(d), d) for d in extra]
        for _ in range(n_samples):
            d = self.sample()
            found.append((self.score(d), d))
        found = [f for f in found if np.isfinite(f[0])]
        found.sort(key=lambda t: t[0])
        best = np.inf
        for val, d in found[:n_polish]:
            _, polished = self.polish(d)
            best = min(best, val, polished)
        return self.sign * best


def _quad_norm(gram):
    def norm(delta):
        return math.sqrt(max(float(delta @ gram @ delta), 0.0))

    return norm


def kappa_bar_ratio(delta, gram, loadings, support_T):
    """Objective of ``kappa_bar`` at one direction (inf when infeasible)."""
    T = _check_support(support_T, gram.shape[0])
    in_T = np.zeros(gram.shape[0], dtype=bool)
    in_T[T] = True
    w = np.asarray(loadings, dtype=float)
    den = np.sum(w[in_T] * np.abs(delta[in_T])) - np.sum(w[~in_T] * np.abs(delta[~in_T]))
    if den <= 0:
        return np.inf
    return math.sqrt(T.size) * _quad_norm(gram)(delta) / den


def estimate_kappa_bar(design_or_gram, loadings, support_T, n_samples=2000, seed=0, n_polish=5):
    """Sampled upper bound on ``kappa_bar``.

    Infimum of ``sqrt(s) ||delta||_{2,n} / (|Gamma delta_T|_1 - |Gamma delta_Tc|_1)``
    over ``|Gamma delta_Tc|_1 < |Gamma delta_T|_1``.
    """
    g = _as_gram(design_or_gram)
    T = _check_support(support_T, g.shape[0])
    if T.size == 0:
        raise EmptySupport("kappa_bar is undefined for an empty support")
    if n_samples < 1:
        raise InvalidParameter("n_samples must be >= 1")
    w = np.asarray(loadings, dtype=float)
    search = _ConeSearch(g, w, T, lambda d: kappa_bar_ratio(d, g, w, T), maximize=False,
                         max_ratio=1.0, strict=True, seed=seed)
    return float(search.run(n_samples, n_polish))


def estimate_kappa_restricted(design_or_gram, loadings, support_T, c_bar, n_samples=2000, seed=0,
                              n_polish=5):
    """Sampled upper bound on the restricted eigenvalue over the cone with constant ``c_bar``."""
    g = _as_gram(design_or_gram)
    T = _check_support(support_T, g.shape[0])
    if T.size == 0:
        raise EmptySupport("restricted eigenvalue is undefined for an empty support")
    w = np.asarray(loadings, dtype=float)
    norm = _quad_norm(g)
    s = math.sqrt(T.size)

    def value(d):
        return s * norm(d) / np.sum(w[T] * np.abs(d[T]))

    search = _ConeSearch(g, w, T, value, maximize=False, max_ratio=c_bar, strict=False, seed=seed)
    return float(search.run(n_samples, n_polish))


def estimate_varrho(design_or_gram, score, loadings, support_T, c_bar, beta0=None, n_samples=2000,
                    seed=0, n_polish=5):
    """Sampled lower bound on ``varrho``: the sup of ``|S'delta| / ||delta||_{2,n}`` over the cone.

    The extra l1 constraint ``|Gamma(delta + beta0)|_1 <= c_bar |Gamma beta0|_1``
    is met by shrinking each direction (the ratio is scale invariant), so
    it only matters when ``beta0 = 0``, where the feasible set is empty and
    0 is returned.
    """
    g = _as_gram(design_or_gram)
    T = _check_support(support_T, g.shape[0])
    score = np.asarray(score, dtype=float)
    if T.size == 0 or (beta0 is not None and not np.any(beta0)):
        return 0.0
    w = np.asarray(loadings, dtype=float)
    norm = _quad_norm(g)

    def value(d):
        nd = norm(d)
        return abs(float(score @ d)) / nd if nd > 0 else 0.0

    search = _ConeSearch(g, w, T, value, maximize=True, max_ratio=c_bar, strict=False, seed=seed)
    return float(search.run(n_samples, n_polish))


def composite_error(dataset, beta0):
    """``y - X beta0``: noise plus approximation error at the oracle target."""
    return dataset.y - dataset.x @ np.asarray(beta0, dtype=float)


def score_vector(design, composite):
    """``E_n[x_i e_i] / sqrt(E_n[e_i^2])`` for the composite error ``e``."""
    x = _design_of(design)
    e = np.asarray(composite, dtype=float).reshape(-1)
    if e.shape[0] != x.shape[0]:
        raise DimensionMismatch("composite error must have n entries")
    scale = math.sqrt(float(np.mean(e**2)))
    if scale == 0.0:
        raise ZeroCompositeError("composite error is identically zero")
    return x.T @ e / x.shape[0] / scale


def event_check(lam, n, score, loadings, c):
    """True iff ``lam / n >= c * max_j |score_j| / gamma_j``."""
    return bool(lam / n >= c * float(np.max(np.abs(np.asarray(score)) / np.asarray(loadings))))


def scheme_event_check(scheme, score, n, c=None):
    c = scheme.params.get("c", 1.0) if c is None else c
    return event_check(scheme.lam, n, score, scheme.loadings, c)


@dataclass
class DesignReport:
    phi_min: dict
    phi_max: dict
    re_lower_bound: float
    kappa_bar_estimate: float | None
    varrho_estimate: float | None
    event_holds: bool | None
    score_sup: float | None
    support_T: list = field(default_factory=list)
    c_bar: float = 1.0
    notes: list = field(default_factory=list)

    def __post_init__(self):
        for m in self.phi_min:
            if self.phi_min[m] > self.phi_max[m] + 1e-12:
                raise InvalidParameter(f"phi_min({m}) exceeds phi_max({m})")

    def to_dict(self):
        return {
            "phi_min": {str(k): v for k, v in self.phi_min.items()},
            "phi_max": {str(k): v for k, v in self.phi_max.items()},
            "re_lower_bound": self.re_lower_bound,
            "kappa_bar_estimate": self.kappa_bar_estimate,
            "varrho_estimate": self.varrho_estimate,
            "event_holds": self.event_holds,
            "score_sup": self.score_sup,
            "support_T": list(self.support_T),
            "c_bar": self.c_bar,
            "notes": list(self.notes),
        }


def design_report(design_or_gram, ms, support_T=(), c_bar=None, c=1.01, loadings=None,
                  composite=None, lam=None, n_samples=2000, seed=0, randomized=False):
    """Collect every diagnostic into a :class:`DesignReport`.

    Score-based entries (score sup-norm, event, varrho) need the design
    rows and a composite error; they are ``None`` for a bare gram matrix.
    """
    g = _as_gram(design_or_gram)
    p = g.shape[0]
    T = _check_support(support_T, p)
    c_bar = (c + 1.0) / (c - 1.0) if c_bar is None else c_bar
    loadings = np.ones(p) if loadings is None else np.asarray(loadings, dtype=float)
    notes = []
    ms = [m for m in ms if not (m == 0 and T.size == 0)]
    phi_min, phi_max = sparse_eigen_table(g, ms, T, randomized=randomized, seed=seed)
    bound = re_lower_bound(phi_min, phi_max, max(T.size, 1), c_bar, float(np.max(loadings)))
    kappa = None
    if T.size:
        kappa = estimate_kappa_bar(g, loadings, T, n_samples=n_samples, seed=seed)
    else:
        notes.append("kappa_bar skipped: empty support")
    varrho = score_sup = event = None
    if composite is not None and isinstance(design_or_gram, Dataset):
        score = score_vector(design_or_gram, composite)
        score_sup = float(np.max(np.abs(score)))
        varrho = estimate_varrho(g, score, loadings, T, c_bar, n_samples=n_samples, seed=seed)
        if lam is not None:
            event = event_check(lam, design_or_gram.n, score, loadings, c)
    return DesignReport(phi_min, phi_max, bound, kappa, varrho, event, score_sup,
                        T.tolist(), c_bar, notes)
