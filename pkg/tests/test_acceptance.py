"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear in the
terminal summary) or ``python3 tests/test_acceptance.py``.
"""

import itertools
import time

import numpy as np
import pytest

from sqrtlasso.certify import check_kkt
from sqrtlasso.core import Dataset
from sqrtlasso.diagnostics import estimate_kappa_bar, sparse_eigenvalues
from sqrtlasso.penalty import PenaltyKind, PenaltyScheme, lambda_sqrt_lasso
from sqrtlasso.simulate import McConfig, load_preset, run_mc
from sqrtlasso.solvers import SolverOptions, fit

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow


def record(number, title, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def instance(n, p, seed, t_errors=False, s=None):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    s = min(p, 5) if s is None else s
    beta = np.zeros(p)
    beta[rng.choice(p, size=s, replace=False)] = rng.uniform(0.5, 2.0, s) * rng.choice([-1, 1], s)
    eps = rng.standard_t(4, n) / np.sqrt(2) if t_errors else rng.standard_normal(n)
    return Dataset.from_raw(x, x @ beta + eps), rng


def sqrt_lambda_max(ds, loadings):
    return ds.n * np.max(np.abs(ds.x.T @ ds.y) / ds.n / loadings) / np.sqrt(np.mean(ds.y**2))


def test_criterion_01_kkt_certification():
    start = time.perf_counter()
    grid = list(itertools.product([30, 100], [10, 50, 200], [False, True]))
    worst_violation = worst_gap = 0.0
    failures = converged = 0
    for k in range(200):
        n, p, heavy = grid[k % len(grid)]
        ds, rng = instance(n, p, 1000 + k, t_errors=heavy)
        loadings = rng.uniform(1.0, 1.5, p)
        lam = rng.uniform(0.3, 1.0) * lambda_sqrt_lasso(n, p)
        scheme = PenaltyScheme(lam, loadings)
        res = fit(ds, scheme)
        if not res.converged:
            continue
        converged += 1
        cert = check_kkt(res, ds, scheme)
        worst_violation = max(worst_violation, cert.max_constraint_violation)
        worst_gap = max(worst_gap, cert.relative_gap)
        if cert.max_constraint_violation > 1e-6 or cert.relative_gap > 1e-8:
            failures += 1
    elapsed = time.perf_counter() - start
    ok = failures == 0 and converged == 200 and elapsed <= 60
    record(1, "KKT certification", ok,
           f"{converged}/200 converged, {failures} failures, max violation {worst_violation:.1e}, "
           f"max rel gap {worst_gap:.1e}, {elapsed:.1f}s")


def test_criterion_02_noiseless_recovery():
    start = time.perf_counter()
    worst = 0.0
    for k in range(50):
        rng = np.random.default_rng(2000 + k)
        s = 1 + k % 3
        n, p = 40, 20
        q, _ = np.linalg.qr(rng.standard_normal((n, p)))
        x = q * np.sqrt(n)
        beta0 = np.zeros(p)
        T = rng.choice(p, size=s, replace=False)
        beta0[T] = rng.uniform(0.5, 3.0, s) * rng.choice([-1, 1], s)
        ds = Dataset(y=x @ beta0, x=x, col_scales=np.ones(p))
        kappa = estimate_kappa_bar(ds, np.ones(p), T, n_samples=200, seed=k)
        lam = 0.5 * n * kappa / np.sqrt(s)
        res = fit(ds, PenaltyScheme(lam, np.ones(p)))
        worst = max(worst, float(np.max(np.abs(res.beta - beta0))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-7 and elapsed <= 10
    record(2, "exact noiseless recovery", ok, f"max error {worst:.1e}, {elapsed:.1f}s")


def test_criterion_03_scale_equivariance():
    start = time.perf_counter()
    sqrt_bad = lasso_bad = 0
    worst = 0.0
    for k in range(100):
        ds, rng = instance(40, 30, 3000 + k)
        loadings = rng.uniform(1.0, 1.5, 30)
        sqrt_scheme = PenaltyScheme(0.3 * sqrt_lambda_max(ds, loadings), loadings)
        lasso_max = 2 * np.max(np.abs(ds.x.T @ ds.y) / loadings)
        lasso_scheme = PenaltyScheme(0.3 * lasso_max, loadings, PenaltyKind.LASSO_KNOWN_SIGMA)
        base_sqrt = fit(ds, sqrt_scheme).beta
        base_lasso = fit(ds, lasso_scheme).beta
        sqrt_fail = lasso_fail = False
        for c in (0.5, 3.0, 100.0):
            scaled = ds.with_response(c * ds.y)
            dev = np.max(np.abs(fit(scaled, sqrt_scheme).beta - c * base_sqrt))
            tol = 1e-7 * c * (1 + np.max(np.abs(base_sqrt)))
            worst = max(worst, dev / tol)
            sqrt_fail |= dev > tol
            dev_l = np.max(np.abs(fit(scaled, lasso_scheme).beta - c * base_lasso))
            lasso_fail |= dev_l > 1e-7 * c * (1 + np.max(np.abs(base_lasso)))
        sqrt_bad += sqrt_fail
        lasso_bad += lasso_fail
    elapsed = time.perf_counter() - start
    ok = sqrt_bad == 0 and lasso_bad >= 90 and elapsed <= 30
    record(3, "scale equivariance", ok,
           f"sqrt-lasso violations {sqrt_bad}/100 (worst {worst:.1e} of tol), "
           f"lasso control fails {lasso_bad}/100, {elapsed:.1f}s")


def test_criterion_04_cross_solver():
    start = time.perf_counter()
    worst = 0.0
    for k in range(50):
        ds, rng = instance(50, 100, 4000 + k)
        loadings = rng.uniform(1.0, 1.5, 100)
        scheme = PenaltyScheme(0.3 * sqrt_lambda_max(ds, loadings), loadings)
        cd = fit(ds, scheme)
        fo = fit(ds, scheme, SolverOptions(method="fo"))
        worst = max(worst, abs(fo.objective - cd.objective) / abs(cd.objective))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed <= 120
    record(4, "CD vs first-order agreement", ok, f"max rel diff {worst:.1e}, {elapsed:.1f}s")


_FIG1 = {}


def fig1_reports():
    if not _FIG1:
        start = time.perf_counter()
        _FIG1["gauss"] = run_mc(load_preset("fig1-desk"))
        _FIG1["t4"] = run_mc(load_preset("fig1-desk-t4"))
        _FIG1["elapsed"] = time.perf_counter() - start
    return _FIG1


def test_criterion_05_figure1_risk():
    reps = fig1_reports()
    sigmas = reps["gauss"].config["sigmas"]
    worst_ratio, worst_law = 0.0, 0.0
    notes = []
    for law in ("gauss", "t4"):
        rep = reps[law]
        for s in sigmas:
            r_sqrt = rep.get("SqrtLasso", s)["mean_risk"]
            r_lasso = rep.get("LassoKnownSigma", s)["mean_risk"]
            dev = abs(r_sqrt - r_lasso) / r_lasso
            worst_ratio = max(worst_ratio, dev)
            if dev > 0.15:
                notes.append(f"{law} sigma={s}: {r_sqrt:.3f} vs {r_lasso:.3f}")
    for est in ("SqrtLasso", "LassoKnownSigma"):
        for s in sigmas:
            g = reps["gauss"].get(est, s)["mean_risk"]
            t = reps["t4"].get(est, s)["mean_risk"]
            worst_law = max(worst_law, abs(t - g) / g)
    ok = worst_ratio <= 0.15 and worst_law <= 0.10 and reps["elapsed"] <= 900
    detail = (f"max |sqrt-lasso/lasso - 1| {worst_ratio:.3f}, max t4-vs-Gaussian {worst_law:.3f}, "
              f"{reps['elapsed']:.0f}s")
    if notes:
        detail += "; over 15%: " + ", ".join(notes)
    record(5, "Figure-1 risk parity", ok, detail)


def test_criterion_06_figure3_support():
    reps = fig1_reports()
    bad = []
    for law in ("gauss", "t4"):
        rep = reps[law]
        for s in rep.config["sigmas"]:
            a = rep.get("SqrtLasso", s)["mean_support"]
            b = rep.get("LassoKnownSigma", s)["mean_support"]
            if a > b:
                bad.append(f"{law} sigma={s}: {a:.2f} > {b:.2f}")
    record(6, "Figure-3 support ordering", not bad, "; ".join(bad) or "all grid points ordered")


def test_criterion_07_heteroskedastic():
    start = time.perf_counter()
    rep = run_mc(load_preset("fig4-desk"))
    elapsed = time.perf_counter() - start
    worst = 0.0
    for s in rep.config["sigmas"]:
        a = rep.get("OlsPostSqrtLasso", s)["mean_risk"]
        b = rep.get("OlsPostIdealSqrtLasso", s)["mean_risk"]
        worst = max(worst, abs(a - b) / b)
    ok = worst <= 0.25 and elapsed <= 900
    record(7, "heteroskedastic post vs ideal", ok, f"max rel gap {worst:.3f}, {elapsed:.0f}s")


def test_criterion_08_event_coverage():
    start = time.perf_counter()
    cfg = McConfig(n=500, p=100, sigmas=[1.0], n_reps=500, seed=20240604, beta_star_rule="Custom",
                   beta_star=[1.0] * 5, error_law="Gaussian", estimators=["SqrtLasso"],
                   sqrt_penalty="algorithm1")
    rep = run_mc(cfg)
    coverage = rep.get("SqrtLasso", 1.0)["event_coverage"]
    elapsed = time.perf_counter() - start
    ok = coverage >= 0.90 and elapsed <= 300
    record(8, "penalty event coverage", ok, f"coverage {coverage:.3f} over 500 reps, {elapsed:.0f}s")


def test_criterion_09_sparse_eigen_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    worst = 0.0
    for k in range(20):
        p = int(rng.integers(3, 9))
        a = rng.standard_normal((p + 3, p))
        g = a.T @ a / (p + 3)
        t_size = int(rng.integers(0, 3))
        T = sorted(rng.choice(p, size=t_size, replace=False).tolist())
        m = int(rng.integers(1, p - t_size + 1))
        lo, hi = sparse_eigenvalues(g, m, T)
        rest = [j for j in range(p) if j not in T]
        blo, bhi = np.inf, -np.inf
        for size in range(0, m + 1):
            for extra in itertools.combinations(rest, size):
                idx = T + list(extra)
                if not idx:
                    continue
                ev = np.linalg.eigvalsh(g[np.ix_(idx, idx)])
                blo, bhi = min(blo, ev[0]), max(bhi, ev[-1])
        worst = max(worst, abs(lo - blo), abs(hi - bhi))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed <= 10
    record(9, "sparse eigenvalue oracle", ok, f"max abs diff {worst:.1e}, {elapsed:.1f}s")


def test_criterion_10_t2_consistency():
    start = time.perf_counter()
    big = load_preset("t2-desk")
    small = McConfig.from_dict({**big.to_dict(), "n": 200})
    row_big = run_mc(big).get("SqrtLasso", 1.0)
    row_small = run_mc(small).get("SqrtLasso", 1.0)
    med_big, med_small = row_big["median_risk"], row_small["median_risk"]
    elapsed = time.perf_counter() - start
    ok = med_big < med_small and elapsed <= 600
    record(10, "t(2) consistency trend", ok,
           f"median risk n=200 {med_small:.3f} (support {row_small['mean_support']:.2f}), "
           f"n=800 {med_big:.3f} (support {row_big['mean_support']:.2f}), {elapsed:.0f}s")


def test_criterion_11_repeated_regressor():
    start = time.perf_counter()
    worst = 0.0
    for k in range(50):
        ds, rng = instance(60, 40, 5000 + k)
        loadings = rng.uniform(1.0, 1.5, 40)
        scheme = PenaltyScheme(0.3 * sqrt_lambda_max(ds, loadings), loadings)
        j = int(rng.integers(40))
        x2 = np.column_stack([ds.x, ds.x[:, j]])
        ds2 = Dataset(y=ds.y, x=x2, col_scales=np.append(ds.col_scales, ds.col_scales[j]))
        scheme2 = PenaltyScheme(scheme.lam, np.append(loadings, loadings[j]))
        opts = SolverOptions(tol=1e-12)
        a = fit(ds, scheme, opts).objective
        b = fit(ds2, scheme2, opts).objective
        worst = max(worst, abs(a - b) / abs(a))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed <= 30
    record(11, "repeated-regressor invariance", ok, f"max rel change {worst:.1e}, {elapsed:.1f}s")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
