import numpy as np
import pytest

from sqrtlasso.core import Dataset
from sqrtlasso.penalty import Algorithm1Params, ideal_loadings, run_algorithm1
from sqrtlasso.simulate import (
    ConfigError,
    McConfig,
    beta_star_vector,
    gen_design,
    gen_errors,
    list_presets,
    load_preset,
    oracle_target,
    run_mc,
)
from sqrtlasso.exceptions import InvalidParameter


def oracle_value(target, sigma, n):
    return target.c_s**2 + sigma**2 * target.s / n


def test_design_independent_columns():
    x, scales = gen_design(2000, 10, 0.0, seed=0)
    corr = np.corrcoef(x, rowvar=False)
    off = corr[~np.eye(10, dtype=bool)]
    assert abs(off.mean()) <= 3 / np.sqrt(2000)
    np.testing.assert_allclose(np.mean(x**2, axis=0), 1.0, atol=1e-10)
    assert scales.shape == (10,)


def test_design_ar1_correlation():
    x, _ = gen_design(5000, 6, 0.5, seed=1)
    lag1 = [np.corrcoef(x[:, j], x[:, j + 1])[0, 1] for j in range(5)]
    assert np.all(np.abs(np.array(lag1) - 0.5) <= 0.05)


def test_design_validation_and_determinism():
    with pytest.raises(InvalidParameter):
        gen_design(10, 3, 1.0, seed=0)
    a, _ = gen_design(10, 3, 0.3, seed=5)
    b, _ = gen_design(10, 3, 0.3, seed=5)
    np.testing.assert_array_equal(a, b)


def test_beta_star_rules():
    np.testing.assert_allclose(beta_star_vector("InvJ32", 3), [1, 2**-1.5, 3**-1.5])
    np.testing.assert_allclose(beta_star_vector("InvJ2", 3), [1, 0.25, 1 / 9])
    np.testing.assert_allclose(beta_star_vector("Custom", 4, [1, 2]), [1, 2, 0, 0])
    with pytest.raises(InvalidParameter):
        beta_star_vector("Custom", 1, [1, 2])


def test_error_laws():
    eps, scales = gen_errors(100_000, "Gaussian", 1.0, seed=0)
    assert abs(np.var(eps) - 1) <= 0.02 and np.all(scales == 1.0)
    eps, _ = gen_errors(100_000, "T4Scaled", 1.0, seed=1)
    assert abs(np.var(eps) - 1) <= 0.05
    eps, _ = gen_errors(100_000, "T2", 1.0, seed=2)
    assert abs(np.median(np.abs(eps)) - 0.8165) < 0.02  # t(2) median |T| = sqrt(2/3)
    x, _ = gen_design(300, 5, 0.5, seed=3)
    eps, scales = gen_errors(300, "HeteroskedasticGaussian", 0.7, x, np.ones(5), seed=4)
    assert np.mean(scales**2) == pytest.approx(0.49, rel=1e-10)
    with pytest.raises(InvalidParameter):
        gen_errors(10, "HeteroskedasticGaussian", 1.0, seed=0)
    with pytest.raises(InvalidParameter):
        gen_errors(10, "Gaussian", -1.0, seed=0)


def test_oracle_zero_and_single_column():
    x, _ = gen_design(40, 6, 0.5, seed=0)
    t = oracle_target(np.zeros(40), x, 1.0)
    assert t.s == 0 and t.c_s == 0 and np.all(t.beta0 == 0)
    t = oracle_target(25.0 * x[:, 2], x, 0.01)
    assert t.support_T.tolist() == [2] and t.c_s == pytest.approx(0.0, abs=1e-10)


def test_oracle_invariant_c_s():
    x, _ = gen_design(30, 8, 0.5, seed=1)
    f = x @ beta_star_vector("InvJ32", 8)
    t = oracle_target(f, x, 0.5)
    assert t.c_s**2 == pytest.approx(np.mean((f - x @ t.beta0) ** 2), rel=1e-10)


def test_nested_oracle_close_to_exhaustive():
    rng = np.random.default_rng(2)
    for trial in range(5):
        x = Dataset.from_raw(rng.standard_normal((30, 8)), np.zeros(30)).x
        f = x @ (rng.standard_normal(8) * rng.uniform(0, 1, 8) ** 3)
        sigma = 1.0
        nested = oracle_target(f, x, sigma, method="nested", k_max=4)
        exact = oracle_target(f, x, sigma, method="exhaustive", k_max=4)
        assert oracle_value(exact, sigma, 30) <= oracle_value(nested, sigma, 30) + 1e-12
        assert oracle_value(nested, sigma, 30) <= 1.05 * oracle_value(exact, sigma, 30)


def test_oracle_c_s_non_increasing_in_k():
    x, _ = gen_design(50, 12, 0.5, seed=3)
    f = x @ beta_star_vector("InvJ2", 12)
    values = [oracle_target(f, x, 0.0, method="nested", k_max=k).c_s for k in range(6)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_config_validation_paths():
    good = {"n": 20, "p": 5, "sigmas": [1.0], "n_reps": 1, "seed": 1}
    McConfig.from_dict(good)
    cases = [
        ({**good, "n_reps": 0}, "$.n_reps"),
        ({**good, "sigmas": [1.0, -1.0]}, "$.sigmas[1]"),
        ({**good, "estimators": ["Nope"]}, "$.estimators[0]"),
        ({**good, "unknown": 1}, "$.unknown"),
        ({k: v for k, v in good.items() if k != "seed"}, "$.seed"),
        ({**good, "algorithm1": {"bad": 1}}, "$.algorithm1"),
        ({**good, "beta_star_rule": "Custom"}, "$.beta_star"),
    ]
    for raw, path in cases:
        with pytest.raises(ConfigError) as err:
            McConfig.from_dict(raw)
        assert err.value.path == path


def test_presets_load():
    names = list_presets()
    for required in ("fig1-desk", "fig1-desk-t4", "fig4-desk", "noiseless", "t2-desk"):
        assert required in names
        load_preset(required)
    with pytest.raises(ConfigError):
        load_preset("missing")


def test_noiseless_run_zero_risk():
    report = run_mc(load_preset("noiseless"))
    assert report.get("SqrtLasso", 0.0)["mean_risk"] <= 1e-7
    assert report.get("OlsPostSqrtLasso", 0.0)["mean_risk"] <= 1e-12


def test_run_mc_deterministic_and_shaped():
    cfg = McConfig(n=40, p=30, sigmas=[0.5, 1.0], n_reps=3, seed=7, beta_star_rule="InvJ2",
                   error_law="HeteroskedasticGaussian")
    a = run_mc(cfg)
    b = run_mc(McConfig(**{**cfg.to_dict(), "threads": 2}))
    assert a.to_csv() == b.to_csv()
    assert len(a.rows) == 7 * 2
    for row in a.rows:
        assert row["mean_risk"] >= 0 and 0 <= row["mean_support"] <= 30
        assert row["n_success"] + row["n_failed"] == 3
    header = a.to_csv().splitlines()[0].split(",")
    assert header[:3] == ["estimator", "sigma", "mean_risk"]
    assert a.summary()["config"]["seed"] == 7


def test_heteroskedastic_loadings_approach_ideal():
    errs = []
    beta_star = beta_star_vector("InvJ2", 50)
    for n in (200, 800):
        per = []
        for rep in range(5):
            x, scales = gen_design(n, 50, 0.5, seed=100 + rep)
            eps, sd = gen_errors(n, "HeteroskedasticGaussian", 1.0, x, beta_star, seed=200 + rep)
            noise = sd * eps
            ds = Dataset(y=x @ beta_star + noise, x=x, col_scales=scales)
            ideal = ideal_loadings(ds, noise)
            assert np.all(ideal >= 1)
            scheme, _ = run_algorithm1(ds, Algorithm1Params())
            per.append(np.mean((scheme.loadings - ideal) ** 2))
        errs.append(np.mean(per))
    assert errs[1] < errs[0]
