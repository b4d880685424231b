import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from singular_poisson.errors import ConfigError, DegenerateGrid, MleUndefinedForNegativeP
from singular_poisson.estimators import (
    EstimatorConfig,
    Prior,
    bayes_estimate,
    jittered_grid,
    mle_estimate,
    posterior_grid,
    singular_rule,
    trapezoid_weights,
)
from singular_poisson.likelihood import log_likelihood_curve
from singular_poisson.model import fingerprint
from singular_poisson.sampler import SampleBatch, sample_batch

from conftest import config_run, make_model

EPS_B = 1e-6


def _batch(model, *paths):
    counts = np.array([len(p) for p in paths], dtype=np.int64)
    return SampleBatch(np.concatenate([np.asarray(p, float) for p in paths]), counts, fingerprint(model), 0)


def test_constant_likelihood_posterior_is_prior(power_model):
    post = posterior_grid(None, power_model, Prior(), 512, log_lik=0.0)
    assert np.allclose(post.density, 1 / (power_model.beta - power_model.alpha - 2 * EPS_B), rtol=1e-12)
    assert post.mass() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p,seed", [(0.5, 1), (-0.5, 2), (0.5, 3), (-0.3, 4)])
def test_posterior_mass_one(p, seed):
    model = make_model(p=p)
    post = posterior_grid(sample_batch(model, 32, seed), model, Prior(), 2048)
    assert post.mass() == pytest.approx(1.0, abs=1e-8)
    assert np.all(np.diff(post.thetas) > 0)


def test_posterior_grid_refinement(power_model):
    batch = _batch(power_model, [0.8, 1.05, 1.4])
    coarse = posterior_grid(batch, power_model, Prior(), 2048)
    fine = posterior_grid(batch, power_model, Prior(), 20480)
    assert abs(coarse.mean() - fine.mean()) < 1e-4 * (power_model.beta - power_model.alpha)


def test_grid_too_small(power_model):
    with pytest.raises(DegenerateGrid):
        posterior_grid(None, power_model, Prior(), 63, log_lik=0.0)


def test_bayes_uniform_seam(power_model):
    res = bayes_estimate(None, power_model, Prior(), log_lik_fn=lambda th: np.zeros_like(th))
    assert res.estimate == pytest.approx(1.0, abs=1e-6)
    assert res.estimator_kind == "Bayes"


def test_bayes_truncated_normal_seam(power_model):
    mean, sd = 1.2, 0.1
    lo, hi = (0.5 - mean) / sd, (1.5 - mean) / sd
    phi, Phi = stats.norm.pdf, stats.norm.cdf
    expected = mean + sd * (phi(lo) - phi(hi)) / (Phi(hi) - Phi(lo))
    res = bayes_estimate(None, power_model, Prior("truncated-normal", mean, sd),
                         log_lik_fn=lambda th: np.zeros_like(th))
    assert res.estimate == pytest.approx(expected, abs=1e-6)


def test_prior_rejects_bad_kind():
    with pytest.raises(ConfigError):
        Prior("cauchy")
    with pytest.raises(ConfigError):
        Prior("truncated-normal", 1.0, 0.0)


def test_bayes_event_on_grid_node(inf_model):
    node = jittered_grid(inf_model, 2048)[700]
    batch = _batch(inf_model, [0.3, node, 1.7], [node + 0.01])
    res = bayes_estimate(batch, inf_model)
    assert math.isfinite(res.estimate)
    assert inf_model.alpha < res.estimate < inf_model.beta


def test_jitter_moves_nodes_off_events(power_model):
    grid = jittered_grid(power_model, 2048)
    moved = jittered_grid(power_model, 2048, events=grid[[5, 100]])
    assert not np.isin(moved, grid[[5, 100]]).any()
    assert moved[5] - grid[5] == pytest.approx(1e-12 * power_model.T, rel=1e-3)


def test_mle_negative_order(inf_model):
    with pytest.raises(MleUndefinedForNegativeP):
        mle_estimate(sample_batch(inf_model, 4, 1), inf_model)


@pytest.mark.parametrize("seed", range(6))
def test_mle_beats_brute_force_grid(seed):
    model = make_model(b=1.4, psi=(0.0, 0.2, 0.0, 0.0))
    batch = sample_batch(model, 16, seed)
    res = mle_estimate(batch, model)
    grid = np.linspace(model.alpha + EPS_B, model.beta - EPS_B, 100_000)
    brute = np.max(log_likelihood_curve(batch, model, grid))
    best = log_likelihood_curve(batch, model, [res.estimate])[0]
    assert best >= brute - 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_mle_mirror_symmetry(seed):
    model = make_model(a=1.2, b=1.2, psi=(0.0, 0.0, 0.3, 0.0))
    batch = sample_batch(model, 8, seed)
    est = mle_estimate(batch, model).estimate
    mirrored = mle_estimate(batch.mirrored(model.T), model).estimate
    assert mirrored == pytest.approx(model.T - est, abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([0.5, 0.8, 0.2]), st.integers(1, 40))
def test_estimates_inside_interval(seed, p, n):
    model = make_model(p=p, a=0.7)
    batch = sample_batch(model, n, seed)
    b = bayes_estimate(batch, model).estimate
    m = mle_estimate(batch, model).estimate
    assert model.alpha < b < model.beta
    assert model.alpha + EPS_B * (model.beta - model.alpha) <= m <= model.beta - EPS_B * (model.beta - model.alpha)


@pytest.mark.parametrize("p", [0.5, -0.5])
def test_bayes_grid_doubling(p):
    model = make_model(p=p)
    base = EstimatorConfig()
    doubled = EstimatorConfig(grid_size=2 * base.grid_size)
    for seed in range(20):
        batch = sample_batch(model, 64, 1000 + seed)
        a = bayes_estimate(batch, model, config=base).estimate
        b = bayes_estimate(batch, model, config=doubled).estimate
        assert abs(a - b) < 1e-4 * (model.beta - model.alpha)


def test_bayes_diagnostics(power_model):
    res = bayes_estimate(sample_batch(power_model, 64, 3), power_model)
    d = res.diagnostics
    assert d["grid_size"] >= 2048 and d["refinement_passes"] >= 1
    assert 0 <= d["boundary_mass"] < 1e-3
    lo, hi = d["final_interval"]
    assert lo < res.estimate < hi


def _one_spike_exact(e, p):
    # integral over [0, 1] of |x - e|**p (1 + x**2)
    out = 0.0
    for sgn, r in ((-1, e), (1, 1 - e)):
        out += r ** (p + 1) / (p + 1) * (1 + e**2) + sgn * 2 * e * r ** (p + 2) / (p + 2) + r ** (p + 3) / (p + 3)
    return out


@pytest.mark.parametrize("p", [-0.5, 0.5])
def test_singular_rule_exact_for_half_orders(p):
    e = 0.55
    for cells in (4, 64, 1024):
        x, w = singular_rule(0.0, 1.0, cells, [e], p)
        assert np.sum(w * np.abs(x - e) ** p * (1 + x**2)) == pytest.approx(_one_spike_exact(e, p), rel=1e-12)
    # a smooth integrand without the factor is still integrated, if less sharply
    x, w = singular_rule(0.0, 1.0, 1024, [e], p)
    assert np.sum(w) == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("p", [-0.7, -0.2, 0.3, 0.8])
def test_singular_rule_converges_for_other_orders(p):
    e = 0.55
    errs = []
    for cells in (16, 256):
        x, w = singular_rule(0.0, 1.0, cells, [e], p)
        errs.append(abs(np.sum(w * np.abs(x - e) ** p * (1 + x**2)) / _one_spike_exact(e, p) - 1))
    assert errs[1] < 1e-8 and errs[1] <= errs[0]


@pytest.mark.parametrize("p,tol", [(-0.7, 1e-7), (-0.5, 1e-11), (0.5, 1e-11)])
def test_singular_rule_product_of_spikes(p, tol):
    events = [0.3, 0.55, 0.9]
    x, w = singular_rule(0.0, 1.0, 256, events, p)
    f = np.prod([np.abs(x - e) ** p for e in events], axis=0)
    mpmath.mp.dps = 40
    g = lambda t: mpmath.fprod(abs(t - e) ** p for e in events)
    exact = float(mpmath.quad(g, [0, *events, 1]))
    assert np.sum(w * f) == pytest.approx(exact, rel=tol)


def test_singular_rule_without_events():
    x, w = singular_rule(-1.0, 2.0, 10, [], 0.5)
    assert np.sum(w * x**5) == pytest.approx((2.0**6 - 1.0) / 6, rel=1e-13)
    assert np.all(np.diff(x) > 0)


def test_trapezoid_weights():
    x = np.array([0.0, 0.5, 2.0])
    assert np.allclose(trapezoid_weights(x), [0.25, 1.0, 0.75])


def test_estimator_config_round_trip():
    cfg = EstimatorConfig(grid_size=1024, prior_kind="truncated-normal", prior_mean=1.1, prior_sd=0.2)
    assert EstimatorConfig.from_mapping({k: str(v) for k, v in cfg.to_mapping().items()}) == cfg
    with pytest.raises(ConfigError):
        EstimatorConfig.from_mapping({"grid_size": "many"})


def _median_abs(report, estimator, n, count=200):
    errs = [r["error"] for r in report.rows if r["estimator"] == estimator and r["n"] == n][:count]
    return float(np.median(np.abs(errs)))


@pytest.mark.parametrize("name,estimator", [("rate_p05", "bayes"), ("rate_p05", "mle"), ("rate_pm05", "bayes")])
def test_consistency_along_ladder(name, estimator):
    cfg, report, _ = config_run(name)
    med = [_median_abs(report, estimator, n) for n in cfg.n_ladder]
    assert all(b < a for a, b in zip(med, med[1:])), med
