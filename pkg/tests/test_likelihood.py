import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singular_poisson.errors import OutOfInterval
from singular_poisson.experiments import batch_seed, log_z_samples
from singular_poisson.likelihood import (
    event_log_ratio_sums,
    local_interval,
    log_likelihood_curve,
    log_likelihood_ratio,
    normalized_llr,
    sqrt_llr,
    theta_of_u,
)
from singular_poisson.model import fingerprint, hellinger_F, total_intensity
from singular_poisson.sampler import SampleBatch, sample_batch

from conftest import make_model


def _batch(model, *paths):
    counts = np.array([len(p) for p in paths], dtype=np.int64)
    times = np.concatenate([np.asarray(p, dtype=float) for p in paths]) if paths else np.empty(0)
    return SampleBatch(times, counts, fingerprint(model), 0)


def test_same_theta_is_zero(power_model):
    batch = sample_batch(power_model, 10, 3)
    v = log_likelihood_ratio(batch, power_model, 1.2, 1.2)
    assert v.value == 0.0 and not v.at_event_singularity


def test_event_at_theta_infinite_for_negative_order(inf_model):
    batch = _batch(inf_model, [0.8, 1.2])
    v = log_likelihood_ratio(batch, inf_model, 1.2, 1.0)
    assert v.value == math.inf and v.at_event_singularity


def test_event_at_theta_minus_infinite_for_positive_order(power_model):
    batch = _batch(power_model, [0.8, 1.2])
    v = log_likelihood_ratio(batch, power_model, 1.2, 1.0)
    assert v.value == -math.inf and v.at_event_singularity


def test_single_event_example(power_model):
    mpmath.mp.dps = 30

    def lam(theta):
        th = mpmath.mpf(theta)
        f = lambda t: abs(t - th) ** mpmath.mpf(0.5)
        return mpmath.quad(f, [0, th]) + mpmath.quad(f, [th, 2])

    expected = 0.5 * (math.log(0.3) - math.log(0.2)) - float(lam(1.0) - lam(1.1))
    v = log_likelihood_ratio(_batch(power_model, [1.3]), power_model, 1.0, 1.1)
    assert v.value == pytest.approx(expected, abs=1e-9)
    assert not v.at_event_singularity


def test_out_of_interval(power_model):
    batch = sample_batch(power_model, 2, 1)
    with pytest.raises(OutOfInterval):
        log_likelihood_ratio(batch, power_model, 1.6, 1.0)


def test_normalized_example(power_model):
    batch = sample_batch(power_model, 4, 8)
    theta_u = theta_of_u(power_model, 4, 1.0)
    assert theta_u == pytest.approx(1 + 0.3968502629920499, rel=1e-15)
    assert normalized_llr(batch, power_model, 1.0, 1.0).value == log_likelihood_ratio(
        batch, power_model, theta_u, 1.0
    ).value


def test_normalized_zero_and_boundary(power_model):
    batch = sample_batch(power_model, 16, 2)
    assert normalized_llr(batch, power_model, 1.0, 0.0).value == 0.0
    assert sqrt_llr(batch, power_model, 1.0, 0.0) == 1.0
    lo, hi = local_interval(power_model, 16)
    with pytest.raises(OutOfInterval):
        normalized_llr(batch, power_model, 1.0, hi + 1e-9)
    with pytest.raises(OutOfInterval):
        normalized_llr(batch, power_model, 1.0, lo)


def test_sqrt_llr_zero_at_event(power_model):
    theta_u = theta_of_u(power_model, 1, 0.25)
    batch = _batch(power_model, [0.3, theta_u])
    assert sqrt_llr(batch, power_model, 1.0, 0.25) == 0.0


@pytest.mark.parametrize("model", [make_model(), make_model(a=0.8, b=1.4, p=-0.5, psi=(0.3, 0.1, 0.0, 0.0))])
def test_sqrt_llr_mean_below_hellinger_bound(model):
    n, u = 16, 0.7
    lz = log_z_samples(model, n, 10_000, 5, [u])[:, 0]
    sq = np.exp(0.5 * lz)
    bound = math.exp(-0.5 * n * hellinger_F(model, u * n ** -model.rate_exponent))
    assert sq.mean() <= bound + 3 * sq.std(ddof=1) / 100
    # spot-check a few replicates against the direct route
    for r in (0, 1, 9999):
        batch = sample_batch(model, n, batch_seed(5, 1, n, r))
        assert sqrt_llr(batch, model, model.theta, u) == pytest.approx(sq[r], rel=1e-12)


thetas = st.floats(0.55, 1.45)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), thetas, thetas, thetas, st.sampled_from([-0.5, 0.5]))
def test_antisymmetry_and_chain(seed, t0, t1, t2, p):
    model = make_model(p=p, b=1.3, psi=(0.0, 0.1, 0.0, 0.0))
    batch = sample_batch(model, 5, seed)
    l01 = log_likelihood_ratio(batch, model, t0, t1).value
    l10 = log_likelihood_ratio(batch, model, t1, t0).value
    l12 = log_likelihood_ratio(batch, model, t1, t2).value
    l02 = log_likelihood_ratio(batch, model, t0, t2).value
    assert l01 == pytest.approx(-l10, abs=1e-12)
    assert l01 + l12 == pytest.approx(l02, abs=1e-9)


@pytest.mark.parametrize("p,sign", [(0.5, -1), (-0.5, 1)])
def test_divergence_at_events(p, sign):
    model = make_model(p=p)
    event = 1.137
    batch = _batch(model, [0.7, event, 1.6])
    vals = [log_likelihood_ratio(batch, model, event + d, 1.0).value for d in (1e-3, 1e-6, 1e-9)]
    assert np.all(sign * np.diff(vals) > 0)
    assert sign * vals[-1] > sign * vals[0] + abs(p) * math.log(1e5)


def test_curve_matches_ratio(inf_model):
    batch = sample_batch(inf_model, 8, 4)
    grid = np.array([0.6, 0.9, 1.3])
    curve = log_likelihood_curve(batch, inf_model, np.concatenate([grid, [1.0]]))
    for k, th in enumerate(grid):
        assert curve[k] - curve[-1] == pytest.approx(log_likelihood_ratio(batch, inf_model, th, 1.0).value, abs=1e-10)


def test_group_sums_match_batches(power_model):
    batches = [sample_batch(power_model, 4, s) for s in range(5)]
    times = np.concatenate([b.times for b in batches])
    owner = np.repeat(np.arange(5), [b.times.size for b in batches])
    sums = event_log_ratio_sums(times, owner, 5, power_model, 1.2, 1.0)
    drift = 4 * (total_intensity(power_model, 1.2) - total_intensity(power_model, 1.0))
    for b, s in zip(batches, sums):
        assert s - drift == pytest.approx(log_likelihood_ratio(b, power_model, 1.2, 1.0).value, abs=1e-12)
