import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singular_poisson.errors import (
    BadInterval,
    InvalidOrder,
    NonpositiveIntensity,
    OutOfInterval,
    SmoothPartNonzeroAtOrigin,
)
from singular_poisson.model import (
    cumulative_intensity,
    fingerprint,
    hellinger_F,
    intensity_at,
    inverse_cumulative,
    model_from_text,
    model_to_text,
    total_intensity,
    validate,
)

from conftest import make_model, random_models
from oracles import lambda_oracle


def test_validate_accepts_pure_power():
    validate(make_model())


def test_validate_rejects_constant_with_positive_order():
    with pytest.raises(SmoothPartNonzeroAtOrigin):
        validate(make_model(psi=(0.3, 0.0, 1.0, 0.0)))


def test_validate_rejects_negative_intensity():
    with pytest.raises(NonpositiveIntensity):
        validate(make_model(a=0.5, b=0.5, p=-0.5, psi=(-1.0, 0.0, 0.0, 0.0)))


@pytest.mark.parametrize("p", [0.0, 1.0, -1.0, 1.5, float("nan")])
def test_validate_rejects_order(p):
    with pytest.raises(InvalidOrder):
        validate(make_model(p=p))


@pytest.mark.parametrize("alpha,beta,theta", [(-0.1, 1.5, 1.0), (0.5, 2.5, 1.0), (0.5, 1.5, 1.7), (1.2, 0.8, 1.0)])
def test_validate_rejects_interval(alpha, beta, theta):
    with pytest.raises(BadInterval):
        validate(make_model(alpha=alpha, beta=beta, theta=theta))


def test_validate_rejects_psi_dominating_near_zero():
    # p < 0 with a large negative constant: fine far away, negative close to the grid gaps
    with pytest.raises(NonpositiveIntensity):
        validate(make_model(a=1.0, b=1.0, p=-0.5, psi=(-0.9, 0.0, 0.0, 0.0)))


def test_intensity_examples():
    assert intensity_at(make_model(), 1.25) == pytest.approx(0.5, rel=1e-15)
    assert intensity_at(make_model(a=1, b=2, p=-0.5), 1.0) == math.inf
    m = make_model(a=1, b=2, p=-0.5, psi=(0.0, 0.0, 1.0, 0.0))
    assert intensity_at(m, 0.75) == pytest.approx(1 * 0.25**-0.5 + 0.0625, rel=1e-14)


def test_intensity_at_singular_point():
    assert intensity_at(make_model(p=0.5, psi=(0.0, 0.2, 0.0, 0.0)), 1.0) == 0.0
    assert intensity_at(make_model(p=-0.3, psi=(0.2, 0.0, 0.0, 0.0)), 1.0) == math.inf


def test_cumulative_examples(power_model):
    assert cumulative_intensity(power_model, 2.0) == pytest.approx(4 / 3, rel=1e-14)
    assert cumulative_intensity(power_model, 0.0) == 0.0
    assert total_intensity(power_model) == pytest.approx(4 / 3, rel=1e-14)


def test_cumulative_derived_example():
    m = make_model(a=1, b=2, p=-0.5, psi=(0.0, 0.0, 1.0, 0.0))
    assert cumulative_intensity(m, 2.0) == pytest.approx(lambda_oracle(m, 2.0), rel=1e-10)


@pytest.mark.parametrize("model", random_models(20, seed=11))
def test_cumulative_matches_quadrature(model):
    for t in (0.3, model.theta, 1.7, model.T):
        assert cumulative_intensity(model, t) == pytest.approx(lambda_oracle(model, t), rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_cumulative_nondecreasing(seed):
    model = random_models(1, seed=seed)[0]
    t = np.linspace(0, model.T, 5001)
    lam = cumulative_intensity(model, t)
    assert lam[0] == 0.0
    assert np.all(np.diff(lam) >= 0)


@pytest.mark.parametrize("model", random_models(8, seed=3) + [make_model(p=-0.5, psi=(0.3, 0.1, 0.0, 0.0))])
def test_inverse_cumulative_round_trip(model):
    t = np.linspace(0.01, 1.99, 199)
    back = inverse_cumulative(model, cumulative_intensity(model, t))
    assert np.max(np.abs(back - t)) < 1e-10
    # close to the singular point t is ill-conditioned; Lambda must still match
    near = model.theta + np.concatenate([-np.geomspace(1e-10, 1e-2, 30), np.geomspace(1e-10, 1e-2, 30)])
    y = cumulative_intensity(model, near)
    assert np.max(np.abs(cumulative_intensity(model, inverse_cumulative(model, y)) - y)) < 1e-12 * total_intensity(model)


def test_hellinger_zero_shift(power_model):
    assert hellinger_F(power_model, 0.0) == 0.0


def test_hellinger_symmetric():
    m = make_model(a=1.3, b=1.3, p=-0.4, psi=(0.2, 0.0, 0.5, 0.0))
    for u in (0.01, 0.1, 0.3):
        assert hellinger_F(m, u) == pytest.approx(hellinger_F(m, -u), rel=1e-8)


def test_hellinger_riemann_oracle(power_model):
    # midpoint rule with 10**7 cells
    n = 10**7
    total = 0.0
    h = 2.0 / n
    for start in range(0, n, 10**6):
        t = (np.arange(start, start + 10**6) + 0.5) * h
        total += np.sum((np.abs(t - 1.1) ** 0.25 - np.abs(t - 1.0) ** 0.25) ** 2) * h
    assert hellinger_F(power_model, 0.1) == pytest.approx(total, abs=1e-6)


@pytest.mark.parametrize("p", [-0.5, 0.5])
def test_hellinger_power_lower_bound(p):
    m = make_model(p=p, psi=(0.0, 0.1, 0.0, 0.0))
    u = np.concatenate([-np.geomspace(1e-4, 0.4, 15), np.geomspace(1e-4, 0.4, 15)])
    ratio = np.array([hellinger_F(m, v) for v in u]) / np.abs(u) ** (p + 1)
    assert ratio.min() > 0.1


def test_hellinger_out_of_interval(power_model):
    with pytest.raises(OutOfInterval):
        hellinger_F(power_model, 0.6)


@pytest.mark.parametrize("model", random_models(5, seed=5))
def test_model_text_round_trip(model):
    back = model_from_text(model_to_text(model))
    assert back == model
    assert fingerprint(back) == fingerprint(model)


def test_fingerprint_changes_with_theta(power_model):
    assert fingerprint(power_model) != fingerprint(power_model.with_theta(1.1))
