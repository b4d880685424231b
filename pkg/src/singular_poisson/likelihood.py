"""Log-likelihood ratios for the shift parameter.

For a batch of ``n`` paths with pooled event times ``t_j``

    ln L(theta, theta1) = sum_j ln(S_theta(t_j) / S_theta1(t_j))
                          - n (Lambda_theta(T) - Lambda_theta1(T)),

the integral term being exact through the closed-form cumulative intensity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import OutOfInterval
from .model import hellinger_between, total_intensity

__all__ = [
    "LogLikelihoodValue",
    "log_likelihood_ratio",
    "normalized_llr",
    "sqrt_llr",
    "log_likelihood_curve",
    "event_log_ratio_sums",
    "theta_of_u",
    "local_interval",
    "hellinger_majorant",
]


@dataclass(frozen=True)
class LogLikelihoodValue:
    value: float
    at_event_singularity: bool = False

    def __float__(self):
        return float(self.value)


@njit(cache=True)
def _log_shape(x, a, b, p, c0, c1, c2, c3):
    if c0 == 0.0 and c1 == 0.0 and c2 == 0.0 and c3 == 0.0:
        if x == 0.0:
            return np.inf if p < 0 else -np.inf
        if x < 0:
            return np.log(a) + p * np.log(-x)
        return np.log(b) + p * np.log(x)
    psi = c0 + x * (c1 + x * (c2 + x * c3))
    if x == 0.0:
        if p < 0:
            return np.inf
        return np.log(psi) if psi > 0 else -np.inf
    if x < 0:
        return np.log(a * (-x) ** p + psi)
    return np.log(b * x**p + psi)


@njit(cache=True)
def _curve_kernel(times, thetas, a, b, p, c0, c1, c2, c3, out):
    for i in range(thetas.size):
        th = thetas[i]
        acc = 0.0
        for t in times:
            acc += _log_shape(t - th, a, b, p, c0, c1, c2, c3)
        out[i] = acc


@njit(cache=True)
def _ratio_kernel(times, owner, theta, theta1, a, b, p, c0, c1, c2, c3, out):
    for k in range(times.size):
        t = times[k]
        out[owner[k]] += _log_shape(t - theta, a, b, p, c0, c1, c2, c3) - _log_shape(
            t - theta1, a, b, p, c0, c1, c2, c3
        )


def _params(model):
    return (float(model.a), float(model.b), float(model.p), *map(float, model.smooth.coefficients))


def _pooled(batch):
    return np.ascontiguousarray(batch.times, dtype=np.float64), batch.n


def _check_theta(model, *thetas):
    for th in thetas:
        if not model.alpha < th < model.beta:
            raise OutOfInterval(f"theta={th} outside ({model.alpha}, {model.beta})")


def log_likelihood_curve(batch, model, thetas):
    """ln L(theta) up to an additive constant, for each theta in ``thetas``.

    Equals ``sum_j ln S_theta(t_j) - n Lambda_theta(T)``; differences between
    entries are log-likelihood ratios.
    """
    times, n = _pooled(batch)
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    out = np.empty(thetas.size)
    _curve_kernel(times, thetas, *_params(model), out)
    return out - n * np.asarray(total_intensity(model, thetas))


def log_likelihood_ratio(batch, model, theta, theta1):
    """ln L(theta, theta1, X^n) as an extended real with an event flag.

    The flag is set when an event coincides exactly with ``theta`` or
    ``theta1``; the value is then +inf (p < 0) or -inf (p > 0) from the side
    carrying the coincidence, and nan if both sides do.
    """
    _check_theta(model, theta, theta1)
    if theta == theta1:
        return LogLikelihoodValue(0.0, False)
    times, n = _pooled(batch)
    hit = bool(np.any(times == theta) or np.any(times == theta1))
    out = np.zeros(1)
    _ratio_kernel(times, np.zeros(times.size, dtype=np.int64), float(theta), float(theta1), *_params(model), out)
    value = out[0] - n * (total_intensity(model, theta) - total_intensity(model, theta1))
    return LogLikelihoodValue(float(value), hit)


def event_log_ratio_sums(times, owner, n_groups, model, theta, theta1):
    """Per-group sums of ln(S_theta(t) / S_theta1(t)) over pooled events."""
    out = np.zeros(n_groups)
    _ratio_kernel(np.ascontiguousarray(times, dtype=np.float64), np.ascontiguousarray(owner, dtype=np.int64),
                  float(theta), float(theta1), *_params(model), out)
    return out


def local_interval(model, n):
    """U_n = (n**nu (alpha - theta), n**nu (beta - theta))."""
    scale = n ** model.rate_exponent
    return scale * (model.alpha - model.theta), scale * (model.beta - model.theta)


def theta_of_u(model, n, u, theta_true=None):
    theta_true = model.theta if theta_true is None else theta_true
    return theta_true + u * n ** (-model.rate_exponent)


def normalized_llr(batch, model, theta_true, u):
    """ln Z_n(u) = ln L(theta_true + u n**-nu, theta_true)."""
    m = model.with_theta(theta_true)
    lo, hi = local_interval(m, batch.n)
    if not lo < u < hi:
        raise OutOfInterval(f"u={u} outside U_n=({lo}, {hi})")
    if u == 0:
        return LogLikelihoodValue(0.0, bool(np.any(batch.times == theta_true)))
    return log_likelihood_ratio(batch, m, theta_of_u(m, batch.n, u), theta_true)


def sqrt_llr(batch, model, theta_true, u):
    """Z_n(u)**(1/2)."""
    v = normalized_llr(batch, model, theta_true, u).value
    if v == -math.inf:
        return 0.0
    return math.exp(0.5 * v)


def hellinger_majorant(model, n, u1, u2):
    """n * integral (sqrt(S_theta_u1) - sqrt(S_theta_u2))**2 dt."""
    return n * hellinger_between(model, theta_of_u(model, n, u1), theta_of_u(model, n, u2))
