"""Shift family of intensities with a power singularity.

The base shape is ``s(x) = d(x) |x|**p + psi(x)`` with ``d = a`` left of the
origin and ``d = b`` right of it, and ``psi`` a polynomial of degree at most
three.  The intensity observed on ``[0, T]`` is ``S_theta(t) = s(t - theta)``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    BadInterval,
    InvalidOrder,
    NonpositiveIntensity,
    OutOfInterval,
    SmoothPartNonzeroAtOrigin,
)
from .quadrature import integrate_piecewise

__all__ = [
    "PowerSingularity",
    "SmoothPart",
    "IntensityModel",
    "validate",
    "base_shape",
    "intensity_at",
    "cumulative_intensity",
    "total_intensity",
    "inverse_cumulative",
    "hellinger_between",
    "hellinger_F",
    "model_to_text",
    "model_from_mapping",
    "model_from_text",
    "fingerprint",
]

MODEL_KEYS = ("a", "b", "p", "theta", "T", "alpha", "beta", "psi_c0", "psi_c1", "psi_c2", "psi_c3")
VALIDATION_GRID = 10_000


@dataclass(frozen=True)
class PowerSingularity:
    a: float
    b: float
    p: float


@dataclass(frozen=True)
class SmoothPart:
    """psi(x) = c0 + c1 x + c2 x**2 + c3 x**3."""

    coefficients: tuple = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        c = tuple(float(v) for v in self.coefficients)
        if len(c) > 4:
            raise ValueError("smooth part is at most cubic")
        object.__setattr__(self, "coefficients", c + (0.0,) * (4 - len(c)))

    def __call__(self, x):
        c0, c1, c2, c3 = self.coefficients
        return c0 + x * (c1 + x * (c2 + x * c3))

    def antiderivative(self, x):
        c0, c1, c2, c3 = self.coefficients
        return x * (c0 + x * (c1 / 2 + x * (c2 / 3 + x * c3 / 4)))

    @property
    def is_zero(self):
        return not any(self.coefficients)


@dataclass(frozen=True)
class IntensityModel:
    singularity: PowerSingularity
    smooth: SmoothPart = field(default_factory=SmoothPart)
    theta: float = 1.0
    T: float = 2.0
    theta_interval: tuple = (0.5, 1.5)

    @property
    def a(self):
        return self.singularity.a

    @property
    def b(self):
        return self.singularity.b

    @property
    def p(self):
        return self.singularity.p

    @property
    def alpha(self):
        return self.theta_interval[0]

    @property
    def beta(self):
        return self.theta_interval[1]

    @property
    def rate_exponent(self):
        """nu = 1 / (p + 1): estimation errors scale like n**-nu."""
        return 1.0 / (self.p + 1.0)

    def with_theta(self, theta):
        return replace(self, theta=float(theta))

    @classmethod
    def create(cls, a, b, p, theta, T, alpha, beta, psi=(0.0, 0.0, 0.0, 0.0)):
        return cls(PowerSingularity(float(a), float(b), float(p)), SmoothPart(tuple(psi)),
                   float(theta), float(T), (float(alpha), float(beta)))


def base_shape(model, x):
    """s(x) on [-T, T]; +inf at the origin when p < 0, psi(0) when p > 0."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    with np.errstate(divide="ignore"):
        power = np.where(x < 0, model.a, model.b) * ax ** model.p
    out = power + model.smooth(x)
    if model.p > 0:
        out = np.where(x == 0, model.smooth(0.0), out)
    else:
        out = np.where(x == 0, np.inf, out)
    return out if out.ndim else float(out)


def intensity_at(model, t, theta=None):
    """S_theta(t) = s(t - theta)."""
    theta = model.theta if theta is None else theta
    return base_shape(model, np.asarray(t, dtype=float) - theta)


def _base_antiderivative(model, x):
    # A(x) = integral_0^x s(y) dy
    x = np.asarray(x, dtype=float)
    q = model.p + 1.0
    ax = np.abs(x)
    power = np.where(x < 0, -model.a, model.b) * ax**q / q
    return power + model.smooth.antiderivative(x)


def cumulative_intensity(model, t, theta=None):
    """Lambda(t) = integral_0^t S_theta(x) dx, in closed form."""
    theta = model.theta if theta is None else theta
    t = np.asarray(t, dtype=float)
    out = _base_antiderivative(model, t - theta) - _base_antiderivative(model, -np.asarray(theta, dtype=float))
    out = np.where(t == 0, 0.0, out)  # array and scalar pow may differ in the last bit
    return out if out.ndim else float(out)


def total_intensity(model, theta=None):
    """Lambda(T) under shift ``theta`` (vectorised over ``theta``)."""
    theta = model.theta if theta is None else theta
    theta = np.asarray(theta, dtype=float)
    out = _base_antiderivative(model, model.T - theta) - _base_antiderivative(model, -theta)
    return out if out.ndim else float(out)


def inverse_cumulative(model, targets, theta=None, tol=None, max_iter=200):
    """Solve Lambda(t) = target for each target in [0, Lambda(T)].

    Each side of the singular point is searched in w = |t - theta|**(p+1),
    where Lambda is smooth and, for psi = 0, exactly linear.  Safeguarded
    Newton steps in w stay inside a bisection bracket; iteration stops once
    t moves by at most ``tol`` (default 1e-12 * T).
    """
    theta = model.theta if theta is None else float(theta)
    tol = 1e-12 * model.T if tol is None else tol
    y = np.asarray(targets, dtype=float)
    shape = y.shape
    y = y.ravel()
    q = model.p + 1.0
    lam_theta = float(cumulative_intensity(model, theta, theta))
    right = y >= lam_theta
    sign = np.where(right, 1.0, -1.0)
    amp = np.where(right, model.b, model.a)
    w_hi = np.where(right, model.T - theta, theta) ** q
    w = np.clip(q * np.abs(y - lam_theta) / amp, 0.0, w_hi)
    if model.smooth.is_zero:
        x = np.clip(theta + sign * w ** (1.0 / q), 0.0, model.T)
        return x.reshape(shape) if shape else float(x[0])
    lo = np.zeros_like(y)
    hi = w_hi.copy()
    x = theta + sign * w ** (1.0 / q)
    active = np.ones(y.shape, dtype=bool)
    for _ in range(max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        wi, si = w[idx], sign[idx]
        r = wi ** (1.0 / q)
        g = si * (cumulative_intensity(model, theta + si * r, theta) - y[idx])
        below = g < 0
        lo[idx] = np.where(below, wi, lo[idx])
        hi[idx] = np.where(below, hi[idx], wi)
        # dLambda/dw = (d + psi(x - theta) * w**(-p/q)) / q
        with np.errstate(divide="ignore", invalid="ignore"):
            deriv = (amp[idx] + model.smooth(si * r) * wi ** (-model.p / q)) / q
            newton = wi - g / deriv
        ok = np.isfinite(newton) & (newton > lo[idx]) & (newton < hi[idx])
        wn = np.where(ok, newton, 0.5 * (lo[idx] + hi[idx]))
        wn = np.where(g == 0, wi, wn)
        xn = theta + si * wn ** (1.0 / q)
        width = hi[idx] ** (1.0 / q) - lo[idx] ** (1.0 / q)
        done = (np.abs(xn - x[idx]) <= tol) | (width <= tol) | (g == 0)
        w[idx], x[idx] = wn, xn
        active[idx[done]] = False
    return x.reshape(shape) if shape else float(x[0])


def hellinger_between(model, theta1, theta2, epsrel=1e-10):
    """integral_0^T (sqrt(S_theta1) - sqrt(S_theta2))**2 dt by adaptive quadrature.

    Works in y = t - theta2 so both singular points (y = 0 and
    y = theta1 - theta2) are breakpoints reached without rounding.
    """
    if theta1 == theta2:
        return 0.0
    shift = theta1 - theta2

    def f(end, off):
        y = end + off
        y1 = off if end == shift else y - shift
        y2 = off if end == 0.0 else y
        return (math.sqrt(base_shape(model, y1)) - math.sqrt(base_shape(model, y2))) ** 2

    val, _ = integrate_piecewise(f, [-theta2, 0.0, shift, model.T - theta2], epsrel=epsrel, anchored=True)
    return val


def hellinger_F(model, u, epsrel=1e-10):
    """F(u): squared Hellinger distance between shifts theta + u and theta."""
    if not model.alpha < model.theta + u < model.beta:
        raise OutOfInterval(f"theta + u = {model.theta + u} outside ({model.alpha}, {model.beta})")
    return hellinger_between(model, model.theta + u, model.theta, epsrel=epsrel)


def validate(model):
    p = model.p
    if not (-1.0 < p < 1.0) or p == 0.0 or not math.isfinite(p):
        raise InvalidOrder(f"p must lie in (-1, 0) or (0, 1), got {p}")
    if not (model.a > 0 and model.b > 0):
        raise NonpositiveIntensity(f"amplitudes must be positive, got a={model.a}, b={model.b}")
    if p > 0 and model.smooth.coefficients[0] != 0.0:
        raise SmoothPartNonzeroAtOrigin(f"psi(0) = {model.smooth.coefficients[0]} but p > 0")
    T = model.T
    alpha, beta = model.theta_interval
    if not (T > 0 and 0.0 <= alpha < beta <= T):
        raise BadInterval(f"need 0 <= alpha < beta <= T, got ({alpha}, {beta}) with T={T}")
    if not alpha < model.theta < beta:
        raise BadInterval(f"theta={model.theta} outside ({alpha}, {beta})")

    # uniform grid avoiding the origin, plus a geometric approach to 0 where
    # min(a, b)|x|**p must dominate |psi(x)|
    grid = np.linspace(-T, T, VALIDATION_GRID + 1)
    grid = grid[grid != 0.0]
    geo = T * np.logspace(-12, 0, 97)
    xs = np.concatenate([grid, geo, -geo])
    vals = base_shape(model, xs)
    if not np.all(vals > 0):
        bad = xs[~(vals > 0)][0]
        raise NonpositiveIntensity(f"s({bad}) = {base_shape(model, bad)} <= 0")
    near = T * np.logspace(-12, -6, 13)
    for sign in (-1.0, 1.0):
        dom = min(model.a, model.b) * near**p
        if not np.all(np.abs(model.smooth(sign * near)) < dom):
            raise NonpositiveIntensity("power part does not dominate psi near the singularity")


def model_to_text(model):
    c = model.smooth.coefficients
    values = (model.a, model.b, model.p, model.theta, model.T, model.alpha, model.beta, *c)
    return "".join(f"{k} = {float(v):.17g}\n" for k, v in zip(MODEL_KEYS, values))


def model_from_mapping(mapping, prefix=""):
    def get(key, default=None):
        v = mapping.get(prefix + key, default)
        if v is None:
            from .errors import ConfigError

            raise ConfigError(f"missing model key {prefix + key!r}")
        return float(v)

    psi = tuple(get(f"psi_c{k}", 0.0) for k in range(4))
    model = IntensityModel.create(
        get("a"), get("b"), get("p"), get("theta"), get("T"), get("alpha"), get("beta"), psi
    )
    validate(model)
    return model


def model_from_text(text):
    from .config import parse_kv

    return model_from_mapping(parse_kv(text))


def fingerprint(model):
    return hashlib.sha256(model_to_text(model).encode()).hexdigest()[:16]
