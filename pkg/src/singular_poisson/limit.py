"""The limit likelihood-ratio process Z(u) and the variables zeta and xi.

Y is a Poisson process on the line with intensity d(z)|z|**p, simulated on
the window [-U, U].  On that window

    ln Z(u) = p sum_j ln|1 - u/z_j| + ln(a/b) sign(u) #{z_j between 0 and u}
              - D_U(u) - (a - b)/(p + 1) |u|**(p+1) sign(u),

with D_U(u) = int_{-U}^{U} d(z)(|z - u|**p - |z|**p) dz.  The compensated
stochastic integral and the deterministic integral of the exact process
diverge separately; only this combination is ever computed.

Events beyond the window add p sum ln|1 - u/z_j| less its mean.  To first
order this is -p u G with G the compensated sum of 1/z_j over |z_j| > U, a
sum of many small terms drawn as a normal variable with variance
v = (a + b) U**(p-1) / (1 - p).  Its deterministic partner is
-p**2 u**2 v / 2 plus a u**3 term; both are added when the path carries G.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import integrate, special

from .errors import ValidationError, XiUndefinedForNegativeP
from .estimators import singular_rule
from .optimize import golden_section_max
from .quadrature import integrate_piecewise
from .rng import RngStream, poisson_inverse

FAR_INDEX = 1 << 62

__all__ = [
    "LimitConfig",
    "LimitPath",
    "ZGrid",
    "LimitDraws",
    "sample_limit_path",
    "det_integral",
    "log_Z",
    "z_grid",
    "zeta_of_path",
    "xi_of_path",
    "draw_zeta_xi",
    "restrict_path",
    "far_variance",
    "zeta_doubling_check",
    "limit_cf",
    "limit_hellinger",
    "draws_to_csv",
    "draws_from_csv",
]


@dataclass(frozen=True)
class LimitConfig:
    z_window: float = 64.0
    u_window: float = 16.0
    u_step: float = 0.02
    quad_tol: float = 1e-10

    def __post_init__(self):
        if not self.z_window >= 4 * self.u_window:
            raise ValidationError(f"z_window={self.z_window} must be at least 4 * u_window={self.u_window}")
        if not 0 < self.u_step <= self.u_window / 200:
            raise ValidationError(f"u_step={self.u_step} must lie in (0, u_window/200]")

    @classmethod
    def from_mapping(cls, mapping):
        kw = {}
        for key in ("z_window", "u_window", "u_step", "quad_tol"):
            if key in mapping:
                kw[key] = float(mapping[key])
        if "u_window" in kw and "u_step" not in kw:
            kw["u_step"] = kw["u_window"] / 800
        return cls(**kw)

    def to_mapping(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def doubled(self):
        return LimitConfig(2 * self.z_window, 2 * self.u_window, 2 * self.u_step, self.quad_tol)

    @classmethod
    def covering(cls, a, b, p, tail=1e-7):
        """The default windows, widened until E sqrt(Z(+-V)) <= ``tail``.

        E sqrt(Z(u)) = exp(-K |u|**(p+1) / 2) with K from ``limit_hellinger``.
        For p > 0 this keeps V = 16; for p < 0 the decay is slow and V grows.
        """
        base = cls()
        K = min(limit_hellinger(a, b, p, 1.0), limit_hellinger(a, b, p, -1.0))
        V = (-2.0 * math.log(tail) / K) ** (1.0 / (p + 1.0))
        if V <= base.u_window:
            return base
        V = float(math.ceil(V))
        return cls(4.0 * V, V, V / 800.0, base.quad_tol)

    @classmethod
    def resolve(cls, mapping, a, b, p):
        """Config from ``limit.*`` keys; windows not given come from ``covering``."""
        if "u_window" in mapping or "z_window" in mapping:
            return cls.from_mapping(mapping)
        base = cls.covering(a, b, p).to_mapping()
        base.update({k: float(v) for k, v in mapping.items() if k in cls.__dataclass_fields__})
        return cls(**base)


@dataclass(frozen=True, eq=False)
class LimitPath:
    y_events: np.ndarray
    window: float
    far: float | None = None


@dataclass(frozen=True, eq=False)
class ZGrid:
    us: np.ndarray
    log_z: np.ndarray


@dataclass(frozen=True, eq=False)
class LimitDraws:
    zetas: np.ndarray
    xis: np.ndarray
    config: LimitConfig
    seed: int
    a: float = 1.0
    b: float = 1.0
    p: float = 0.5
    meta: dict = field(default_factory=dict)


def sample_limit_path(a, b, p, U, rng):
    """Events of Y on [-U, U].

    Uniform 0 of the stream gives the count, uniforms 2k+1 and 2k+2 the side
    and the radius of event k, uniform FAR_INDEX the far-field variable.
    """
    if not U > 0:
        raise ValidationError(f"window must be positive, got {U}")
    q = p + 1.0
    mean = (a + b) * U**q / q
    count = int(poisson_inverse(rng.uniforms(0, 1), mean)[0])
    draws = rng.uniforms(1, 2 * count).reshape(count, 2)
    left = draws[:, 0] < a / (a + b)
    radius = U * draws[:, 1] ** (1.0 / q)
    z = np.where(left, -radius, radius)
    z = np.sort(z[z != 0.0])
    far = math.sqrt(far_variance(a, b, p, U)) * float(special.ndtri(rng.uniforms(FAR_INDEX, 1)[0]))
    return LimitPath(z, float(U), far)


def far_variance(a, b, p, U):
    """Variance of the compensated sum of 1/z over events with |z| > U."""
    return (a + b) * U ** (p - 1.0) / (1.0 - p)


def _far_poly(path, a, b, p, U):
    """Coefficients (c1, c2, c3) of the far-field polynomial in u."""
    if path.far is None:
        return 0.0, 0.0, 0.0
    w3 = (b - a) * U ** (p - 2.0) / (2.0 - p)
    return -p * path.far, -0.5 * p * p * far_variance(a, b, p, U), (p**3 / 6.0 - p * p / 2.0) * w3


def limit_hellinger(a, b, p, sign=1.0):
    """K with int (sqrt(w(z - u)) - sqrt(w(z)))**2 dz = K |u|**(p+1), w(z) = d(z)|z|**p, sign(u) = sign."""
    s = math.copysign(1.0, sign)

    def f(z):
        zu = z - s
        return (math.sqrt((a if zu < 0 else b) * abs(zu) ** p) - math.sqrt((a if z < 0 else b) * abs(z) ** p)) ** 2

    lo, hi = min(0.0, s), max(0.0, s)
    total = integrate.quad(f, -np.inf, lo - 1.0, limit=200)[0] + integrate.quad(f, hi + 1.0, np.inf, limit=200)[0]
    for x0, x1 in ((lo - 1.0, lo), (lo, hi), (hi, hi + 1.0)):
        total += integrate.quad(f, x0, x1, limit=200)[0]
    return total


def _g(x, q):
    return np.sign(x) * np.abs(x) ** q / q


def det_integral(u, U, a, b, p):
    """D_U(u) in closed form, vectorised over ``u`` (|u| < U)."""
    u = np.asarray(u, dtype=float)
    q = p + 1.0
    r = u / U
    out = (a - b) * _g(-u, q) + U**q / q * (a * np.expm1(q * np.log1p(r)) + b * np.expm1(q * np.log1p(-r)))
    return out if out.ndim else float(out)


@njit(cache=True)
def _sum_log_dist(us, z, radius, terms):
    """sum_j ln|z_j - u| - ln|z_j| for each u.

    Events with |z_j| > radius enter through the series
    ln|1 - u/z| = -sum_k (u/z)**k / k, valid since |u| <= radius / 2.
    """
    power = np.zeros(terms + 1)
    near = []
    for zj in z:
        if abs(zj) > radius:
            inv = 1.0 / zj
            x = inv
            for k in range(1, terms + 1):
                power[k] += x
                x *= inv
        else:
            near.append(zj)
    out = np.empty(us.size)
    for i in range(us.size):
        u = us[i]
        acc = 0.0
        for zj in near:
            acc += math.log(abs(1.0 - u / zj))
        # Horner on -sum_k power[k] u**k / k
        poly = 0.0
        for k in range(terms, 0, -1):
            poly = poly * u - power[k] / k
        out[i] = acc + poly * u
    return out


@njit(cache=True)
def _log_z_point(u, z, a, b, p, U, c1, c2, c3):
    """Scalar ln Z_U(u), same terms as ``log_Z``; used inside searches."""
    if u == 0.0:
        return 0.0
    acc = 0.0
    count = 0
    for zj in z:
        if zj == u:
            return -np.inf if p > 0 else np.inf
        acc += math.log(abs(1.0 - u / zj))
        if (0.0 < zj < u) or (u < zj < 0.0):
            count += 1
    q = p + 1.0
    r = u / U
    g = -math.copysign(abs(u) ** q / q, u)  # G(-u)
    det = (a - b) * g + U**q / q * (a * math.expm1(q * math.log1p(r)) + b * math.expm1(q * math.log1p(-r)))
    sgn = 1.0 if u > 0 else -1.0
    far = u * (c1 + u * (c2 + u * c3))
    return p * acc + math.log(a / b) * sgn * count - det - (a - b) / q * abs(u) ** q * sgn + far


def _log_sum(us, z, half_width):
    radius = 2.0 * half_width
    if z.size == 0:
        return np.zeros(us.size)
    return _sum_log_dist(np.ascontiguousarray(us, dtype=float), np.ascontiguousarray(z, dtype=float), radius, 56)


def log_Z(u, path, a, b, p, U=None):
    """ln Z_U(u) for one path, vectorised over ``u`` (|u| <= U/2)."""
    U = path.window if U is None else U
    us = np.atleast_1d(np.asarray(u, dtype=float))
    z = path.y_events
    half = max(float(np.max(np.abs(us))), 1e-300)
    if half > U / 2 * (1 + 1e-12):
        raise ValidationError(f"|u| = {half} exceeds U/2 = {U / 2}")
    logs = _log_sum(us, z, half)
    hit = np.isin(us, z)
    stoch = p * logs
    stoch[hit] = math.copysign(math.inf, -p)
    pos = np.searchsorted(z, us, side="left") - np.searchsorted(z, 0.0, side="right")
    neg = np.searchsorted(z, 0.0, side="left") - np.searchsorted(z, us, side="right")
    count = np.where(us > 0, pos, np.where(us < 0, neg, 0))
    q = p + 1.0
    c1, c2, c3 = _far_poly(path, a, b, p, U)
    out = (
        stoch
        + math.log(a / b) * np.sign(us) * count
        - det_integral(us, U, a, b, p)
        - (a - b) / q * np.abs(us) ** q * np.sign(us)
        + us * (c1 + us * (c2 + us * c3))
    )
    out[us == 0] = 0.0
    return out if np.ndim(u) else float(out[0])


def z_grid(path, a, b, p, cfg):
    k = int(round(cfg.u_window / cfg.u_step))
    us = np.arange(-k, k + 1) * cfg.u_step
    return ZGrid(us, log_Z(us, path, a, b, p, cfg.z_window))


def zeta_of_path(path, a, b, p, cfg):
    """int u Z(u) du / int Z(u) du over [-V, V].

    Uses the composite rule with the path's events as breakpoints, so the
    |u - z_j|**p behaviour of Z at events is integrated exactly.
    """
    V = cfg.u_window
    cells = max(int(round(V / cfg.u_step)), 16)
    us, w = singular_rule(-V, V, cells, path.y_events, p)
    lz = log_Z(us, path, a, b, p, cfg.z_window)
    top = np.max(lz)
    zz = w * np.exp(lz - top)
    return float(np.sum(us * zz) / np.sum(zz))


def xi_of_path(path, a, b, p, cfg, grid=None, candidates=4):
    """Argmax of Z on [-V, V] (p > 0): grid scan, then golden section per bracket."""
    if p < 0:
        raise XiUndefinedForNegativeP("Z is unbounded at every event when p < 0")
    grid = grid or z_grid(path, a, b, p, cfg)
    us, lz = grid.us, grid.log_z
    left = np.concatenate([[-np.inf], lz[:-1]])
    right = np.concatenate([lz[1:], [-np.inf]])
    peaks = np.nonzero(np.isfinite(lz) & (lz >= left) & (lz >= right))[0]
    order = peaks[np.lexsort((us[peaks], -lz[peaks]))][:candidates]
    z = path.y_events
    gap = 1e-12 * cfg.u_window
    U = cfg.z_window

    zc = np.ascontiguousarray(z, dtype=float)
    c1, c2, c3 = _far_poly(path, a, b, p, U)

    def f(u):
        return _log_z_point(float(u), zc, float(a), float(b), float(p), float(U), c1, c2, c3)

    best_u, best_f = us[order[0]], lz[order[0]]
    for i in order:
        lo, hi = us[max(i - 1, 0)], us[min(i + 1, us.size - 1)]
        cuts = np.concatenate([[lo], z[(z > lo) & (z < hi)], [hi]])
        for k in range(cuts.size - 1):
            lo_k = cuts[k] + (gap if k > 0 else 0.0)
            hi_k = cuts[k + 1] - (gap if k + 1 < cuts.size - 1 else 0.0)
            if not hi_k > lo_k:
                continue
            x, fx = golden_section_max(f, lo_k, hi_k, 1e-9)
            if fx > best_f or (fx == best_f and x < best_u):
                best_u, best_f = x, fx
    return float(best_u)


def draw_zeta_xi(a, b, p, cfg=None, M=1000, seed=0, with_xi=True):
    """M independent limit experiments; replicate r uses RngStream(seed, r)."""
    cfg = cfg or LimitConfig.covering(a, b, p)
    if with_xi and p < 0:
        with_xi = False
    zetas = np.empty(M)
    xis = np.empty(M if with_xi else 0)
    for r in range(M):
        path = sample_limit_path(a, b, p, cfg.z_window, RngStream(seed, r))
        zetas[r] = zeta_of_path(path, a, b, p, cfg)
        if with_xi:
            xis[r] = xi_of_path(path, a, b, p, cfg)
    return LimitDraws(zetas, xis, cfg, int(seed), a, b, p)


def restrict_path(path, U, a, b, p):
    """``path`` seen through the smaller window [-U, U].

    Events between U and the old window move into the far-field variable,
    compensated by their mean (b - a)(W**p - U**p)/p.
    """
    z = path.y_events
    inside = np.abs(z) <= U
    far = None
    if path.far is not None:
        W = path.window
        far = path.far + float(np.sum(1.0 / z[~inside])) - (b - a) * (W**p - U**p) / p
    return LimitPath(z[inside], float(U), far)


def zeta_doubling_check(a, b, p, cfg=None, M=10_000, seed=0):
    """E zeta**2 under ``cfg`` and under ``cfg.doubled()`` on nested windows.

    Replicate r draws Y once on the doubled window; its restriction to the
    base window is an exact draw for the base configuration.
    """
    cfg = cfg or LimitConfig.covering(a, b, p)
    big = cfg.doubled()
    base = np.empty(M)
    wide = np.empty(M)
    for r in range(M):
        path = sample_limit_path(a, b, p, big.z_window, RngStream(seed, r))
        base[r] = zeta_of_path(restrict_path(path, cfg.z_window, a, b, p), a, b, p, cfg)
        wide[r] = zeta_of_path(path, a, b, p, big)
    sq_b, sq_w = base**2, wide**2
    se_b = float(np.std(sq_b, ddof=1) / math.sqrt(M))
    se_w = float(np.std(sq_w, ddof=1) / math.sqrt(M))
    diff = sq_w - sq_b
    return {
        "base": float(np.mean(sq_b)),
        "base_se": se_b,
        "doubled": float(np.mean(sq_w)),
        "doubled_se": se_w,
        "change": float(np.mean(diff)),
        "sigma": math.hypot(se_b, se_w),
        "paired_sigma": float(np.std(diff, ddof=1) / math.sqrt(M)),
        "zetas": base,
        "zetas_doubled": wide,
    }


def _cf_tail(lam, u, a, b, p, z0):
    """Integral of the limit log-CF integrand over |z| > z0, to order (u/z)**3."""
    c2 = -(lam**2 + 1j * lam) * p**2 / 2
    c3 = c2 + 1j * (lam**3 + lam) * p**3 / 6
    i2 = u**2 * (a + b) * z0 ** (p - 1) / (1 - p)
    i3 = u**3 * (b - a) * z0 ** (p - 2) / (2 - p)
    return c2 * i2 + c3 * i3


def limit_cf(lam, u, a, b, p, quad_tol=1e-10):
    """Limit of ln E exp(i lam ln Z_n(u)), as a complex number.

    With l(z) = ln(d(z-u)|z-u|**p / (d(z)|z|**p)) and w(z) = d(z)|z|**p the
    integrand is [exp(i lam l) - 1 - i lam (exp(l) - 1)] w(z).  It is
    integrated adaptively on |z| <= z0 = max(1e3, 1e3|u|) with breakpoints at
    0, u and a geometric ladder, plus a closed-form tail for |z| > z0.
    """
    if lam == 0 or u == 0:
        return 0j
    z0 = max(1e3, 1e3 * abs(u))
    q_lo = min(0.0, u)
    q_hi = max(0.0, u)

    def parts(end, off):
        z = end + off
        zu = off if end == u else z - u
        zz = off if end == 0.0 else z
        dz = a if zz < 0 else b
        dzu = a if zu < 0 else b
        w = dz * abs(zz) ** p
        wu = dzu * abs(zu) ** p
        ell = math.log(dzu / dz) + p * (math.log(abs(zu)) - math.log(abs(zz)))
        re = (math.cos(lam * ell) - 1.0) * w
        im = math.sin(lam * ell) * w - lam * (wu - w)
        return re, im

    ladder = [0.0, u, q_lo - 1.0, q_hi + 1.0]
    step = 2.0 * max(1.0, abs(u))
    while step < z0:
        ladder += [q_lo - step, q_hi + step]
        step *= 2.0
    ladder += [-z0, z0]
    re, _ = integrate_piecewise(lambda e, o: parts(e, o)[0], ladder, epsrel=quad_tol, anchored=True)
    im, _ = integrate_piecewise(lambda e, o: parts(e, o)[1], ladder, epsrel=quad_tol, anchored=True)
    return complex(re, im) + _cf_tail(lam, u, a, b, p, z0)


def draws_to_csv(draws):
    cfg = draws.config
    head = (
        f"# a={draws.a:.17g} b={draws.b:.17g} p={draws.p:.17g} U={cfg.z_window:.17g} "
        f"V={cfg.u_window:.17g} u_step={cfg.u_step:.17g} seed={draws.seed}\n"
    )
    rows = ["replicate,zeta,xi"]
    for r, zeta in enumerate(draws.zetas):
        xi = f"{draws.xis[r]:.17g}" if draws.xis.size else ""
        rows.append(f"{r},{zeta:.17g},{xi}")
    return head + "\n".join(rows) + "\n"


def draws_from_csv(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    meta = dict(kv.split("=", 1) for kv in lines[0].lstrip("#").split())
    cfg = LimitConfig(float(meta["U"]), float(meta["V"]), float(meta["u_step"]))
    zetas, xis = [], []
    for row in lines[2:]:
        _, zeta, xi = row.split(",")
        zetas.append(float(zeta))
        if xi:
            xis.append(float(xi))
    return LimitDraws(np.array(zetas), np.array(xis), cfg, int(meta["seed"]),
                      float(meta["a"]), float(meta["b"]), float(meta["p"]))
