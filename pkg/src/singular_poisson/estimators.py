"""Maximum likelihood and posterior-mean estimators of the shift."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .errors import AllNodesSingular, ConfigError, DegenerateGrid, MleUndefinedForNegativeP
from .likelihood import log_likelihood_curve
from .optimize import golden_section_max

__all__ = [
    "Prior",
    "PosteriorGrid",
    "EstimateResult",
    "EstimatorConfig",
    "posterior_grid",
    "bayes_estimate",
    "mle_estimate",
    "jittered_grid",
]

BOUNDARY_FRACTION = 1e-6
JITTER = 1e-12
# nodes whose posterior density is within exp(-30) of the peak are kept when zooming in
ZOOM_LOG_DROP = 30.0
# a posterior spanning fewer nodes than this is considered unresolved
MIN_RESOLVED_NODES = 64
MAX_REFINE_PASSES = 12


@dataclass(frozen=True)
class Prior:
    kind: str = "uniform"
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "truncated-normal"):
            raise ConfigError(f"unknown prior kind {self.kind!r}")
        if self.kind == "truncated-normal" and not self.sd > 0:
            raise ConfigError("truncated-normal prior needs sd > 0")

    def log_density(self, thetas, alpha, beta):
        thetas = np.asarray(thetas, dtype=float)
        if self.kind == "uniform":
            return np.full(thetas.shape, -math.log(beta - alpha))
        lo, hi = (alpha - self.mean) / self.sd, (beta - self.mean) / self.sd
        return stats.truncnorm.logpdf(thetas, lo, hi, loc=self.mean, scale=self.sd)


@dataclass(frozen=True)
class EstimatorConfig:
    grid_size: int = 2048
    refine_passes: int = 1
    prior_kind: str = "uniform"
    prior_mean: float = 0.0
    prior_sd: float = 1.0
    mle_grid_size: int = 4096
    mle_candidates: int = 8

    @property
    def prior(self):
        return Prior(self.prior_kind, self.prior_mean, self.prior_sd)

    @classmethod
    def from_mapping(cls, mapping):
        kw = {}
        for name, conv in (("grid_size", int), ("refine_passes", int), ("prior_kind", str),
                           ("prior_mean", float), ("prior_sd", float), ("mle_grid_size", int),
                           ("mle_candidates", int)):
            if name in mapping:
                try:
                    kw[name] = conv(mapping[name])
                except ValueError as exc:
                    raise ConfigError(f"estimator.{name}: {exc}") from exc
        return cls(**kw)

    def to_mapping(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True, eq=False)
class PosteriorGrid:
    """Posterior on nodes; ``weights`` default to the trapezoid rule."""

    thetas: np.ndarray
    log_lik: np.ndarray
    log_prior: np.ndarray
    log_posterior: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        if self.weights is None:
            object.__setattr__(self, "weights", trapezoid_weights(self.thetas))

    @property
    def density(self):
        return np.exp(self.log_posterior)

    def mass(self):
        return float(np.sum(self.weights * self.density))

    def mean(self):
        return float(np.sum(self.weights * self.thetas * self.density))

    def cumulative(self):
        d = self.density
        cells = 0.5 * (d[1:] + d[:-1]) * np.diff(self.thetas)
        return np.concatenate([[0.0], np.cumsum(cells)])


@dataclass(frozen=True)
class EstimateResult:
    estimate: float
    estimator_kind: str
    diagnostics: dict = field(default_factory=dict)


def trapezoid_weights(x):
    x = np.asarray(x, dtype=float)
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


def singular_rule(lo, hi, cells, events, p, order=4, min_cells=3):
    """Quadrature nodes and weights on [lo, hi] for integrands with |theta - e|**p factors at ``events``.

    [lo, hi] is cut at the events inside it and at the midpoints between
    consecutive events, so every piece has one nearest event e (possibly
    outside [lo, hi]).  With D the distance from e to the far end of the
    piece, the map theta = e +- D s**2 turns |theta - e|**p d theta into
    s**(2p + 1) ds times a smooth function.  The piece is covered by
    composite Gauss-Legendre cells in s; when e is an end of the piece the
    cell at s = 0 uses Gauss-Jacobi nodes for the weight s**(2p + 1).  For
    p = +-0.5 the transformed integrand is smooth and the rule converges
    spectrally.  Pieces get cells in proportion to their length, ``cells``
    in total, at least ``min_cells`` each.
    """
    lo, hi = float(lo), float(hi)
    ev = np.unique(np.asarray(events, dtype=float))
    if ev.size == 0:
        pts = np.array([lo, hi])
    else:
        mids = 0.5 * (ev[1:] + ev[:-1])
        cuts = np.concatenate([ev, mids])
        pts = np.unique(np.concatenate([[lo, hi], cuts[(cuts > lo) & (cuts < hi)]]))
    left, right = pts[:-1], pts[1:]
    if ev.size:
        centre = 0.5 * (left + right)
        j = np.clip(np.searchsorted(ev, centre), 1, ev.size - 1) if ev.size > 1 else np.zeros(centre.size, int)
        if ev.size > 1:
            j = np.where(np.abs(ev[j - 1] - centre) <= np.abs(ev[j] - centre), j - 1, j)
        anchor = ev[j]
        direction = np.where(centre >= anchor, 1.0, -1.0)
        near = np.minimum(np.abs(left - anchor), np.abs(right - anchor))
        far = np.maximum(np.abs(left - anchor), np.abs(right - anchor))
        spiky = np.ones(left.size, dtype=bool)
    else:
        anchor, direction = left, np.ones(1)
        near, far = np.zeros(1), right - left
        spiky = np.zeros(1, dtype=bool)
    s0 = np.where(spiky, np.sqrt(near / far), 0.0)

    m = np.maximum(min_cells, np.ceil(cells * (right - left) / (hi - lo))).astype(np.int64)
    piece = np.repeat(np.arange(m.size), m)
    cell = np.arange(piece.size) - np.repeat(np.cumsum(m) - m, m)
    xl, wl = special.roots_legendre(order)
    beta = 2.0 * p + 1.0
    xj, wj = special.roots_jacobi(order, 0.0, beta)
    wj = wj / (1.0 + xj) ** beta
    jac = spiky[piece] & (cell == 0) & (near[piece] == 0)
    ref_x = np.where(jac[:, None], xj[None, :], xl[None, :])
    ref_w = np.where(jac[:, None], wj[None, :], wl[None, :])
    width = ((1.0 - s0[piece]) / m[piece])[:, None]
    s_ = (s0[piece][:, None] + width * (cell[:, None] + 0.5 * (ref_x + 1.0))).ravel()
    ws = (0.5 * width * ref_w).ravel()
    piece = np.repeat(piece, order)
    k = np.where(spiky[piece], 2, 1)
    D = far[piece]
    x = anchor[piece] + direction[piece] * D * s_**k
    w = D * k * s_ ** (k - 1) * ws
    # a node that rounds onto its event would see an infinite factor; nudge it off
    hit = spiky[piece] & (x == anchor[piece])
    x[hit] = np.nextafter(x[hit], x[hit] + direction[piece][hit])
    order_ = np.argsort(x, kind="stable")
    return x[order_], w[order_]


def jittered_grid(model, size, lo=None, hi=None, events=None):
    """Uniform grid on [lo, hi] with nodes coinciding with an event nudged by 1e-12 T."""
    eps = BOUNDARY_FRACTION * (model.beta - model.alpha)
    lo = model.alpha + eps if lo is None else lo
    hi = model.beta - eps if hi is None else hi
    if size < 2 or not hi > lo:
        raise DegenerateGrid(f"cannot build a {size}-node grid on [{lo}, {hi}]")
    grid = np.linspace(lo, hi, size)
    if events is not None and len(events):
        hit = np.isin(grid, events)
        while hit.any():
            grid[hit] += JITTER * model.T
            hit = np.isin(grid, events)
    return grid


def _normalise(weights, log_lik, log_prior):
    log_post = log_lik + log_prior
    top = np.max(log_post)
    if not np.isfinite(top):
        raise DegenerateGrid("posterior is not finite anywhere on the grid")
    shifted = log_post - top
    mass = np.sum(weights * np.exp(shifted))
    if not mass > 0:
        raise DegenerateGrid("posterior has zero mass on the grid")
    return shifted - math.log(mass)


def posterior_grid(batch, model, prior=None, grid_size=2048, lo=None, hi=None, log_lik=None):
    """Posterior density of theta on a uniform grid, normalised by the trapezoid rule.

    ``log_lik`` overrides the likelihood (values on the grid) and exists for
    testing.  The reference point of the likelihood ratio is the midpoint of
    the parameter interval; it cancels in the normalisation.
    """
    if grid_size < 64:
        raise DegenerateGrid(f"grid_size must be at least 64, got {grid_size}")
    prior = prior or Prior()
    thetas = jittered_grid(model, grid_size, lo, hi, batch.times if batch is not None else None)
    if log_lik is None:
        log_lik = _log_lik_at(batch, model, thetas)
    else:
        log_lik = np.broadcast_to(np.asarray(log_lik, dtype=float), thetas.shape).copy()
    log_prior = prior.log_density(thetas, model.alpha, model.beta)
    weights = trapezoid_weights(thetas)
    return PosteriorGrid(thetas, log_lik, log_prior, _normalise(weights, log_lik, log_prior), weights)


def _log_lik_at(batch, model, thetas):
    ref = 0.5 * (model.alpha + model.beta)
    vals = log_likelihood_curve(batch, model, np.append(thetas, ref))
    ref_val = vals[-1]
    if not np.isfinite(ref_val):
        ref_val = log_likelihood_curve(batch, model, [ref + JITTER * model.T])[0]
    return vals[:-1] - ref_val


def singular_posterior(batch, model, prior, lo, hi, cells, log_lik_fn=None, order=4):
    """Posterior on the nodes of ``singular_rule`` over [lo, hi]."""
    events = batch.times if batch is not None else np.empty(0)
    thetas, weights = singular_rule(lo, hi, cells, events, model.p, order)
    log_lik = log_lik_fn(thetas) if log_lik_fn is not None else _log_lik_at(batch, model, thetas)
    log_prior = prior.log_density(thetas, model.alpha, model.beta)
    return PosteriorGrid(thetas, log_lik, log_prior, _normalise(weights, log_lik, log_prior), weights)


def _zoom_interval(post):
    """Node ranges of the 99% mass interval and of the non-negligible hull.

    The hull (nodes within ``exp(-30)`` of the peak, plus one cell each
    side) always contains the 99% interval.
    """
    th = post.thetas
    cdf = post.cumulative()
    cdf /= cdf[-1]
    q_lo = max(int(np.searchsorted(cdf, 0.005)) - 1, 0)
    q_hi = min(int(np.searchsorted(cdf, 0.995)), th.size - 1)
    live = np.nonzero(post.log_posterior >= post.log_posterior.max() - ZOOM_LOG_DROP)[0]
    i_lo = max(min(q_lo, live[0]) - 1, 0)
    i_hi = min(max(q_hi, live[-1]) + 1, th.size - 1)
    return (q_lo, q_hi), (i_lo, i_hi)


def bayes_estimate(batch, model, prior=None, config=None, log_lik_fn=None):
    """Posterior mean of theta under ``prior``.

    A trapezoid grid over the whole parameter interval locates the
    posterior; each refinement pass regrids the non-negligible region with
    at least twice the previous resolution there.  Passes beyond
    ``config.refine_passes`` run only while the 99% mass interval spans
    fewer than 64 nodes.  The mean itself is computed on the final region
    with ``singular_rule``, which integrates the |theta - t|**p factor at
    each event exactly.

    ``log_lik_fn(thetas)`` replaces the likelihood (testing seam).
    """
    config = config or EstimatorConfig()
    prior = prior or config.prior

    def build(lo=None, hi=None, size=config.grid_size):
        if log_lik_fn is not None:
            th = jittered_grid(model, size, lo, hi)
            return posterior_grid(None, model, prior, size, lo, hi, log_lik=log_lik_fn(th))
        return posterior_grid(batch, model, prior, size, lo, hi)

    post = build()
    first = post
    passes = 0
    while True:
        (q_lo, q_hi), (i_lo, i_hi) = _zoom_interval(post)
        if passes >= MAX_REFINE_PASSES:
            break
        if passes >= config.refine_passes and q_hi - q_lo >= MIN_RESOLVED_NODES:
            break
        span = i_hi - i_lo
        size = max(config.grid_size, 2 * span + 1)
        if span < 1 or (i_lo == 0 and i_hi == post.thetas.size - 1 and size <= post.thetas.size):
            break
        post = build(post.thetas[i_lo], post.thetas[i_hi], size)
        passes += 1
    lo, hi = post.thetas[i_lo], post.thetas[i_hi]
    final = singular_posterior(batch, model, prior, lo, hi, max(config.grid_size // 4, 16), log_lik_fn)

    d0 = first.density
    boundary = 0.5 * (d0[0] + d0[1]) * (first.thetas[1] - first.thetas[0]) + 0.5 * (d0[-1] + d0[-2]) * (
        first.thetas[-1] - first.thetas[-2]
    )
    est = final.mean() / final.mass()
    return EstimateResult(
        float(est),
        "Bayes",
        {
            "grid_size": int(post.thetas.size),
            "quadrature_nodes": int(final.thetas.size),
            "refinement_passes": passes,
            "boundary_mass": float(boundary),
            "final_interval": [float(lo), float(hi)],
        },
    )


def mle_estimate(batch, model, config=None):
    """Maximiser of the likelihood over the parameter interval (p > 0 only).

    A coarse scan over a jittered grid selects the best local maxima; each
    bracketing cell is cut at the event times inside it (where the
    log-likelihood is -inf) and every piece is searched by golden section,
    staying 1e-12 T away from events.  Ties go to the smallest theta.
    """
    if model.p < 0:
        raise MleUndefinedForNegativeP("the likelihood is unbounded at every event when p < 0")
    config = config or EstimatorConfig()
    events = np.sort(batch.times)
    grid = jittered_grid(model, config.mle_grid_size, events=events)
    curve = log_likelihood_curve(batch, model, grid)
    finite = np.isfinite(curve)
    if not finite.any():
        raise AllNodesSingular("log-likelihood is -inf at every grid node")
    work = np.where(finite, curve, -np.inf)
    left = np.concatenate([[-np.inf], work[:-1]])
    right = np.concatenate([work[1:], [-np.inf]])
    peaks = np.nonzero(finite & (work >= left) & (work >= right))[0]
    order = peaks[np.lexsort((grid[peaks], -work[peaks]))][: config.mle_candidates]

    gap = JITTER * model.T
    tol = JITTER * model.T

    def f(theta):
        return float(log_likelihood_curve(batch, model, [theta])[0])

    best_x, best_f = grid[order[0]], work[order[0]]
    for i in order:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, grid.size - 1)]
        inside = events[(events > lo) & (events < hi)]
        cuts = np.concatenate([[lo], inside, [hi]])
        for k in range(cuts.size - 1):
            a = cuts[k] + (gap if k > 0 else 0.0)
            b = cuts[k + 1] - (gap if k + 1 < cuts.size - 1 else 0.0)
            if not b > a:
                continue
            x, fx = golden_section_max(f, a, b, tol)
            for cand_x, cand_f in ((x, fx), (a, f(a)), (b, f(b))):
                if cand_f > best_f or (cand_f == best_f and cand_x < best_x):
                    best_x, best_f = cand_x, cand_f
    return EstimateResult(
        float(best_x),
        "MLE",
        {"grid_size": int(grid.size), "candidates": int(order.size), "log_likelihood": float(best_f)},
    )
