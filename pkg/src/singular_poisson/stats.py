"""Small statistics helpers used by the experiments."""
from __future__ import annotations

import math

import numpy as np
from scipy import stats


def ks_statistic(x, y):
    """Two-sample Kolmogorov-Smirnov statistic sup |F_x - F_y|, exact from sorted samples."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    pts = np.concatenate([x, y])
    fx = np.searchsorted(x, pts, side="right") / x.size
    fy = np.searchsorted(y, pts, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))


def ks_pvalue(stat, n1, n2):
    """Asymptotic two-sample p-value."""
    en = math.sqrt(n1 * n2 / (n1 + n2))
    return float(stats.kstwobign.sf(en * stat))


def loglog_slope(ns, values):
    """OLS slope of log(values) on log(ns) with its classical standard error."""
    fit = stats.linregress(np.log(ns), np.log(values))
    return float(fit.slope), float(fit.stderr), float(fit.intercept)


def mean_and_se(x):
    x = np.asarray(x, dtype=float)
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


def rmse_and_se(errors):
    """RMSE and its delta-method standard error."""
    sq = np.square(np.asarray(errors, dtype=float))
    m, se = mean_and_se(sq)
    r = math.sqrt(m)
    return r, se / (2 * r) if r > 0 else 0.0


def poisson_chisquare(counts, mu, min_expected=5.0):
    """Chi-square goodness of fit of integer ``counts`` to Poisson(mu); adjacent cells pooled."""
    counts = np.asarray(counts)
    n = counts.size
    kmax = int(counts.max())
    probs = stats.poisson.pmf(np.arange(kmax + 1), mu)
    probs[-1] += stats.poisson.sf(kmax, mu)
    observed = np.bincount(counts, minlength=kmax + 1).astype(float)
    expected = probs * n
    obs_cells, exp_cells = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs_cells.append(acc_o)
            exp_cells.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        obs_cells[-1] += acc_o
        exp_cells[-1] += acc_e
    obs_cells, exp_cells = np.array(obs_cells), np.array(exp_cells)
    chi2 = float(np.sum((obs_cells - exp_cells) ** 2 / exp_cells))
    dof = obs_cells.size - 1
    return chi2, dof, float(stats.chi2.sf(chi2, dof))
