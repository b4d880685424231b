"""Adaptive quadrature for integrands with algebraic endpoint singularities."""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate


def _quad(g, lo, hi, epsabs, epsrel, limit):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(g, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=limit)


def integrate_piecewise(f, breakpoints, epsabs=1e-15, epsrel=1e-10, limit=400, anchored=False):
    """Integrate over the hull of ``breakpoints``.

    Each subinterval between consecutive distinct breakpoints is split at its
    midpoint and both halves are mapped with ``x = end +/- h w**2``, which
    flattens ``|x - end|**q`` behaviour at the breakpoint.

    With ``anchored=True`` the integrand is called as ``f(end, offset)``
    where ``x = end + offset``; this lets it form ``x - singular_point``
    without cancellation when the breakpoints are themselves singular points.
    Returns ``(value, error_estimate)``.
    """
    pts = np.unique(np.asarray(breakpoints, dtype=float))
    total = 0.0
    err = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        half = 0.5 * (hi - lo)
        if half <= 0.0:
            continue
        for end, sign in ((lo, 1.0), (hi, -1.0)):
            if anchored:
                def g(w, end=end, sign=sign):
                    return f(end, sign * half * w * w) * 2.0 * half * w
            else:
                def g(w, end=end, sign=sign):
                    return f(end + sign * half * w * w) * 2.0 * half * w
            v, e = _quad(g, 0.0, 1.0, epsabs, epsrel, limit)
            total += v
            err += e
    return total, err


def integrate_tail(f, start, direction, epsabs=1e-15, epsrel=1e-10, limit=400):
    """Integrate ``f`` from ``start`` to +/- infinity (``direction`` = +1 or -1)."""
    if direction > 0:
        return _quad(f, start, math.inf, epsabs, epsrel, limit)
    return _quad(f, -math.inf, start, epsabs, epsrel, limit)
