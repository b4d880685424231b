"""Golden-section search for a maximum on a bracket."""
from __future__ import annotations

import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def golden_section_max(f, lo, hi, tol):
    """Maximise a unimodal ``f`` on ``[lo, hi]`` to bracket width ``tol``.

    Returns ``(x, f(x))`` for the best point evaluated; on equal values the
    smaller abscissa wins.
    """
    a, b = min(lo, hi), max(lo, hi)
    h = b - a
    if h <= tol:
        x = 0.5 * (a + b)
        return x, f(x)
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    best = (c, fc) if fc >= fd else (d, fd)
    steps = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    for _ in range(steps):
        if fc >= fd:
            b, d, fd = d, c, fc
            h *= INV_PHI
            c = a + INV_PHI2 * h
            fc = f(c)
            cand = (c, fc)
        else:
            a, c, fc = c, d, fd
            h *= INV_PHI
            d = a + INV_PHI * h
            fd = f(d)
            cand = (d, fd)
        if cand[1] > best[1] or (cand[1] == best[1] and cand[0] < best[0]):
            best = cand
    return best
