"""Gauss-Legendre rules and composite/graded panel helpers."""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(order):
    """Nodes and weights on [-1, 1]; cached, read-only."""
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_rule(breaks, order=16):
    """Composite Gauss-Legendre rule over consecutive ``breaks``."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = gauss_legendre(order)
    left = breaks[:-1, None]
    half = 0.5 * np.diff(breaks)[:, None]
    nodes = left + half * (x + 1.0)
    weights = half * w
    return nodes.ravel(), weights.ravel()


def graded_breaks(length, singular, base_panels=4, floor=1e-12):
    """Breakpoints on [0, length] refined geometrically toward singular points.

    ``singular`` is an iterable of ``(p, dist)`` pairs: ``p`` the point of
    [0, length] nearest to a (possibly complex) singularity and ``dist`` its
    distance from the interval. Panels adjacent to ``p`` shrink by halving
    down to ``max(dist, floor * length)``.
    """
    breaks = list(np.linspace(0.0, length, base_panels + 1))
    for p, dist in singular:
        if dist >= 0.5 * length / base_panels:
            continue
        stop = max(dist, floor * length)
        breaks.append(p)
        step = length / base_panels
        while step > stop:
            step *= 0.5
            breaks.append(p - step)
            breaks.append(p + step)
    breaks = np.unique(np.clip(breaks, 0.0, length))
    return breaks


def sqrt_endpoint_quad(f, lo, hi, order=32, left=True, right=True):
    """Integrate ``f`` on [lo, hi] where it may carry square-root endpoint behaviour.

    Each half is mapped by ``t = end -/+ s**2`` which absorbs ``(t - end)**(+-1/2)``
    factors exactly.
    """
    if hi <= lo:
        return 0.0
    mid = 0.5 * (lo + hi)
    x, w = gauss_legendre(order)
    total = 0.0
    for end, other, use in ((lo, mid, left), (hi, mid, right)):
        if use:
            span = np.sqrt(abs(other - end))
            s = 0.5 * span * (x + 1.0)
            sign = 1.0 if other > end else -1.0
            t = end + sign * s * s
            total += float(np.sum(0.5 * span * w * f(t) * 2.0 * s))
        else:
            a, b = (end, other) if other > end else (other, end)
            t = a + 0.5 * (b - a) * (x + 1.0)
            total += float(np.sum(0.5 * (b - a) * w * f(t)))
    return total
