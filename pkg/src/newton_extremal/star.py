"""Star functions, convex means and dominance comparisons for axisymmetric potentials.

For a function ``l`` on the sphere of radius ``r`` the star function
``l*(r, theta)`` is the largest integral of ``l`` over a set whose surface
measure equals that of the polar cap of angle ``theta``. On a slice cut into
cells of constant value this is a fractional knapsack: take cells in order of
decreasing value and a fraction of the last one.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .measure import cap_area, polar_surface_weight
from .quadrature import graded_breaks, panel_rule


def rearranged_integral(values, weights, measure):
    """Largest sum of ``values * fraction * weights`` over fractions in [0, 1] with total weight ``measure``."""
    values = np.asarray(values, float)
    weights = np.asarray(weights, float)
    order = np.argsort(-values, kind="stable")
    v, w = values[order], weights[order]
    cw = np.concatenate([[0.0], np.cumsum(w)])
    cv = np.concatenate([[0.0], np.cumsum(v * w)])
    m = np.clip(np.asarray(measure, float), 0.0, cw[-1])
    k = np.clip(np.searchsorted(cw, m, side="right") - 1, 0, v.size - 1)
    return cv[k] + (m - cw[k]) * v[k]


@dataclass
class StarProfile:
    r: float
    theta: np.ndarray
    values: np.ndarray


def star(cell_values, edges, n, r=1.0):
    """Star function at the cell edges of an axisymmetric slice with per-cell values."""
    edges = np.asarray(edges, float)
    areas = cap_area(edges, n)
    weights = np.diff(areas)
    return StarProfile(r, edges, rearranged_integral(cell_values, weights, areas))


def cell_means(p, r, n, cells=512, order=8):
    """Edges and sin^{n-2}-weighted cell averages of p(r, .) over an even theta partition."""
    edges = np.linspace(0.0, np.pi, cells + 1)
    th, w = panel_rule(edges, order)
    vals = p.potential(np.full(th.size, r), th) * w * np.sin(th) ** (n - 2)
    mass = (w * np.sin(th) ** (n - 2)).reshape(cells, order).sum(axis=1)
    return edges, vals.reshape(cells, order).sum(axis=1) / mass


def star_of_potential(p, r, n, cells=512):
    edges, means = cell_means(p, r, n, cells)
    return star(means, edges, n, r)


# ---------------------------------------------------------------------------
# convex functions


@dataclass(frozen=True)
class ConvexPhi:
    """Convex non-decreasing function with known kinks."""

    tag: str
    func: object = field(compare=False)
    kinks: tuple = ()

    def __call__(self, t):
        return self.func(np.asarray(t, float))


def identity():
    return ConvexPhi("identity", lambda t: t)


def square():
    # convex and non-decreasing on the range of positive potentials
    return ConvexPhi("square", lambda t: t * t)


def exp():
    return ConvexPhi("exp", np.exp)


def hinge(c):
    return ConvexPhi(f"hinge({c:g})", lambda t: np.maximum(t - c, 0.0), (float(c),))


def piecewise_linear(knots, slopes):
    """Convex piecewise-linear function: slope ``slopes[0]`` below ``knots[0]``, etc. (slopes non-decreasing)."""
    knots = np.asarray(knots, float)
    slopes = np.asarray(slopes, float)
    if slopes.size != knots.size + 1 or np.any(np.diff(slopes) < 0) or slopes[0] < 0:
        raise ValueError("need len(slopes) = len(knots) + 1 with non-decreasing, non-negative slopes")

    def f(t):
        out = slopes[0] * t
        for k, (a, b) in enumerate(zip(slopes[:-1], slopes[1:])):
            out = out + (b - a) * np.maximum(t - knots[k], 0.0)
        return out

    return ConvexPhi("pwl", f, tuple(knots))


def standard_phis(levels):
    return [identity(), square(), exp()] + [hinge(c) for c in levels]


# ---------------------------------------------------------------------------
# slice quadrature


def _slice_breaks(r, n_base, points=(), kinks_of=None):
    """Breaks on [0, pi] graded toward the poles and listed points, scaled by |1 - r|."""
    scale = max(abs(1.0 - r), 0.0)
    sing = [(0.0, scale), (np.pi, scale)] + [(p, scale) for p in points]
    br = graded_breaks(np.pi, sing, n_base, floor=1e-10)
    if kinks_of is not None:
        br = np.union1d(br, kinks_of(br))
    return br


def _kink_roots(p, r, levels, breaks):
    """Angles in [0, pi] where p(r, .) crosses one of ``levels`` (kinks of hinge integrands)."""
    if not levels:
        return np.zeros(0)
    th = breaks
    vals = p.potential(np.full(th.size, r), th, on_singular="inf")
    roots = []
    for c in levels:
        s = vals - c
        for i in np.flatnonzero(np.isfinite(s[:-1]) & np.isfinite(s[1:]) & (s[:-1] * s[1:] < 0)):
            f = lambda t: float(p.potential(np.array([r]), np.array([t]))[0]) - c
            roots.append(brentq(f, th[i], th[i + 1], xtol=1e-14))
    return np.array(roots)


def slice_integral(p, r, n, phi=None, points=(), base=32, order=16):
    """int_{S^{n-1}} phi(p(r y)) dH^{n-1}(y) using axial symmetry."""
    phi = identity() if phi is None else phi
    kinks = (lambda br: _kink_roots(p, r, list(phi.kinks), br)) if phi.kinks else None
    br = _slice_breaks(r, base, points, kinks)
    th, w = panel_rule(br, order)
    vals = phi(p.potential(np.full(th.size, r), th))
    return polar_surface_weight(n) * float(np.sum(w * vals * np.sin(th) ** (n - 2)))


def convex_mean(p, phi, r, n, points=()):
    return slice_integral(p, r, n, phi, points)


def cumulative_profile(p, r, n, taus, points=(), base=64, order=16):
    """tau -> int_0^tau p(r, theta) sin^{n-2}(theta) dtheta at the requested taus."""
    taus = np.asarray(taus, float)
    br = np.union1d(_slice_breaks(r, base, points), taus)
    th, w = panel_rule(br, order)
    vals = p.potential(np.full(th.size, r), th) * w * np.sin(th) ** (n - 2)
    per = vals.reshape(br.size - 1, order).sum(axis=1)
    cum = np.concatenate([[0.0], np.cumsum(per)])
    return cum[np.searchsorted(br, taus)]


def cumulative_compare(p, P, r, theta0, n, points=()):
    """Cap integral of (P - p)(r y) over {y_1 >= cos theta0}."""
    taus = np.array([theta0])
    diff = cumulative_profile(P, r, n, taus, points) - cumulative_profile(p, r, n, taus, points)
    return polar_surface_weight(n) * float(diff[0])


# ---------------------------------------------------------------------------
# dominance


@dataclass
class DominanceReport:
    star_margin: dict
    mean_margin: dict
    violations: list

    @property
    def ok(self):
        return not self.violations


class DominanceReference:
    """Star profiles and convex means of the comparison potential, computed once."""

    def __init__(self, P, n, r_grid, phis, cells=512, points=()):
        self.P, self.n, self.r_grid, self.phis, self.cells = P, n, tuple(r_grid), list(phis), cells
        self.stars = {r: star_of_potential(P, r, n, cells) for r in self.r_grid}
        self.means = {(r, phi.tag): convex_mean(P, phi, r, n, points) for r in self.r_grid for phi in self.phis}


def dominance_check(p, P, n=None, r_grid=None, phis=None, tol=1e-9, cells=512, points=()):
    """Star margins min(P* - p*) and convex-mean margins int phi(P) - int phi(p).

    ``P`` is a potential or a :class:`DominanceReference`. Convex-mean
    tolerances are relative to ``max(1, |int phi(P)|)``.
    """
    ref = P if isinstance(P, DominanceReference) else DominanceReference(P, n, r_grid, phis, cells, points)
    star_margin, mean_margin, bad = {}, {}, []
    for r in ref.r_grid:
        sP = ref.stars[r]
        sp = star_of_potential(p, r, ref.n, ref.cells)
        diff = sP.values - sp.values
        i = int(np.argmin(diff))
        star_margin[r] = float(diff[i])
        scale = max(1.0, float(np.max(np.abs(sP.values))))
        if diff[i] < -tol * scale:
            bad.append(("star", r, float(sP.theta[i]), float(diff[i])))
        for phi in ref.phis:
            a = ref.means[(r, phi.tag)]
            b = convex_mean(p, phi, r, ref.n)
            mean_margin[(r, phi.tag)] = a - b
            if a - b < -tol * max(1.0, abs(a)):
                bad.append(("mean", r, phi.tag, a - b))
    return DominanceReport(star_margin, mean_margin, bad)


def ball_extremes(p, r, samples=721):
    """max and min of p over the closed ball of radius r (attained on its boundary sphere)."""
    th = np.linspace(0.0, np.pi, samples)
    vals = p.potential(np.full(th.size, r), th)
    i, j = int(np.argmax(vals)), int(np.argmin(vals))
    fmax = lambda t: -float(p.potential(np.array([r]), np.array([t]))[0])
    fmin = lambda t: float(p.potential(np.array([r]), np.array([t]))[0])
    hi = vals[i]
    lo = vals[j]
    for idx, f, sign in ((i, fmax, -1.0), (j, fmin, 1.0)):
        a, b = th[max(idx - 1, 0)], th[min(idx + 1, samples - 1)]
        res = minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
        if sign < 0:
            hi = max(hi, -res.fun)
        else:
            lo = min(lo, res.fun)
    return float(hi), float(lo)
