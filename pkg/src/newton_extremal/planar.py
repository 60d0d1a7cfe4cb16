"""Closed-form planar (n = 2) extremal potentials for two boundary arcs.

With ``b = cos xi1`` and ``a = cos xi2`` the extremal logarithmic potential
``P`` (normalised by ``P(0) = 0``) satisfies ``r dP/dr = Re(f - 1)`` and
``dP/dtheta = Re(i f)`` where

    f(z) = ((1 + z^2 - 2 a z) / (1 + z^2 - 2 b z))^{1/2},   f(0) = 1.

Each quadratic factors as ``(1 - z e^{i xi})(1 - z e^{-i xi})`` and every
factor has non-negative real part on the closed disc, so the principal
square root of each factor gives the branch continued from ``f(0) = 1``.
On the unit circle ``dP/dtheta`` vanishes on both arcs and equals
``-s_b(theta)`` on the gap, with ``s_b = ((cos theta - a) / (b - cos theta))^{1/2}``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import BranchAmbiguity, QuadratureFailure
from .quadrature import gauss_legendre, sqrt_endpoint_quad


@dataclass(frozen=True)
class PlanarGeometry:
    xi1: float
    xi2: float

    def __post_init__(self):
        if not 0.0 < self.xi1 < self.xi2 < np.pi:
            raise ValueError("need 0 < xi1 < xi2 < pi")

    @property
    def a(self):
        return float(np.cos(self.xi2))

    @property
    def b(self):
        return float(np.cos(self.xi1))


def _one_minus(r, phi):
    """1 - r e^{i phi} with the real part (1 - r) + 2 r sin^2(phi / 2) free of cancellation."""
    return (1.0 - r) + 2.0 * r * np.sin(0.5 * phi) ** 2 - 1j * r * np.sin(phi)


def _f_polar(r, theta, g):
    num = np.sqrt(_one_minus(r, theta + g.xi2)) * np.sqrt(_one_minus(r, theta - g.xi2))
    den = np.sqrt(_one_minus(r, theta + g.xi1)) * np.sqrt(_one_minus(r, theta - g.xi1))
    return num / den


def f_branch(z, g):
    z = np.asarray(z, complex)
    return _f_polar(np.abs(z), np.angle(z), g)


def dP_dtheta(theta, g, r=1.0, tol=1e-14):
    theta = np.asarray(theta, float)
    if r == 1.0 and np.any((np.abs(theta - g.xi1) < tol) | (np.abs(theta - g.xi2) < tol)):
        raise BranchAmbiguity("boundary derivative requested at an arc endpoint")
    return np.real(1j * _f_polar(r, theta, g))


def gap_slope(theta, g, xi1=None):
    """s_b(theta) on the gap (xi1, xi2), i.e. -dP/dtheta there; ``xi1`` overrides b = cos xi1.

    Differences of cosines are written as products of sines to keep digits at the ends.
    """
    xi1 = g.xi1 if xi1 is None else xi1
    theta = np.asarray(theta, float)
    num = np.sin(0.5 * (g.xi2 + theta)) * np.sin(0.5 * (g.xi2 - theta))
    den = np.sin(0.5 * (theta + xi1)) * np.sin(0.5 * (theta - xi1))
    return np.sqrt(num / den)


def _radial(func, order=64):
    """int_0^1 func(r) dr / r for integrands that are O(r) at 0 and bounded at 1."""
    x, w = gauss_legendre(order)
    total = 0.0
    for lo, hi in ((0.0, 0.5), (0.5, 1.0)):
        r = lo + 0.5 * (hi - lo) * (x + 1.0)
        total += 0.5 * (hi - lo) * np.sum(w * func(r) / r)
    return float(total)


def planar_dM(g, order=64):
    """(d, M) from the radial integrals along theta = pi and theta = 0."""
    a, b = g.a, g.b
    M = _radial(lambda r: np.sqrt((1 + r * r - 2 * a * r) / (1 + r * r - 2 * b * r)) - 1.0, order)
    d = _radial(lambda r: np.sqrt((1 + r * r + 2 * a * r) / (1 + r * r + 2 * b * r)) - 1.0, order)
    check = _radial(lambda r: np.sqrt((1 + r * r - 2 * a * r) / (1 + r * r - 2 * b * r)) - 1.0, 2 * order)
    if abs(check - M) > 1e-12 * max(1.0, abs(M)):
        raise QuadratureFailure("radial integral for M not converged")
    return d, M


def gap_drop(g, order=48):
    """M - d as the integral of s_b over the gap (square-root ends absorbed)."""
    return sqrt_endpoint_quad(lambda t: gap_slope(t, g), g.xi1, g.xi2, order)


def d_shift_integral(g, g2, order=64):
    """d' - d as a single radial integral, for xi1 < xi1' and a common xi2."""
    a, b, b2 = g.a, g.b, g2.b
    return _radial(lambda r: np.sqrt((1 + r * r + 2 * a * r) / (1 + r * r + 2 * b2 * r))
                   - np.sqrt((1 + r * r + 2 * a * r) / (1 + r * r + 2 * b * r)), order)


def _check_pair(g, g2):
    if not (g.xi1 <= g2.xi1 and g.xi2 == g2.xi2):
        raise ValueError("need xi1 <= xi1' and equal xi2")


def tail_slope_gain(g, g2, theta0, order=48):
    """int_{theta0}^{xi2} (s_{b'} - s_b) dtheta for xi1' <= theta0 < xi2; positive."""
    _check_pair(g, g2)
    if not g2.xi1 <= theta0 < g.xi2:
        raise ValueError("need xi1' <= theta0 < xi2")
    left = theta0 == g2.xi1
    f = lambda t: gap_slope(t, g, g2.xi1) - gap_slope(t, g)
    return sqrt_endpoint_quad(f, theta0, g.xi2, order, left=left, right=True)


def boundary_profile(theta, g, order=48):
    """P(1, theta), rebuilt from d by integrating the gap slope back from xi2."""
    d, _ = planar_dM(g)
    out = []
    for t in np.atleast_1d(theta):
        lo = min(max(t, g.xi1), g.xi2)
        out.append(d + sqrt_endpoint_quad(lambda s: gap_slope(s, g), lo, g.xi2, order,
                                          left=(lo == g.xi1), right=True))
    return np.array(out)


def cumulative_boundary(tau, g, order=48):
    """int_0^tau P(1, theta) dtheta = tau P(1, tau) + int_{xi1}^{min(tau, xi2)} theta s_b dtheta."""
    tau = np.atleast_1d(np.asarray(tau, float))
    prof = boundary_profile(tau, g, order)
    out = np.empty(tau.size)
    for i, t in enumerate(tau):
        hi = min(t, g.xi2)
        extra = 0.0
        if hi > g.xi1:
            extra = sqrt_endpoint_quad(lambda s: s * gap_slope(s, g), g.xi1, hi, order,
                                       left=True, right=(hi == g.xi2))
        out[i] = t * prof[i] + extra
    return out


@dataclass
class CumulativeGap:
    tau: np.ndarray
    values: np.ndarray
    max_value: float
    argmax: float


def cumulative_boundary_gap(g, g2, samples=257, order=48):
    """Cumulative difference int_0^tau [P'(1, .) - P(1, .)] over a tau grid."""
    _check_pair(g, g2)
    tau = np.unique(np.concatenate([np.linspace(0.0, np.pi, samples), [g.xi1, g2.xi1, g.xi2]]))
    vals = cumulative_boundary(tau, g2, order) - cumulative_boundary(tau, g, order)
    i = int(np.argmax(vals))
    return CumulativeGap(tau, vals, float(vals[i]), float(tau[i]))
