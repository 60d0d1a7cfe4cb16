"""Inversion about e1 that flattens the unit sphere onto the hyperplane y1 = 0.

``T(x) = -(x - e1) / |x - e1|^2 - e1 / 2`` sends the unit ball to the half
space ``y1 > 0``, the sphere to ``y1 = 0``, the cap ``{x1 >= cos xi}`` to the
exterior ``|y'| >= cot(xi / 2) / 2`` and ``{x1 <= cos xi}`` to the interior
disc. Harmonic functions are carried along by the usual factor
``|y + e1 / 2|^{2-n}``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NoiseFloor, PoleInput


def _e1(dim):
    e = np.zeros(dim)
    e[0] = 1.0
    return e


def forward(x):
    """T(x) for points along the last axis."""
    x = np.asarray(x, float)
    z = x - _e1(x.shape[-1])
    s = np.sum(z * z, axis=-1, keepdims=True)
    if np.any(s == 0.0):
        raise PoleInput("forward map evaluated at e1")
    return -z / s - 0.5 * _e1(x.shape[-1])


def inverse(y):
    y = np.asarray(y, float)
    z = y + 0.5 * _e1(y.shape[-1])
    s = np.sum(z * z, axis=-1, keepdims=True)
    if np.any(s == 0.0):
        raise PoleInput("inverse map evaluated at -e1/2")
    return _e1(y.shape[-1]) - z / s


def cap_radius(xi):
    """|y'| of the image of the parallel x1 = cos(xi) on the sphere."""
    return 0.5 / np.tan(0.5 * xi)


def classify_image(y, xi1, xi2, tol=1e-12):
    """Region labels of image points: 'ball', 'outside', 'E1', 'E2' or 'gap' (sphere).

    ``tol`` is relative to ``max(1, |y|^2)``: images of points near e1 carry a
    rounding error in y1 that grows with |y|.
    """
    y = np.asarray(y, float)
    y1 = y[..., 0]
    rad = np.linalg.norm(y[..., 1:], axis=-1)
    flat = np.abs(y1) <= tol * np.maximum(1.0, np.sum(y * y, axis=-1))
    lab = np.where(y1 > 0, "ball", "outside").astype(object)
    lab[flat & (rad >= cap_radius(xi1) - tol)] = "E1"
    lab[flat & (rad <= cap_radius(xi2) + tol)] = "E2"
    lab[flat & (rad < cap_radius(xi1) - tol) & (rad > cap_radius(xi2) + tol)] = "gap"
    return lab


def axisym_function(p):
    """Cartesian view ``x -> p(|x|, angle to e1)`` of an axisymmetric potential."""
    def f(x):
        x = np.asarray(x, float)
        r = np.linalg.norm(x, axis=-1)
        cos = np.where(r > 0, x[..., 0] / np.where(r > 0, r, 1.0), 1.0)
        theta = np.arccos(np.clip(cos, -1.0, 1.0))
        return p.potential(r, theta)
    return f


def kelvin_lift(u, n):
    """v(y) = |y + e1/2|^{2-n} u(T^{-1}(y))."""
    def v(y):
        y = np.asarray(y, float)
        z = y + 0.5 * _e1(y.shape[-1])
        return np.linalg.norm(z, axis=-1) ** (2.0 - n) * u(inverse(y))
    return v


def spherical_mean_deviation(f, centre, radius):
    """Mean of ``f`` over the 2n points centre +- radius e_i, minus f(centre).

    The cross design integrates quadratics exactly over the sphere, so the
    deviation is O(radius^4) for harmonic ``f`` and O(radius^2) otherwise.
    """
    centre = np.asarray(centre, float)
    dim = centre.size
    pts = np.concatenate([centre + radius * np.eye(dim), centre - radius * np.eye(dim)])
    return float(np.mean(f(pts)) - f(centre[None, :])[0])


@dataclass
class BoundaryLimit:
    estimate: float
    target: float
    deltas: np.ndarray
    slopes: np.ndarray

    @property
    def rel_error(self):
        return abs(self.estimate / self.target - 1.0)


def boundary_limit_check(sol, ks=range(4, 13)):
    """Extrapolated limit of (d - V(r, xi2)) / (1 - r) as r -> 1 from inside.

    The model ``L + c1 delta^{1/2} + c2 delta + c3 delta^{3/2}`` is fitted by
    least squares over ``delta = 2^{-k}``; the target value is ``-(n-2) d / 2``.
    """
    g = sol.geometry
    if not g.xi2 < np.pi or sol.kind != "two-cap":
        raise ValueError("boundary limit needs a two-cap solution with xi2 < pi")
    delta = 2.0 ** -np.asarray(list(ks), float)
    V = sol.potential(1.0 - delta, np.full(delta.size, g.xi2))
    slopes = (sol.d - V) / delta
    if sol.residual / delta.min() > 1e-3 * abs(sol.d):
        raise NoiseFloor("solver residual dominates the finest difference quotient")
    X = np.column_stack([np.ones_like(delta), np.sqrt(delta), delta, delta ** 1.5])
    coef = np.linalg.lstsq(X, slopes, rcond=None)[0]
    return BoundaryLimit(float(coef[0]), -(g.n - 2) * sol.d / 2.0, delta, slopes)
