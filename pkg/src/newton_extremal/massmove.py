"""Mass-moving variations of sphere measures and the kernel ratio monotonicity.

Mass on ``[tau1, tau2]`` is pushed toward the south pole and an equal mass
on ``[tau2, tau3]`` toward the north pole through the reparametrisation
``g(theta1, eps)`` defined by

    (1 + eps) [ (1 + cos g)^{1 - 2/n} + B ] = (1 + cos theta1)^{1 - 2/n} + B,

with weights ``1 + eps`` and ``1 - eps`` on the two pieces so the total mass
is unchanged.
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import OutOfRange
from .kernel import KernelEval, dh_dtheta, dh_dtheta1_at_pi, eval_c_n, normalized_kernel
from .measure import AxisymMeasure, potential_eval
from .quadrature import graded_breaks, panel_rule


def _phi(theta, n):
    # (1 + cos theta)^(1 - 2/n) without cancellation near pi
    return (2.0 * np.cos(0.5 * theta) ** 2) ** (1.0 - 2.0 / n)


def g_tilde(theta1, eps, B, n):
    """Solve the defining relation for g in (0, pi) in closed form."""
    theta1 = np.asarray(theta1, float)
    if eps == 0.0:
        return theta1.copy()
    q = (_phi(theta1, n) + B) / (1.0 + eps) - B
    top = 2.0 ** (1.0 - 2.0 / n)
    if np.any(q < 0.0) or np.any(q > top):
        raise OutOfRange("reparametrised angle leaves (0, pi)")
    # 1 + cos g = q^(n/(n-2)); use the half-angle form for accuracy
    half = np.sqrt(0.5 * q ** (n / (n - 2.0)))
    return 2.0 * np.arccos(np.clip(half, 0.0, 1.0))


def g_residual(theta1, eps, B, n):
    g = g_tilde(theta1, eps, B, n)
    return (1.0 + eps) * (_phi(g, n) + B) - (_phi(theta1, n) + B)


@dataclass(frozen=True)
class MassMovePlan:
    """Two groups of base atoms with equal mass: ``left`` on [tau1, tau2], ``right`` on [tau2, tau3]."""

    n: int
    B: float
    rest: AxisymMeasure
    left_theta: np.ndarray
    left_mass: np.ndarray
    right_theta: np.ndarray
    right_mass: np.ndarray
    taus: tuple

    @classmethod
    def balanced(cls, base, tau1, tau3, B):
        """Split the base mass in (tau1, tau3) into two equal halves, cutting one node if needed."""
        th, ms = base.thetas, base.masses
        inside = (th > tau1) & (th < tau3)
        order = np.argsort(th[inside], kind="stable")
        t_in, m_in = th[inside][order], ms[inside][order]
        if t_in.size < 2:
            raise ValueError("need base mass inside (tau1, tau3)")
        half = 0.5 * m_in.sum()
        csum = np.cumsum(m_in)
        k = int(np.searchsorted(csum, half))
        before = csum[k - 1] if k > 0 else 0.0
        part = half - before
        left_t = np.concatenate([t_in[:k], [t_in[k]]])
        left_m = np.concatenate([m_in[:k], [part]])
        right_t = np.concatenate([[t_in[k]], t_in[k + 1:]])
        right_m = np.concatenate([[m_in[k] - part], m_in[k + 1:]])
        keep_l, keep_r = left_m > 0, right_m > 0
        rest = AxisymMeasure(base.n, node_theta=th[~inside], node_weight=ms[~inside])
        return cls(base.n, float(B), rest, left_t[keep_l], left_m[keep_l], right_t[keep_r],
                   right_m[keep_r], (float(tau1), float(t_in[k]), float(tau3)))

    def moved(self, eps):
        """Atoms of the perturbed part only (the rest does not depend on eps)."""
        gl = g_tilde(self.left_theta, eps, self.B, self.n)
        gr = g_tilde(self.right_theta, -eps, self.B, self.n)
        th = np.concatenate([gl, gr])
        ms = np.concatenate([(1.0 + eps) * self.left_mass, (1.0 - eps) * self.right_mass])
        return AxisymMeasure(self.n, node_theta=th, node_weight=ms, exclusion=0.0)

    def measure(self, eps):
        mv = self.moved(eps)
        return AxisymMeasure(self.n, node_theta=np.concatenate([self.rest.node_theta, mv.node_theta]),
                             node_weight=np.concatenate([self.rest.node_weight, mv.node_weight]))


def perturbed_potential(plan, eps, r, theta, on_singular="raise"):
    mv = potential_eval(plan.moved(eps), r, theta, on_singular)
    if plan.rest.thetas.size == 0:
        return mv
    return mv + potential_eval(plan.rest, r, theta, on_singular)


def eps_derivative(plan, eps, r, theta, step):
    """Central difference in eps of the moved part (the remainder cancels exactly)."""
    up = potential_eval(plan.moved(eps + step), r, theta)
    dn = potential_eval(plan.moved(eps - step), r, theta)
    return (up - dn) / (2.0 * step)


def slice_weight(theta1, theta0, n, panels=4):
    """k(theta1) = c_n int_0^theta0 h(1, theta, theta1) sin^{n-2} theta dtheta.

    The integrand has a logarithmic singularity at theta = theta1, handled by
    geometric grading of the panels toward it.
    """
    theta1 = np.atleast_1d(np.asarray(theta1, float))
    out = np.empty(theta1.shape)
    for i, t1 in enumerate(theta1):
        sing = [(t1, 0.0)] if 0.0 <= t1 <= theta0 else []
        br = graded_breaks(theta0, sing, panels, floor=1e-12)
        th, w = panel_rule(br, 16)
        k = normalized_kernel(1.0, th, t1, n)
        out[i] = np.sum(w * k * np.sin(th) ** (n - 2))
    return out


@dataclass
class PositivityReport:
    B: float
    min_derivative: float
    positive: bool
    witness: tuple
    cap_increase: float
    history: list


def derivative_positivity(base, n, theta0=np.pi / 3, taus=(1.5, 2.6), B0=10.0, eps0=1e-3,
              theta_grid=None, r_grid=(0.25, 0.5, 0.9, 1.0, 1.1, 2.0), B_max=1e4):
    """Positivity of the eps-derivative on [0, theta0], doubling B from B0 until it holds."""
    theta_grid = np.linspace(0.0, theta0, 33) if theta_grid is None else np.asarray(theta_grid)
    R, T = np.meshgrid(np.asarray(r_grid, float), theta_grid, indexing="ij")
    eps, step = 0.5 * eps0, 1e-4 * eps0
    B, history = B0, []
    while True:
        plan = MassMovePlan.balanced(base, taus[0], taus[1], B)
        der = eps_derivative(plan, eps, R.ravel(), T.ravel(), step)
        i = int(np.argmin(der))
        history.append((B, float(der[i])))
        if der[i] > 0 or B * 2 > B_max:
            break
        B *= 2
    # consequence: the weighted cap integral at r = 1 grows with eps
    w_cap = lambda e: float(np.sum(plan.moved(e).node_weight * slice_weight(plan.moved(e).node_theta, theta0, n)))
    increase = w_cap(eps0) - w_cap(0.0)
    return PositivityReport(B, float(der[i]), bool(der[i] > 0), (float(R.ravel()[i]), float(T.ravel()[i])),
                     increase, history)


def mean_value_defect(plan, eps, step=1e-6):
    """d/d eps of int_0^pi P_eps(1, theta) sin^{n-2} theta dtheta (zero by the mean value property)."""
    f = lambda e: float(np.sum(plan.moved(e).node_weight * slice_weight(plan.moved(e).node_theta, np.pi, plan.n)))
    return (f(eps + step) - f(eps - step)) / (2.0 * step)


def tangent_substitution(theta, theta1):
    """Both sides of 2t / (1 + t^2) = sin(theta) sin(theta1) / (1 - cos(theta) cos(theta1))."""
    t = np.tan(0.5 * theta) / np.tan(0.5 * theta1)
    lhs = 2.0 * t / (1.0 + t * t)
    rhs = np.sin(theta) * np.sin(theta1) / (1.0 - np.cos(theta) * np.cos(theta1))
    return lhs, rhs


@dataclass
class RatioReport:
    n: int
    fraction_positive: float
    min_value: float
    witness: tuple


def ratio_monotonicity(n, grid=None, step=1e-5, exclusion=0.05):
    """Sign of d/d theta1 of [dh/dtheta1(1, theta, .) / dh/dtheta1(1, pi, .)] on a grid."""
    g = np.linspace(0.05, np.pi - 0.05, 37) if grid is None else np.asarray(grid)
    T, T1 = np.meshgrid(g, g, indexing="ij")
    keep = np.abs(T - T1) >= exclusion
    T, T1 = T[keep], T1[keep]
    cfg = KernelEval(n)

    def ratio(t1):
        # symmetry of h: d/dtheta1 h(1, theta, theta1) is the first-argument derivative at (theta1, theta)
        return dh_dtheta(t1, T, cfg) / dh_dtheta1_at_pi(t1, n)

    val = (ratio(T1 + step) - ratio(T1 - step)) / (2.0 * step)
    i = int(np.argmin(val))
    return RatioReport(n, float(np.mean(val > 0)), float(val[i]), (float(T[i]), float(T1[i])))


@dataclass
class SupportReport:
    offending_mass: float
    flat_from: float
    tail_max_gap: float


def support_criterion(measure, potential, d, theta0, tol=1e-7, samples=400):
    """Mass at theta1 > theta0 where P(1, theta1) exceeds d, and the start of the flat tail.

    ``potential`` evaluates P(r, theta); ``measure`` supplies the support. Values at
    atoms are taken from the two neighbouring midpoints (atoms stand for a density).
    """
    th, ms = measure.thetas, measure.masses
    sel = th > theta0
    th, ms = th[sel], ms[sel]
    if th.size:
        order = np.argsort(th)
        th, ms = th[order], ms[order]
        probe = np.concatenate([[0.5 * (th[0] + theta0)], 0.5 * (th[1:] + th[:-1]), [0.5 * (th[-1] + np.pi)]])
        vals = potential(np.ones_like(probe), probe)
        at_atoms = np.minimum(vals[:-1], vals[1:])
        offending = float(np.sum(ms[at_atoms > d + tol]))
    else:
        offending = 0.0
    grid = np.linspace(theta0, np.pi, samples)
    vals = potential(np.ones_like(grid), grid)
    flat = np.abs(vals - d) <= tol
    start = np.pi
    for k in range(samples - 1, -1, -1):
        if not flat[k]:
            break
        start = grid[k]
    tail = vals[grid >= start]
    return SupportReport(offending, float(start), float(np.max(np.abs(tail - d))) if tail.size else 0.0)


def lp_maximizer(d, n, theta0, atoms=96):
    """Exploratory surrogate for the maximiser of the cap integral over F_d^infinity.

    Maximises sum_j m_j k(theta_j) over atoms on a grid with sum m_j = 1 and
    p >= d at the midpoints between atoms on the unit sphere.
    """
    th = np.linspace(0.0, np.pi, atoms)
    mid = 0.5 * (th[1:] + th[:-1])
    K = normalized_kernel(1.0, mid[:, None], th[None, :], n)
    obj = -slice_weight(th, theta0, n)
    res = linprog(obj, A_ub=-K, b_ub=-d * np.ones(mid.size), A_eq=np.ones((1, atoms)), b_eq=[1.0],
                  bounds=[(0, None)] * atoms, method="highs")
    if not res.success:
        raise RuntimeError(res.message)
    m = np.clip(res.x, 0.0, None)
    keep = m > 1e-14
    return AxisymMeasure(n, node_theta=th[keep], node_weight=m[keep], exclusion=0.0)
