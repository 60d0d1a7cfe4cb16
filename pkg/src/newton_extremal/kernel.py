"""Axisymmetric sphere kernel h(r, theta, theta1) and its derivative machinery.

The kernel is the average of |x - y|^(2-n) over the parallel of the unit
sphere at polar angle ``theta1``, seen from the point at radius ``r`` and
polar angle ``theta``, up to the constant ``c_n``::

    h(r, t, t1) = int_0^pi (1 + r^2 - 2 r psi)^(1 - n/2) sin(phi)^(n-3) dphi
    psi = cos t cos t1 + cos phi sin t sin t1

Two independent routes are provided:

* quadrature (:func:`eval_h`, :func:`dh_dtheta`, :func:`abc_quadrature`):
  Gauss-Legendre in ``phi`` with dyadic panels toward the peak at ``phi = 0``;
* series (:func:`normalized_kernel`, :func:`series_ABC`, :func:`eval_D`):
  Gegenbauer-type expansions in ``(a/b)^2`` continued past ``1/2`` by the
  logarithmic connection formulas of :mod:`newton_extremal.special`.

The solver uses the series route; the quadrature route is its oracle.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import OddDimension, SingularPoint, SlowConvergence
from .quadrature import gauss_legendre, panel_rule
from .special import hyp2f1_gap

_TINY = 1e-300


@dataclass(frozen=True)
class KernelEval:
    """Immutable evaluation settings for one dimension ``n``.

    ``quad_order`` is the Gauss-Legendre order of the plain rule on
    ``[0, pi]``; refined evaluations use panels of ``quad_order // 4``
    nodes. ``exclusion`` is the diagonal exclusion radius at ``r = 1``.
    """

    n: int
    quad_order: int = 64
    series_tol: float = 1e-15
    max_terms: int = 200
    exclusion: float = 1e-3
    ratio_guard: float = 0.999

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("n must be >= 3 (planar kernels live in the planar module)")
        if self.quad_order < 16:
            raise ValueError("quad_order must be >= 16")
        if not 0.0 < self.series_tol < 1e-4:
            raise ValueError("series_tol must lie in (0, 1e-4)")
        if self.max_terms < 8:
            raise ValueError("max_terms must be >= 8")

    @property
    def nu(self):
        return 0.5 * self.n - 1.0

    @property
    def c_n(self):
        return eval_c_n(self.n)


def eval_psi(theta, theta1, phi):
    return np.cos(theta) * np.cos(theta1) + np.cos(phi) * np.sin(theta) * np.sin(theta1)


@lru_cache(maxsize=None)
def eval_c_n(n):
    """1 / int_0^pi sin^(n-3) = Gamma(n/2 - 1/2) / (Gamma(n/2 - 1) Gamma(1/2))."""
    if n < 3:
        raise ValueError("n must be >= 3")
    return float(np.exp(gammaln(0.5 * n - 0.5) - gammaln(0.5 * n - 1.0) - gammaln(0.5)))


def gamma_ratio(n):
    """Gamma(n/2 - 1) Gamma(1/2) / Gamma(n/2 - 1/2), the l = 0 coefficient; equals 1/c_n."""
    return 1.0 / eval_c_n(n)


# ---------------------------------------------------------------------------
# quadrature route


def _phi_integral(big, small, gap, power, n, order=64):
    """int_0^pi (big - small cos phi)^(-power) sin(phi)^(n-3) dphi, vectorised.

    ``gap`` must equal ``big - small`` (passed separately to avoid
    cancellation); ``small >= 0``.
    """
    big, small, gap = np.broadcast_arrays(
        np.asarray(big, float), np.asarray(small, float), np.asarray(gap, float)
    )
    shape = big.shape
    big, small, gap = big.ravel(), small.ravel(), gap.ravel()
    out = np.empty(big.shape)
    # width of the peak at phi = 0
    with np.errstate(divide="ignore"):
        width = np.sqrt(2.0 * gap / np.maximum(small, _TINY))
    levels = np.where(width >= 1.0, 0, np.ceil(np.log2(np.pi / np.maximum(width, 1e-30))) + 1)
    levels = np.minimum(levels, 80).astype(int)
    panel = max(order // 4, 12)
    for lev in np.unique(levels):
        sel = levels == lev
        if lev == 0:
            x, w = gauss_legendre(order)
            phi = 0.5 * np.pi * (x + 1.0)
            wts = 0.5 * np.pi * w
        else:
            breaks = np.concatenate([[0.0], np.pi * 2.0 ** -np.arange(lev, -1, -1)])
            phi, wts = panel_rule(breaks, panel)
        s2 = np.sin(0.5 * phi) ** 2
        base = gap[sel, None] + 2.0 * small[sel, None] * s2[None, :]
        integrand = base ** (-power) * np.sin(phi)[None, :] ** (n - 3)
        out[sel] = integrand @ wts
    return out.reshape(shape)


def _kernel_geometry(r, theta, theta1, diff=None):
    """Return (big, small, gap) with big - small cos(phi) = 1 + r^2 - 2 r psi."""
    r = np.asarray(r, float)
    theta = np.asarray(theta, float)
    theta1 = np.asarray(theta1, float)
    d = theta - theta1 if diff is None else np.asarray(diff, float)
    cross = 2.0 * r * np.sin(theta) * np.sin(theta1)
    gap = (1.0 - r) ** 2 + 4.0 * r * np.sin(0.5 * d) ** 2
    # 1 + r^2 - 2 r cos(theta) cos(theta1), written without cancellation near the poles
    big = gap + cross
    # angles outside [0, pi] flip the sign of cross; big - |cross| then uses theta + theta1
    if np.any(cross < 0):
        alt = (1.0 - r) ** 2 + 4.0 * r * np.sin(0.5 * (theta + theta1)) ** 2
        gap = np.where(cross < 0, alt, gap)
    return big, np.abs(cross), gap


def _check_singular(r, theta, theta1, radius):
    r, theta, theta1 = np.broadcast_arrays(r, theta, theta1)
    bad = (r == 1.0) & (np.abs(np.asarray(theta) - np.asarray(theta1)) < radius)
    if np.any(bad):
        i = np.flatnonzero(bad.ravel())[0]
        raise SingularPoint(
            f"kernel singular at r=1, theta={np.ravel(theta)[i]:.6g}, theta1={np.ravel(theta1)[i]:.6g}"
        )


def eval_h(r, theta, theta1, cfg):
    """h(r, theta, theta1) by Gauss-Legendre quadrature in ``phi``."""
    _check_singular(r, theta, theta1, cfg.exclusion)
    big, small, gap = _kernel_geometry(r, theta, theta1)
    return _phi_integral(big, small, gap, cfg.nu, cfg.n, cfg.quad_order)


def _unit_sphere_abc(theta, theta1):
    """a = sin t sin t1, b = 1 - cos t cos t1 and b - a = 1 - cos(t - t1), stably."""
    theta = np.asarray(theta, float)
    theta1 = np.asarray(theta1, float)
    a = np.sin(theta) * np.sin(theta1)
    b = 1.0 - np.cos(theta) * np.cos(theta1)
    gap = 2.0 * np.sin(0.5 * (theta - theta1)) ** 2
    return a, b, gap


def _f_integrals(theta, theta1, n, order, powers):
    a, b, gap = _unit_sphere_abc(theta, theta1)
    return [_phi_integral(b, a, gap, p, n, order) for p in powers]


def dh_dtheta(theta, theta1, cfg):
    """d h(1, theta, theta1) / d theta from the rewritten derivative formula.

    ``-(n/2-1) cot(theta) h + (n-2) 2^(-n/2) (cos theta - cos theta1) / sin(theta) * int f``
    with ``f = (1 - psi)^(-n/2) sin^(n-3) phi``.
    """
    theta = np.asarray(theta, float)
    theta1 = np.asarray(theta1, float)
    if np.any((theta <= 0.0) | (theta >= np.pi)):
        raise SingularPoint("dh_dtheta needs theta in (0, pi)")
    _check_singular(1.0, theta, theta1, cfg.exclusion)
    n, nu = cfg.n, cfg.nu
    h1 = eval_h(1.0, theta, theta1, cfg)
    (fint,) = _f_integrals(theta, theta1, n, cfg.quad_order, [n / 2.0])
    return (-nu * np.cos(theta) / np.sin(theta) * h1
            + (n - 2.0) * 2.0 ** (-n / 2.0) * (np.cos(theta) - np.cos(theta1)) / np.sin(theta) * fint)


def dh_dtheta1_at_pi(theta, n):
    """Closed form (n/2 - 1) sin(theta) (1 + cos(theta))^(-n/2).

    This is the derivative of ``2^(n/2-1) c_n h(1, pi, t)`` at ``t = theta``,
    i.e. of the kernel with the pole fixed at ``-e1`` (see
    :func:`dh_dtheta1_at_pi_kernel` for the unnormalised kernel).
    """
    theta = np.asarray(theta, float)
    one_plus = 1.0 + np.cos(theta)
    if np.any(one_plus <= 1e-300 ** (2.0 / n)):
        raise OverflowError("(1 + cos theta)^(-n/2) overflows as theta -> pi")
    return (0.5 * n - 1.0) * np.sin(theta) * one_plus ** (-0.5 * n)


def dh_dtheta1_at_pi_kernel(theta, n):
    """d/dt h(1, pi, t) at t = theta for the unnormalised kernel h."""
    return 2.0 ** (1.0 - 0.5 * n) / eval_c_n(n) * dh_dtheta1_at_pi(theta, n)


# ---------------------------------------------------------------------------
# series route


def normalized_kernel(r, theta, theta1, n, diff=None):
    """c_n h(r, theta, theta1) via the hypergeometric form.

    ``c_n h = big^(-nu) 2F1(nu/2, nu/2 + 1/2; nu + 1/2; (small/big)^2)`` with
    ``nu = n/2 - 1``; exact singular behaviour at the diagonal is handled by
    the logarithmic continuation. ``diff`` (= theta - theta1) may be supplied
    when it is known to better relative accuracy than the subtraction.
    """
    nu = 0.5 * n - 1.0
    big, small, gap = _kernel_geometry(r, theta, theta1, diff)
    if np.any(gap <= 0.0):
        raise SingularPoint("normalized_kernel evaluated on its singularity")
    w = (small / big) ** 2
    omw = gap * (big + small) / big ** 2
    return big ** (-nu) * hyp2f1_gap(0.5 * nu, 0.5 * nu + 0.5, 0, w, omw)


def _pochhammer_ratio_terms(lam, n, count):
    """Coefficients (lam)_{2l} Gamma(n/2-1) Gamma(l+1/2) / ((2l)! Gamma(n/2+l-1/2)), l < count."""
    l = np.arange(count, dtype=float)
    log_c = (gammaln(lam + 2 * l) - gammaln(lam) + gammaln(0.5 * n - 1.0) + gammaln(l + 0.5)
             - gammaln(2 * l + 1.0) - gammaln(0.5 * n + l - 0.5))
    return np.exp(log_c)


@lru_cache(maxsize=None)
def coefficient_table(n, max_terms):
    """Rows A_l, B_l, C_l (lam = n/2 - 1, n/2, n/2 + 1), via log-Gamma accumulation."""
    table = np.array([_pochhammer_ratio_terms(0.5 * n - 1.0 + k, n, max_terms) for k in range(3)])
    table.setflags(write=False)
    return table


def series_ABC(a, b, n, cfg):
    """The three sums A, B, C in powers of (a/b)^2.

    Uses the truncated coefficient table while ``(a/b)^2 <= 1/2`` (stop
    when the term drops below ``series_tol`` of the partial sum) and the
    logarithmic continuation above it.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if np.any(a < 0) or np.any(b <= a) or np.any(b > 2.0 + 1e-12):
        raise ValueError("series_ABC needs 0 <= a < b <= 2")
    ratio = a / b
    if np.any(ratio > cfg.ratio_guard):
        raise SlowConvergence(f"a/b = {np.max(ratio):.6g} exceeds guard {cfg.ratio_guard}")
    a, b = np.broadcast_arrays(a, b)
    w = (a / b) ** 2
    omw = (b - a) * (b + a) / b ** 2
    return _abc_from_w(w, omw, n, cfg)


def _abc_from_w(w, omw, n, cfg):
    nu = 0.5 * n - 1.0
    g = gamma_ratio(n)
    out = []
    table = coefficient_table(n, cfg.max_terms)
    low = w <= 0.5
    for k in range(3):
        vals = np.empty(w.shape)
        if np.any(low):
            vals[low] = _truncated_sum(table[k], w[low], cfg)
        if np.any(~low):
            a_, b_ = 0.5 * (nu + k), 0.5 * (nu + k) + 0.5
            vals[~low] = g * hyp2f1_gap(a_, b_, k, w[~low], omw[~low])
        out.append(vals)
    return tuple(out)


def _truncated_sum(coeffs, w, cfg):
    total = np.zeros_like(w)
    power = np.ones_like(w)
    for l, c in enumerate(coeffs):
        term = c * power
        total = total + term
        if l > 0 and np.all(term <= cfg.series_tol * total):
            return total
        power = power * w
    raise SlowConvergence(f"A/B/C series not converged in {cfg.max_terms} terms")


def abc_quadrature(a, b, gap, n, cfg):
    """A, B, C from their defining integrals ``b^p int (1 - psi)^(-p) sin^(n-3)``."""
    nu = 0.5 * n - 1.0
    return tuple(
        b ** (nu + k) * _phi_integral(b, a, gap, nu + k, n, cfg.quad_order) for k in range(3)
    )


def _d_from_abc(A, B, C, a, b, n):
    nu = 0.5 * n - 1.0
    q = a * a / b
    numer = (b * nu * (B - A) + nu * (A - C) + (B - C) - nu * q * B + 0.5 * n * (q / b) * C)
    return numer / gamma_ratio(n)


def eval_D(theta, theta1, n, cfg):
    """The bracket D whose sign is the sign of the mixed partial of h at r = 1."""
    theta = np.asarray(theta, float)
    theta1 = np.asarray(theta1, float)
    if np.any(theta == theta1):
        raise SingularPoint("eval_D needs theta != theta1")
    a, b, gap = _unit_sphere_abc(theta, theta1)
    if np.any(a / b > cfg.ratio_guard):
        raise SlowConvergence("a/b beyond guard")
    w = (a / b) ** 2
    omw = gap * (b + a) / b ** 2
    A, B, C = _abc_from_w(np.atleast_1d(w), np.atleast_1d(omw), n, cfg)
    A, B, C = (x.reshape(np.shape(w)) for x in (A, B, C))
    return _d_from_abc(A, B, C, a, b, n)


def mixed_partial(theta, theta1, n, cfg):
    """d^2 h(1, theta, theta1) / d theta d theta1 assembled from D."""
    a, b, _ = _unit_sphere_abc(theta, theta1)
    nu = 0.5 * n - 1.0
    return nu * gamma_ratio(n) * eval_D(theta, theta1, n, cfg) / ((2.0 * b) ** nu * a)


def normalized_a_coeff(l, m):
    """A_l scaled so the l = 0 coefficient is 1 (n = 2m)."""
    l = np.asarray(l, float)
    return np.exp(gammaln(m - 1.0 + 2 * l) - gammaln(m - 1.0) + gammaln(l + 0.5) - gammaln(0.5)
                  + gammaln(m - 0.5) - gammaln(2 * l + 1.0) - gammaln(m + l - 0.5))


def term_T(l, m, a, b):
    """(T_l^1, T_l^2): the two bracketed pieces of the l-th term of D, for n = 2m.

    ``T_0^1 = 0`` by convention; ``sum_l (T_l^1 + T_l^2) = D``.
    """
    if m != int(m):
        raise OddDimension("term decomposition is defined for even n = 2m only")
    if m < 2:
        raise ValueError("m must be >= 2 (n >= 4)")
    m = int(m)
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    al = normalized_a_coeff(l, m) * (a / b) ** (2 * l)
    q = a * a / b
    if l == 0:
        t1 = np.zeros(np.broadcast(a, b).shape)
    else:
        t1 = (2 * l * b - 4 * l - (2.0 * l / m) * (2 * l - 1)
              - 2.0 * l * (m + 2 * l - 1) / (m * (m - 1.0))) * al
    t2 = (-q * (m + 2 * l - 1) + (m + 2 * l - 1) * (m + 2 * l) / (m - 1.0) * (q / b)) * al
    return t1, t2


def partial_sums_T(m, a, b, count):
    """S_l = sum_{k<=l} T_k^1 + sum_{k<=l-1} T_k^2 for l = 1..count."""
    sums = []
    acc1 = 0.0
    acc2 = 0.0
    prev_t2 = None
    for l in range(count + 1):
        t1, t2 = term_T(l, m, a, b)
        acc1 = acc1 + t1
        if prev_t2 is not None:
            acc2 = acc2 + prev_t2
        if l >= 1:
            sums.append(acc1 + acc2)
        prev_t2 = t2
    return np.array(sums)
