"""Axisymmetric measures on the unit sphere, reduced to the polar interval [0, pi].

A measure is stored by its polar push-forward: point masses ("atoms") on
parallels and quadrature pairs of an absolutely continuous part. With the
normalisation ``c_n h(0, ., .) = 1`` the potential at the origin equals the
total mass, so unit-mass potentials satisfy ``p(0) = 1``.
"""
import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import FeasibilityTimeout, SingularPoint
from .kernel import eval_c_n, normalized_kernel
from .quadrature import gauss_legendre, panel_rule


def sphere_area(n):
    """H^{n-1}(S^{n-1})."""
    return float(2.0 * np.exp(0.5 * n * np.log(np.pi) - gammaln(0.5 * n)))


def polar_surface_weight(n):
    """Constant k with dH^{n-1} = k sin^{n-2}(theta) dtheta for axisymmetric integrands."""
    return sphere_area(n) * eval_c_n(n + 1)


def cap_area(theta, n):
    """H^{n-1} of the polar cap {y_1 >= cos theta}."""
    theta = np.asarray(theta, float)
    x, w = gauss_legendre(48)
    t = 0.5 * theta[..., None] * (x + 1.0)
    return polar_surface_weight(n) * 0.5 * theta * np.sum(w * np.sin(t) ** (n - 2), axis=-1)


@dataclass(frozen=True)
class AxisymMeasure:
    """Positive axisymmetric measure: atoms and density quadrature pairs (polar form)."""

    n: int
    atom_theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    atom_mass: np.ndarray = field(default_factory=lambda: np.zeros(0))
    node_theta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    node_weight: np.ndarray = field(default_factory=lambda: np.zeros(0))
    exclusion: float = 1e-3

    def __post_init__(self):
        for name in ("atom_theta", "atom_mass", "node_theta", "node_weight"):
            arr = np.array(getattr(self, name), dtype=float).ravel()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.atom_theta.shape != self.atom_mass.shape or self.node_theta.shape != self.node_weight.shape:
            raise ValueError("angle and mass arrays must have matching lengths")
        if np.any(self.atom_mass <= 0.0) or np.any(self.node_weight < 0.0):
            raise ValueError("masses must be positive and weights non-negative")
        both = np.concatenate([self.atom_theta, self.node_theta])
        if np.any((both < 0.0) | (both > np.pi)):
            raise ValueError("support angles must lie in [0, pi]")

    @classmethod
    def uniform(cls, n, order=256):
        """Normalised surface measure, as Gauss-Legendre pairs in theta."""
        x, w = gauss_legendre(order)
        theta = 0.5 * np.pi * (x + 1.0)
        wt = 0.5 * np.pi * w * np.sin(theta) ** (n - 2) * eval_c_n(n + 1)
        return cls(n, node_theta=theta, node_weight=wt)

    @classmethod
    def point_mass(cls, n, theta=0.0, mass=1.0, exclusion=1e-3):
        return cls(n, atom_theta=[theta], atom_mass=[mass], exclusion=exclusion)

    @property
    def thetas(self):
        return np.concatenate([self.atom_theta, self.node_theta])

    @property
    def masses(self):
        return np.concatenate([self.atom_mass, self.node_weight])

    @property
    def total_mass(self):
        return float(np.sum(self.atom_mass) + np.sum(self.node_weight))

    def potential(self, r, theta, on_singular="raise"):
        return potential_eval(self, r, theta, on_singular=on_singular)

    def scaled(self, factor):
        return AxisymMeasure(self.n, self.atom_theta, self.atom_mass * factor,
                             self.node_theta, self.node_weight * factor, self.exclusion)


@dataclass(frozen=True)
class SignedAxisymMeasure:
    pos: AxisymMeasure
    neg: AxisymMeasure

    @property
    def n(self):
        return self.pos.n

    @property
    def total_mass(self):
        return self.pos.total_mass - self.neg.total_mass

    @property
    def total_variation(self):
        return self.pos.total_mass + self.neg.total_mass

    def potential(self, r, theta, on_singular="raise"):
        return (potential_eval(self.pos, r, theta, on_singular)
                - potential_eval(self.neg, r, theta, on_singular))

    @classmethod
    def from_signed(cls, n, theta, mass, atoms=((), ())):
        theta = np.asarray(theta, float)
        mass = np.asarray(mass, float)
        a_th, a_m = (np.asarray(x, float) for x in atoms)
        pos = AxisymMeasure(n, a_th[a_m > 0], a_m[a_m > 0], theta[mass > 0], mass[mass > 0])
        neg = AxisymMeasure(n, a_th[a_m < 0], -a_m[a_m < 0], theta[mass < 0], -mass[mass < 0])
        return cls(pos, neg)


def potential_eval(m, r, theta, on_singular="raise"):
    """p(r, theta) = c_n sum h(r, theta, theta1) * mass over the stored support.

    Evaluation at ``r = 1`` within ``m.exclusion`` of a support angle raises
    :class:`SingularPoint` (or yields ``+inf`` when ``on_singular="inf"``).
    """
    r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
    shape = r.shape
    r, theta = r.ravel(), theta.ravel()
    th1, mass = m.thetas, m.masses
    out = np.zeros(r.shape)
    if th1.size == 0:
        return out.reshape(shape)
    on_sphere = np.abs(r - 1.0) < 1e-15
    near = on_sphere[:, None] & (np.abs(theta[:, None] - th1[None, :]) <= m.exclusion)
    bad = near.any(axis=1)
    if np.any(bad) and on_singular == "raise":
        raise SingularPoint(f"potential evaluated on the support at theta={theta[bad][0]:.6g}")
    good = ~bad
    chunk = max(1, 200000 // th1.size)
    idx = np.flatnonzero(good)
    for s in range(0, idx.size, chunk):
        sel = idx[s:s + chunk]
        k = normalized_kernel(r[sel, None], theta[sel, None], th1[None, :], m.n)
        out[sel] = k @ mass
    out[bad] = np.inf
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# smooth sample measures with closed-form potentials


@dataclass(frozen=True)
class PoissonMixture:
    """Unit-mass mixture of axisymmetrised Poisson kernels of the unit ball.

    Component ``j`` is harmonic measure of the ball seen from a pole at radius
    ``rho_j < 1`` and polar angle ``beta_j``, averaged over rotations about the
    x_1 axis. Its potential is ``c_n h(r rho, theta, beta)`` inside the ball and
    ``r^(2-n) c_n h(rho / r, theta, beta)`` outside; ``rho = 0`` is the
    uniform measure.
    """

    n: int
    beta: np.ndarray
    rho: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        for name in ("beta", "rho", "weight"):
            arr = np.array(getattr(self, name), dtype=float).ravel()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.rho < 0) or np.any(self.rho >= 1) or np.any(self.weight < 0):
            raise ValueError("need 0 <= rho < 1 and non-negative weights")
        if abs(self.weight.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")

    @property
    def total_mass(self):
        return 1.0

    def potential(self, r, theta, on_singular="raise"):
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        shape = r.shape
        r, theta = r.ravel()[:, None], theta.ravel()[:, None]
        inside = r <= 1.0
        rr = np.where(inside, r * self.rho, self.rho / np.where(r > 0, r, 1.0))
        k = normalized_kernel(rr, theta, self.beta[None, :], self.n)
        scale = np.where(inside, 1.0, np.where(r > 0, r, 1.0) ** (2.0 - self.n))
        return ((k * scale) @ self.weight).reshape(shape)

    def density(self, theta1):
        """Polar density d(mass)/d(theta1)."""
        from .kernel import _kernel_geometry, _phi_integral
        n = self.n
        theta1 = np.asarray(theta1, float)
        out = np.zeros(theta1.shape)
        for b, rho, w in zip(self.beta, self.rho, self.weight):
            big, small, gap = _kernel_geometry(rho, theta1, b)
            avg = eval_c_n(n) * (1.0 - rho * rho) * _phi_integral(big, small, gap, 0.5 * n, n)
            out += w * avg
        return eval_c_n(n + 1) * np.sin(theta1) ** (n - 2) * out

    def to_measure(self, panels=32, order=16):
        theta, wq = panel_rule(np.linspace(0.0, np.pi, panels + 1), order)
        return AxisymMeasure(self.n, node_theta=theta, node_weight=wq * self.density(theta))


# ---------------------------------------------------------------------------
# feasibility


@dataclass
class Membership:
    ok: bool
    min_ball: float
    max_all: float
    witness: tuple


def default_grid(nr=64, ntheta=128, shell=1e-3):
    """(r, theta) points: closed-ball tensor grid and the shells r = 1 -/+ shell."""
    r = np.linspace(0.0, 1.0, nr)
    theta = np.linspace(0.0, np.pi, ntheta)
    R, T = np.meshgrid(r, theta, indexing="ij")
    ball = (R.ravel(), T.ravel())
    Rs, Ts = np.meshgrid([1.0 - shell, 1.0 + shell], theta, indexing="ij")
    return ball, (Rs.ravel(), Ts.ravel())


def membership_check(m, d, M, grid=None, tol=1e-9):
    """Is ``m`` (anything with ``.potential(r, theta)``) in F_d^M on the sampled grid?

    The minimum is taken over the closed-ball grid; the maximum over the
    ball grid and both shells around the support sphere (a potential peaks
    on its support).
    """
    ball, shell = default_grid() if grid is None else grid
    pb = m.potential(*ball, on_singular="inf")
    ps = m.potential(*shell, on_singular="inf")
    finite_b = np.where(np.isfinite(pb), pb, np.inf)
    imin = int(np.argmin(finite_b))
    min_ball = float(finite_b[imin])
    allp = np.concatenate([pb, ps])
    allr = np.concatenate([ball[0], shell[0]])
    allt = np.concatenate([ball[1], shell[1]])
    imax = int(np.argmax(allp))
    max_all = float(allp[imax])
    if min_ball < d - tol:
        return Membership(False, min_ball, max_all, ("min", float(ball[0][imin]), float(ball[1][imin]), min_ball))
    if max_all > M + tol:
        return Membership(False, min_ball, max_all, ("max", float(allr[imax]), float(allt[imax]), max_all))
    return Membership(True, min_ball, max_all, ())


def _sphere_extremes(p, ntheta=721):
    theta = np.linspace(0.0, np.pi, ntheta)
    vals = p.potential(np.ones_like(theta), theta)
    return float(vals.min()), float(vals.max())


def sample_feasible(d, M, n, seed, components=3, attempts=60, shrink=0.7):
    """Random unit-mass Poisson mixture in F_d^M, deterministic in ``seed``.

    The non-uniform part is damped toward the uniform measure until the
    sphere extremes fit in ``[d, M]``; the result also passes
    :func:`membership_check`.
    """
    if not d < 1.0 < M:
        raise ValueError("need d < 1 < M")
    rng = np.random.default_rng(seed)
    beta = rng.uniform(0.0, np.pi, components)
    rho = rng.uniform(0.2, 0.95, components)
    w = rng.dirichlet(np.ones(components))
    t = rng.uniform(0.3, 1.0)
    for _ in range(attempts):
        mix = PoissonMixture(n, np.concatenate([[0.0], beta]), np.concatenate([[0.0], rho]),
                             np.concatenate([[1.0 - t], t * w]))
        lo, hi = _sphere_extremes(mix)
        if lo >= d + 1e-9 and hi <= M - 1e-9 and membership_check(mix, d, M).ok:
            return mix
        t *= shrink
    raise FeasibilityTimeout(f"no feasible sample for d={d}, M={M} after {attempts} attempts")


# ---------------------------------------------------------------------------
# CSV


def write_measure_csv(m, path_or_buf):
    """Rows ``kind,theta1,mass`` (kind in {atom, node}); floats written with repr."""
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, "w", newline="", encoding="utf-8") if own else path_or_buf
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "theta1", "mass"])
        writer.writerow(["dim", repr(float(m.n)), "0.0"])
        for th, ms in zip(m.atom_theta, m.atom_mass):
            writer.writerow(["atom", repr(float(th)), repr(float(ms))])
        for th, ms in zip(m.node_theta, m.node_weight):
            writer.writerow(["node", repr(float(th)), repr(float(ms))])
    finally:
        if own:
            fh.close()


def read_measure_csv(path_or_buf):
    if isinstance(path_or_buf, str) and "\n" in path_or_buf:
        path_or_buf = io.StringIO(path_or_buf)
    own = not hasattr(path_or_buf, "read")
    fh = open(path_or_buf, newline="", encoding="utf-8") if own else path_or_buf
    try:
        rows = list(csv.reader(fh))
    finally:
        if own:
            fh.close()
    if not rows or rows[0] != ["kind", "theta1", "mass"]:
        raise ValueError("missing measure CSV header")
    n = None
    atoms, nodes = [], []
    for kind, th, ms in rows[1:]:
        if kind == "dim":
            n = int(float(th))
        elif kind == "atom":
            atoms.append((float(th), float(ms)))
        elif kind == "node":
            nodes.append((float(th), float(ms)))
        else:
            raise ValueError(f"unknown row kind {kind!r}")
    if n is None:
        raise ValueError("measure CSV lacks the dim row")
    a = np.array(atoms).reshape(-1, 2)
    b = np.array(nodes).reshape(-1, 2)
    return AxisymMeasure(n, a[:, 0], a[:, 1], b[:, 0], b[:, 1])
