"""Single-layer Dirichlet solves on polar caps of the unit sphere.

Each cap carries an axisymmetric surface charge whose polar density is

    sin^{n-2}(theta1) |cos theta1 - cos xi|^{-1/2} q(theta1),

with ``q`` a Legendre series in the polar angle rescaled to the cap. The inverse
square root captures the edge behaviour of equilibrium charges, so ``q`` is
analytic and the value ``q(edge)`` measures the strength of the edge
singularity. Integrals over a cap use ``theta1 = xi -/+ u^2``, which turns
the edge factor into a bounded weight, plus panels graded toward the
(complexified) kernel singularity of each target point.
"""
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import legendre
from scipy.optimize import brentq

from .errors import (BisectionFailure, DegenerateRatio, IllConditioned, NegativeDensity,
                     NegativeSigma, ResidualTooLarge)
from .kernel import normalized_kernel
from .measure import AxisymMeasure, SignedAxisymMeasure, default_grid, membership_check
from .quadrature import graded_breaks, panel_rule


@dataclass(frozen=True)
class CapGeometry:
    """North cap E1 = {theta <= xi1} and south cap E2 = {theta >= xi2}."""

    n: int
    xi1: float
    xi2: float

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("n must be >= 3")
        # xi1 = xi2 = pi is the degenerate full-sphere cap
        if not (0.0 <= self.xi1 < self.xi2 <= np.pi or self.xi1 == self.xi2 == np.pi):
            raise ValueError("need 0 <= xi1 < xi2 <= pi")


@dataclass(frozen=True)
class Discretization:
    degree: int = 20
    oversample: int = 2
    panels: int = 4
    order: int = 24
    svd_cutoff: float = 1e-12
    residual_tol: float = 1e-7
    sigma_tol: float = 1e-6


class CapBasis:
    """Legendre-weighted single-layer basis on one cap.

    ``side`` is ``"north"`` (cap ``[0, xi]``) or ``"south"`` (cap ``[xi, pi]``).
    """

    def __init__(self, n, xi, side, disc=Discretization()):
        if side not in ("north", "south"):
            raise ValueError("side must be 'north' or 'south'")
        self.n, self.xi, self.side, self.disc = n, float(xi), side, disc
        self.size = disc.degree + 1
        self.U = np.sqrt(self.xi if side == "north" else np.pi - self.xi)
        self._base = panel_rule(np.linspace(0.0, self.U, disc.panels + 1), disc.order)

    # geometry of the u-parametrisation
    def theta_of_u(self, u):
        return self.xi - u * u if self.side == "north" else self.xi + u * u

    def t_of_u(self, u):
        """Affine image of the polar distance from the edge: -1 at the edge, +1 at the pole."""
        return 2.0 * (u / self.U) ** 2 - 1.0

    def weight(self, u):
        """d(theta1)/du times the polar density factor, excluding q."""
        th = self.theta_of_u(u)
        s = np.sin(0.5 * u * u)
        small = np.abs(u) < 1e-6
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(small, np.sqrt(2.0), u / np.sqrt(np.where(small, 1.0, s)))
        return 2.0 * ratio * np.sin(th) ** (self.n - 2) / np.sqrt(2.0 * np.sin(0.5 * (th + self.xi)))

    def vander(self, u):
        return legendre.legvander(self.t_of_u(u), self.size - 1)

    @property
    def edge_values(self):
        """Basis values q_k at the cap edge (t = -1)."""
        return (-1.0) ** np.arange(self.size)

    def masses(self):
        u, w = self._base
        return (w * self.weight(u)) @ self.vander(u)

    # singularities of the kernel as a function of u
    def _near_points(self, r, theta):
        # complex offset of the kernel singularity in theta1; none at the origin
        origin = r <= 0
        rr = np.where(origin, 1.0, r)
        eta = 2.0 * np.arcsinh(np.abs(1.0 - rr) / (2.0 * np.sqrt(rr)))
        cands = np.stack([theta, -theta, 2.0 * np.pi - theta], axis=-1)
        z = cands + 1j * eta[:, None]
        z2 = self.xi - z if self.side == "north" else z - self.xi
        ustar = np.sqrt(z2.astype(complex))
        p = np.clip(ustar.real, 0.0, self.U)
        dist = np.abs(ustar - p)
        dist[origin] = np.inf
        return p, dist

    def matrix(self, r, theta):
        """Rows of potentials of the basis charges at targets ``(r, theta)``."""
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        r, theta = r.ravel(), theta.ravel()
        out = np.zeros((r.size, self.size))
        p, dist = self._near_points(r, theta)
        thresh = 0.5 * self.U / self.disc.panels
        far = np.all(dist >= thresh, axis=1)
        if np.any(far):
            u, w = self._base
            vw = self.vander(u) * (w * self.weight(u))[:, None]
            th1 = self.theta_of_u(u)
            for s in range(0, int(far.sum()), 2000):
                sel = np.flatnonzero(far)[s:s + 2000]
                k = normalized_kernel(r[sel, None], theta[sel, None], th1[None, :], self.n)
                out[sel] = k @ vw
        near = np.flatnonzero(~far)
        if near.size:
            self._near_rows(r, theta, p, dist, near, thresh, out)
        return out

    def _near_rows(self, r, theta, p, dist, near, thresh, out, budget=200000):
        batch, count = [], 0
        for i in near:
            sing = [(p[i, j], dist[i, j]) for j in range(3) if dist[i, j] < thresh]
            br = graded_breaks(self.U, sing, self.disc.panels)
            u, w = panel_rule(br, 16)
            batch.append((i, u, w))
            count += u.size
            if count >= budget:
                self._flush(r, theta, batch, out)
                batch, count = [], 0
        if batch:
            self._flush(r, theta, batch, out)

    def _flush(self, r, theta, batch, out):
        idx = np.concatenate([np.full(b[1].size, b[0]) for b in batch])
        u = np.concatenate([b[1] for b in batch])
        w = np.concatenate([b[2] for b in batch])
        th1 = self.theta_of_u(u)
        if self.side == "north":
            diff = (theta[idx] - self.xi) + u * u
        else:
            diff = (theta[idx] - self.xi) - u * u
        k = normalized_kernel(r[idx], theta[idx], th1, self.n, diff=diff)
        vals = self.vander(u) * (k * w * self.weight(u))[:, None]
        starts = np.concatenate([[0], np.cumsum([b[1].size for b in batch])[:-1]])
        out[[b[0] for b in batch]] = np.add.reduceat(vals, starts, axis=0)

    def collocation_u(self, count):
        j = np.arange(count)
        return 0.5 * self.U * (1.0 - np.cos(np.pi * (j + 0.5) / count))


@dataclass
class CapDensity:
    basis: CapBasis
    coeffs: np.ndarray

    @property
    def mass(self):
        return float(self.basis.masses() @ self.coeffs)

    @property
    def edge_value(self):
        return float(self.basis.edge_values @ self.coeffs)

    def q(self, u):
        return self.basis.vander(u) @ self.coeffs

    def polar_density(self, theta1):
        """d(mass)/d(theta1) at angles strictly inside the cap."""
        b = self.basis
        u = np.sqrt(np.abs(np.asarray(theta1, float) - b.xi))
        return self.q(u) * b.weight(u) / np.maximum(2.0 * u, 1e-300)

    def negative_mass(self, panels=64):
        u, w = panel_rule(np.linspace(0.0, self.basis.U, panels + 1), 16)
        dens = self.q(u) * self.basis.weight(u)
        return float(np.sum(w * np.maximum(-dens, 0.0)))

    def nodes(self, panels=16, order=16):
        u, w = panel_rule(np.linspace(0.0, self.basis.U, panels + 1), order)
        return self.basis.theta_of_u(u), w * self.basis.weight(u) * self.q(u)

    def potential(self, r, theta):
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        return (self.basis.matrix(r, theta) @ self.coeffs).reshape(r.shape)

    def scaled(self, factor):
        return CapDensity(self.basis, factor * np.asarray(self.coeffs))


@dataclass
class LayerPotential:
    """Potential of cap charges plus optional atoms; anything with ``.potential``."""

    n: int
    caps: list
    atoms: AxisymMeasure = None

    @property
    def total_mass(self):
        m = sum(c.mass for c in self.caps)
        return m + (self.atoms.total_mass if self.atoms is not None else 0.0)

    def potential(self, r, theta, on_singular="raise"):
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        out = np.zeros(r.shape)
        # group caps sharing a basis so each kernel matrix is built once
        groups = {}
        for c in self.caps:
            groups.setdefault(id(c.basis), [c.basis, 0.0])
            groups[id(c.basis)][1] = groups[id(c.basis)][1] + np.asarray(c.coeffs)
        for basis, coeffs in groups.values():
            out += (basis.matrix(r, theta) @ coeffs).reshape(r.shape)
        if self.atoms is not None and self.atoms.thetas.size:
            out += self.atoms.potential(r, theta, on_singular=on_singular)
        return out

    def negative_mass(self):
        neg = sum(c.negative_mass() for c in self.caps)
        return neg

    def to_measure(self):
        th, ms = [], []
        for c in self.caps:
            t, m = c.nodes()
            th.append(t)
            ms.append(m)
        atoms = ((), ()) if self.atoms is None else (self.atoms.atom_theta, self.atoms.atom_mass)
        th = np.concatenate(th) if th else np.zeros(0)
        ms = np.concatenate(ms) if ms else np.zeros(0)
        return SignedAxisymMeasure.from_signed(self.n, th, ms, atoms)


def combine(n, terms, atoms=None):
    """LayerPotential of sum_k coeff_k * density_k (densities may share bases)."""
    merged = {}
    for cf, pot in terms:
        for d in pot.caps:
            if id(d.basis) in merged:
                merged[id(d.basis)].coeffs = merged[id(d.basis)].coeffs + cf * np.asarray(d.coeffs)
            else:
                merged[id(d.basis)] = d.scaled(cf)
    return LayerPotential(n, list(merged.values()), atoms)


def _lstsq(A, B, cutoff):
    scale = np.linalg.norm(A, axis=0)
    scale[scale == 0] = 1.0
    U, s, Vt = np.linalg.svd(A / scale, full_matrices=False)
    keep = s > cutoff * s[0]
    if keep.sum() < 0.5 * s.size:
        raise IllConditioned(f"numerical rank {keep.sum()} of {s.size}")
    X = (Vt[keep].T / s[keep]) @ (U[:, keep].T @ B)
    return X / scale[:, None], float(s[0] / s[keep][-1])


def _solve_caps(bases, rhs_funcs, disc):
    """Collocation solve; ``rhs_funcs[k](theta)`` is the data for right-hand side k on the caps."""
    theta_col, theta_chk = [], []
    for b in bases:
        m = disc.oversample * b.size
        theta_col.append(b.theta_of_u(b.collocation_u(m)))
        uc = b.collocation_u(m + 1)
        theta_chk.append(b.theta_of_u(0.5 * (uc[:-1] + uc[1:])))
    tc = np.concatenate(theta_col)
    tk = np.concatenate(theta_chk)
    A = np.hstack([b.matrix(np.ones_like(tc), tc) for b in bases])
    B = np.column_stack([f(tc) for f in rhs_funcs])
    X, cond = _lstsq(A, B, disc.svd_cutoff)
    Ak = np.hstack([b.matrix(np.ones_like(tk), tk) for b in bases])
    Bk = np.column_stack([f(tk) for f in rhs_funcs])
    resid = float(np.max(np.abs(Ak @ X - Bk)))
    if resid > disc.residual_tol:
        raise ResidualTooLarge(f"collocation residual {resid:.3g}")
    out = []
    for k in range(X.shape[1]):
        caps, start = [], 0
        for b in bases:
            caps.append(CapDensity(b, X[start:start + b.size, k].copy()))
            start += b.size
        out.append(caps)
    return out, resid, cond


@dataclass
class HarmonicPair:
    geometry: CapGeometry
    omega1: LayerPotential
    omega2: LayerPotential
    residual: float
    condition: float

    @property
    def omega_tilde_0(self):
        return 1.0 - self.omega1.total_mass - self.omega2.total_mass


def solve_omegas(geom, disc=Discretization()):
    """Harmonic measures of the two caps relative to the complement of their union."""
    if geom.xi1 <= 0.0 or geom.xi2 >= np.pi:
        raise ValueError("solve_omegas needs two nondegenerate caps")
    b1 = CapBasis(geom.n, geom.xi1, "north", disc)
    b2 = CapBasis(geom.n, geom.xi2, "south", disc)
    on1 = lambda th: (th <= geom.xi1).astype(float)
    on2 = lambda th: (th >= geom.xi2).astype(float)
    (c1, c2), resid, cond = _solve_caps([b1, b2], [on1, on2], disc)
    return HarmonicPair(geom, LayerPotential(geom.n, c1), LayerPotential(geom.n, c2), resid, cond)


@dataclass
class GammaReport:
    gamma: float
    scan_min: float
    argmin: float
    monotone: bool
    theta: np.ndarray
    ratio: np.ndarray


def gamma_of(pair, geom=None, samples=2048, tol=1e-12):
    """gamma as the edge limit of omega1 / (1 - omega2) at theta = xi2.

    Both numerator and denominator vanish like a square root at the edge,
    with coefficients proportional to the edge strengths of the south-cap
    charges, so the limit is their ratio. A scan of the ratio over the gap
    supplies the argmin and monotonicity diagnostics.
    """
    geom = pair.geometry if geom is None else geom
    q1 = pair.omega1.caps[1].edge_value
    q2 = pair.omega2.caps[1].edge_value
    if q2 <= tol:
        raise DegenerateRatio("south-cap edge strength of omega2 vanishes")
    gamma = -q1 / q2
    theta = np.linspace(geom.xi1, geom.xi2, samples + 2)[1:-1]
    one = np.ones_like(theta)
    w1 = pair.omega1.potential(one, theta)
    den = 1.0 - pair.omega2.potential(one, theta)
    if np.any(den < tol):
        raise DegenerateRatio("1 - omega2 vanishes inside the gap")
    ratio = w1 / den
    i = int(np.argmin(ratio))
    monotone = bool(np.all(np.diff(ratio) < 1e-9))
    return GammaReport(gamma, float(ratio[i]), float(theta[i]), monotone, theta, ratio)


@dataclass
class ExtremalSolution:
    geometry: CapGeometry
    d: float
    M: float
    gamma: float
    a: float
    V: LayerPotential
    kind: str
    residual: float = 0.0
    alpha: float = 0.0
    xi2_prime: float = float("nan")
    pair: HarmonicPair = None
    info: dict = field(default_factory=dict)

    @property
    def sigma(self):
        return self.V.to_measure()

    @property
    def negative_variation(self):
        return self.V.negative_mass()

    def potential(self, r, theta, on_singular="raise"):
        return self.V.potential(r, theta, on_singular=on_singular)


def build_extremal(geom, disc=Discretization(), check=True):
    """V = a (gamma omega2 + omega1) with V(0) = 1; returns (d, M) = (a gamma, a)."""
    pair = solve_omegas(geom, disc)
    rep = gamma_of(pair)
    g = rep.gamma
    a = 1.0 / (g * pair.omega2.total_mass + pair.omega1.total_mass)
    V = combine(geom.n, [(a * g, pair.omega2), (a, pair.omega1)])
    sol = ExtremalSolution(geom, a * g, a, g, a, V, "two-cap", pair.residual, pair=pair,
                           info={"gamma_scan": rep.scan_min, "argmin": rep.argmin,
                                 "ratio_monotone": rep.monotone, "condition": pair.condition})
    if check:
        neg = V.negative_mass()
        if neg > disc.sigma_tol:
            raise NegativeSigma(f"negative variation {neg:.3g}")
    return sol


def build_single_cap(xi1, n, disc=Discretization()):
    """Extremal for E2 = {-e1}: P = M omega1 with omega1 the cap's equilibrium potential."""
    geom = CapGeometry(n, min(xi1, np.pi), np.pi)
    if xi1 >= np.pi:
        uni = AxisymMeasure.uniform(n)
        return ExtremalSolution(geom, 1.0, 1.0, 1.0, 1.0, LayerPotential(n, [], uni), "single-cap")
    b1 = CapBasis(n, xi1, "north", disc)
    (caps,), resid, cond = _solve_caps([b1], [lambda th: np.ones_like(th)], disc)
    omega1 = LayerPotential(n, caps)
    M = 1.0 / omega1.total_mass
    d = M * float(omega1.potential(1.0, np.pi))
    V = combine(n, [(M, omega1)])
    return ExtremalSolution(geom, d, M, d / M, M, V, "single-cap", resid, info={"condition": cond})


def _l_parts(n, xi2p, disc):
    b = CapBasis(n, xi2p, "south", disc)
    atom_pot = lambda th: -(2.0 * np.sin(0.5 * th)) ** (2.0 - n)
    sols, resid, _ = _solve_caps([b], [lambda th: np.ones_like(th), atom_pot], disc)
    return sols[0][0], sols[1][0], resid


def build_L_extremal(d, n, disc=Discretization(), xtol=1e-12):
    """M = infinity extremal: point mass alpha at e1 plus a charge on {theta >= xi2'}.

    The potential equals ``d`` on the cap, the total mass is 1, and ``xi2'``
    is located by a bracketed root search making the edge strength of the cap
    charge vanish (the density then starts like a square root).
    """
    lo_d = 2.0 ** (2 - n)
    if not lo_d <= d < 1.0:
        raise ValueError("need 2^(2-n) <= d < 1")
    geom = CapGeometry(n, 0.0, np.pi)
    if d == lo_d:
        atoms = AxisymMeasure.point_mass(n, exclusion=0.0)
        V = LayerPotential(n, [], atoms)
        return ExtremalSolution(geom, d, np.inf, 0.0, np.inf, V, "L", alpha=1.0, xi2_prime=np.pi)

    loose = replace(disc, residual_tol=np.inf)

    def parts(x, dd):
        u, v, resid = _l_parts(n, x, dd)
        alpha = (1.0 - d * u.mass) / (1.0 + v.mass)
        return u, v, alpha, resid

    def edge(x, dd=loose):
        u, v, alpha, _ = parts(x, dd)
        return alpha * v.edge_value + d * u.edge_value

    lo, hi = 0.1, np.pi - 0.1
    flo, fhi = edge(lo), edge(hi)
    if flo * fhi > 0:
        grid = np.linspace(0.02, np.pi - 0.02, 25)
        vals = [edge(x) for x in grid]
        idx = [i for i in range(len(grid) - 1) if vals[i] * vals[i + 1] <= 0]
        if not idx:
            raise BisectionFailure(f"edge strength has no sign change for d={d}")
        lo, hi = grid[idx[0]], grid[idx[0] + 1]
    # the atom sits just outside a large cap, so the data there need more modes
    for scale in (1, 2, 4):
        dd = replace(disc, degree=disc.degree * scale)
        try:
            x = brentq(lambda y: edge(y, replace(dd, residual_tol=np.inf)), lo, hi, xtol=xtol, maxiter=60)
        except (RuntimeError, ValueError) as exc:
            raise BisectionFailure(str(exc)) from exc
        try:
            u, v, alpha, resid = parts(x, dd)
            break
        except ResidualTooLarge:
            if scale == 4:
                raise
    atoms = AxisymMeasure.point_mass(n, 0.0, alpha, exclusion=0.0)
    cap = CapDensity(u.basis, alpha * v.coeffs + d * u.coeffs)
    V = LayerPotential(n, [cap], atoms)
    neg = cap.negative_mass()
    if neg > disc.sigma_tol:
        raise NegativeDensity(f"negative cap mass {neg:.3g}")
    return ExtremalSolution(CapGeometry(n, 0.0, x), d, np.inf, 0.0, np.inf, V, "L", resid,
                            alpha=alpha, xi2_prime=x)


def theta_derivative(p, r, theta, step=1e-5):
    r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
    return (p.potential(r, theta + step) - p.potential(r, theta - step)) / (2.0 * step)


def radial_derivative(p, r, theta, step=1e-5):
    r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
    return (p.potential(r + step, theta) - p.potential(r - step, theta)) / (2.0 * step)


def check_bounds(sol, tol=1e-6, grid=None):
    """Maximum-principle probe d - tol <= V <= M + tol on the feasibility grid."""
    return membership_check(sol.V, sol.d, sol.M, grid=grid, tol=tol)


@dataclass
class InjectivityReport:
    table: list
    collisions: list
    ratio_increasing: bool
    M_decreasing: bool


def injectivity_probe(geoms, disc=Discretization(), tol=1e-6):
    if len(geoms) < 2:
        raise ValueError("need at least two geometries")
    sols = [build_extremal(g, disc, check=False) for g in geoms]
    table = [(g.xi1, g.xi2, s.d, s.M) for g, s in zip(geoms, sols)]
    collisions = []
    for i in range(len(table)):
        for j in range(i + 1, len(table)):
            if abs(table[i][2] - table[j][2]) < 10 * tol and abs(table[i][3] - table[j][3]) < 10 * tol:
                collisions.append((i, j))
    ratio_inc, m_dec = True, True
    by_xi2 = {}
    for row in table:
        by_xi2.setdefault(row[1], []).append(row)
    for rows in by_xi2.values():
        rows.sort()
        dm = [r[2] / r[3] for r in rows]
        Ms = [r[3] for r in rows]
        ratio_inc &= all(b > a for a, b in zip(dm, dm[1:]))
        m_dec &= all(b < a for a, b in zip(Ms, Ms[1:]))
    return InjectivityReport(table, collisions, ratio_inc, m_dec)


def write_solution_csv(sol, path):
    """One header row and one value row: geometry, (d, M, gamma, a), residual."""
    import csv
    g = sol.geometry
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "n", "xi1", "xi2", "d", "M", "gamma", "a", "alpha", "residual"])
        w.writerow([sol.kind, g.n] + [repr(float(x)) for x in
                   (g.xi1, g.xi2, sol.d, sol.M, sol.gamma, sol.a, sol.alpha, sol.residual)])
