import csv

import mpmath as mp
import numpy as np
import pytest

from newton_extremal import dirichlet as dl
from newton_extremal.dirichlet import (
    CapBasis, CapGeometry, Discretization, build_extremal, build_L_extremal, build_single_cap,
    gamma_of, injectivity_probe, radial_derivative, solve_omegas, theta_derivative,
)
from newton_extremal.measure import membership_check


# ---------------------------------------------------------------------------
# basis oracle: n = 4 has the closed-form kernel log((A + B) / (A - B)) / (2B)


def basis_row_mp(xi, side, k, r, theta):
    with mp.workdps(30):
        xi, r, theta = mp.mpf(xi), mp.mpf(r), mp.mpf(theta)
        U2 = xi if side == "north" else mp.pi - xi

        def f(u):
            t1 = xi - u * u if side == "north" else xi + u * u
            A = 1 + r * r - 2 * r * mp.cos(theta) * mp.cos(t1)
            B = 2 * r * mp.sin(theta) * mp.sin(t1)
            # A - B written through the angle difference to keep digits at the diagonal
            AmB = (1 - r) ** 2 + 4 * r * mp.sin((theta - t1) / 2) ** 2
            ker = mp.log((A + B) / AmB) / (2 * B)
            edge = mp.sqrt(2 * mp.sin((t1 + xi) / 2) * mp.sin(u * u / 2))
            return ker * 2 * u * mp.sin(t1) ** 2 / edge * mp.legendre(k, 2 * u * u / U2 - 1)

        pts = [0, mp.mpf("1e-8"), mp.mpf("1e-4"), mp.mpf("0.01"), mp.mpf("0.1"), mp.mpf("0.5"), mp.sqrt(U2)]
        if side == "north" and theta < xi:
            pts.append(mp.sqrt(xi - theta))
        if side == "south" and theta > xi:
            pts.append(mp.sqrt(theta - xi))
        return float(mp.quad(f, sorted(set(pts))))


@pytest.mark.parametrize("side,xi", [("north", 1.0), ("south", 2.2)])
@pytest.mark.parametrize("r,theta", [(1.0, 0.6), (1.0, 1.5), (1.0, 2.5), (0.5, 2.0), (1.3, 0.9), (1.02, 2.3)])
def test_basis_rows_against_mpmath(side, xi, r, theta):
    b = CapBasis(4, xi, side)
    row = b.matrix(np.array([r]), np.array([theta]))[0]
    for k in (0, 5, 20):
        assert row[k] == pytest.approx(basis_row_mp(xi, side, k, r, theta), abs=1e-11, rel=1e-10)


@pytest.mark.parametrize("side,xi", [("north", 0.8), ("south", 2.0)])
def test_basis_masses_against_mpmath(side, xi):
    b = CapBasis(4, xi, side)
    U2 = xi if side == "north" else np.pi - xi
    with mp.workdps(25):
        def f(u, k):
            t1 = xi - u * u if side == "north" else xi + u * u
            edge = mp.sqrt(2 * mp.sin((t1 + xi) / 2) * mp.sin(u * u / 2))
            return 2 * u * mp.sin(t1) ** 2 / edge * mp.legendre(k, 2 * u * u / U2 - 1)
        # the polar weight is already a mass density (c_n h(0, ., .) = 1)
        ref = [float(mp.quad(lambda u: f(u, k), [0, 1e-6, mp.sqrt(U2)])) for k in range(4)]
    np.testing.assert_allclose(b.masses()[:4], ref, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(b.matrix(np.zeros(1), np.zeros(1))[0], b.masses(), rtol=1e-13, atol=1e-15)


def test_basis_edge_values():
    b = CapBasis(3, 1.0, "north")
    assert b.t_of_u(0.0) == -1.0 and b.t_of_u(b.U) == pytest.approx(1.0)
    np.testing.assert_array_equal(b.edge_values, b.vander(np.array([0.0]))[0])
    with pytest.raises(ValueError):
        CapBasis(3, 1.0, "east")


def test_geometry_validation():
    with pytest.raises(ValueError):
        CapGeometry(3, 2.0, 1.0)
    with pytest.raises(ValueError):
        CapGeometry(2, 0.5, 1.0)
    with pytest.raises(ValueError):
        solve_omegas(CapGeometry(3, 0.5, np.pi))


# ---------------------------------------------------------------------------
# single cap


@pytest.fixture(scope="module", params=[(3, 0.5), (4, 1.5), (5, 2.8)], ids=lambda p: f"n{p[0]}-xi{p[1]}")
def single(request):
    n, xi = request.param
    return build_single_cap(xi, n)


def test_single_cap_normalisation(single):
    n = single.geometry.n
    assert single.V.total_mass == pytest.approx(1.0, abs=1e-12)
    assert single.potential(0.0, 0.0) == pytest.approx(1.0, abs=1e-10)
    assert 2.0 ** (2 - n) <= single.d < 1.0 < single.M


def test_single_cap_boundary_values_and_monotone(single):
    xi = single.geometry.xi1
    th = np.linspace(0.0, xi, 40)
    np.testing.assert_allclose(single.potential(np.ones_like(th), th), single.M, atol=1e-8)
    tail = np.linspace(xi, np.pi, 200)
    vals = single.potential(np.ones_like(tail), tail)
    assert np.all(np.diff(vals) < 0)
    assert single.negative_variation < 1e-8


def test_single_full_cap_degenerate():
    sol = build_single_cap(np.pi, 4)
    assert sol.M == 1.0 and sol.d == 1.0
    assert sol.potential(0.3, 1.0) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# two caps


@pytest.fixture(scope="module", params=[(3, np.pi / 6, np.pi / 2), (4, 0.8, 2.2), (5, np.pi / 3, 5 * np.pi / 6)],
                ids=lambda p: f"n{p[0]}")
def two(request):
    n, xi1, xi2 = request.param
    return build_extremal(CapGeometry(n, xi1, xi2))


def test_harmonic_pair(two):
    pair, g = two.pair, two.geometry
    w1, w2 = pair.omega1.total_mass, pair.omega2.total_mass
    assert 0 < w1 and 0 < w2 and w1 + w2 < 1
    assert pair.omega_tilde_0 > 0
    rng = np.random.default_rng(0)
    r = np.concatenate([rng.uniform(0, 3, 300), np.ones(50)])
    th = np.concatenate([rng.uniform(0, np.pi, 300), rng.uniform(g.xi1 + 0.01, g.xi2 - 0.01, 50)])
    keep = ~((np.abs(r - 1) < 0.01) & ((th < g.xi1 + 0.01) | (th > g.xi2 - 0.01)))
    for w in (pair.omega1, pair.omega2):
        v = w.potential(r[keep], th[keep])
        assert np.all((v > 0) & (v < 1))
    t1 = np.linspace(0, g.xi1, 30)
    t2 = np.linspace(g.xi2, np.pi, 30)
    np.testing.assert_allclose(pair.omega1.potential(np.ones(30), t1), 1.0, atol=1e-8)
    np.testing.assert_allclose(pair.omega1.potential(np.ones(30), t2), 0.0, atol=1e-8)
    np.testing.assert_allclose(pair.omega2.potential(np.ones(30), t2), 1.0, atol=1e-8)


def test_gamma(two):
    rep = gamma_of(two.pair)
    g = two.geometry
    assert 0 < rep.gamma <= 1
    assert rep.monotone
    spacing = (g.xi2 - g.xi1) / 2049
    assert g.xi2 - rep.argmin <= 1.5 * spacing
    # the edge limit sits just below the last grid value of the ratio
    assert rep.gamma <= rep.scan_min + 1e-9
    assert rep.scan_min - rep.gamma < 1e-2


def test_extremal_identities(two):
    n = two.geometry.n
    assert two.potential(0.0, 0.0) == pytest.approx(1.0, abs=1e-10)
    assert two.d == pytest.approx(two.a * two.gamma, rel=1e-14)
    assert two.M == two.a
    assert 2.0 ** (2 - n) <= two.d < 1.0 < two.M
    assert two.sigma.total_mass == pytest.approx(1.0, abs=1e-10)
    assert two.negative_variation < 1e-6


def test_radial_density_vanishes_on_gap(two):
    g, n = two.geometry, two.geometry.n
    th = np.linspace(g.xi1 + 0.05, g.xi2 - 0.05, 15)
    one = np.ones_like(th)
    dens = (0.5 * n - 1) * two.potential(one, th) + radial_derivative(two, one, th, 1e-5)
    assert np.max(np.abs(dens)) < 1e-6


def test_maximum_principle_probe(two):
    assert dl.check_bounds(two, 1e-6).ok


def test_theta_sign_structure(two):
    g, pair = two.geometry, two.pair
    combo = dl.combine(g.n, [(two.gamma, pair.omega2), (1.0, pair.omega1)])
    th = np.linspace(0.05, np.pi - 0.05, 40)
    for r in (0.5, 0.9, 1.1):
        rr = np.full_like(th, r)
        assert np.all(theta_derivative(pair.omega1, rr, th) < 0)
        assert np.all(theta_derivative(combo, rr, th) < 0)
    gap = np.linspace(g.xi1 + 0.02, g.xi2 - 0.02, 30)
    one = np.ones_like(gap)
    assert np.all(theta_derivative(pair.omega1, one, gap) < 0)
    assert np.all(theta_derivative(combo, one, gap) < 0)


def test_solution_csv(two, tmp_path):
    path = tmp_path / "sol.csv"
    dl.write_solution_csv(two, path)
    rows = list(csv.reader(open(path, newline="")))
    assert rows[0][:2] == ["kind", "n"] and float(rows[1][4]) == two.d


def test_injectivity_and_orderings():
    geoms = [CapGeometry(3, x, 2.4) for x in (0.4, 0.8, 1.2)] + [CapGeometry(3, 0.8, 2.0)]
    rep = injectivity_probe(geoms)
    assert not rep.collisions
    assert rep.ratio_increasing and rep.M_decreasing
    with pytest.raises(ValueError):
        injectivity_probe(geoms[:1])


# ---------------------------------------------------------------------------
# M = infinity


@pytest.mark.parametrize("n", [3, 4, 5])
def test_L_extremal_minimal_d(n):
    sol = build_L_extremal(2.0 ** (2 - n), n)
    assert sol.alpha == 1.0
    assert sol.potential(1.0, np.pi) == pytest.approx(2.0 ** (2 - n), rel=1e-13)


@pytest.mark.parametrize("n,d", [(3, 0.6), (4, 0.4), (5, 0.3), (3, 0.9)])
def test_L_extremal(n, d):
    sol = build_L_extremal(d, n)
    x = sol.xi2_prime
    assert 0 < x < np.pi and 0 < sol.alpha < 1
    assert sol.V.total_mass == pytest.approx(1.0, abs=1e-10)
    th = np.linspace(x, np.pi, 60)
    np.testing.assert_allclose(sol.potential(np.ones_like(th), th), d, atol=1e-8)
    assert sol.negative_variation < 1e-8
    # no charge outside the cap besides the atom, and the potential stays above d in the ball
    assert membership_check(sol.V, d, np.inf, tol=1e-7).ok
    with pytest.raises(ValueError):
        build_L_extremal(1.0, n)


def test_node_doubling_stability():
    g = CapGeometry(4, np.pi / 4, 3 * np.pi / 4)
    a = build_extremal(g)
    b = build_extremal(g, Discretization(degree=40))
    for x, y in ((a.d, b.d), (a.M, b.M), (a.gamma, b.gamma)):
        assert abs(x / y - 1) < 1e-5
