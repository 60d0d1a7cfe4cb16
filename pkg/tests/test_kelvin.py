import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from newton_extremal import kelvin as kv
from newton_extremal.dirichlet import CapGeometry, build_extremal, build_single_cap
from newton_extremal.errors import PoleInput


def _unit(rng, size, dim):
    v = rng.normal(size=(size, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _sphere_points(rng, size, dim, lo, hi):
    """Points on the unit sphere with polar angle to e1 uniform in (lo, hi)."""
    th = rng.uniform(lo, hi, size)
    rest = _unit(rng, size, dim - 1)
    return np.column_stack([np.cos(th), np.sin(th)[:, None] * rest])


@pytest.fixture(scope="module")
def two():
    return build_extremal(CapGeometry(4, 0.8, 2.2))


# ---------------------------------------------------------------------------
# the map


@pytest.mark.parametrize("dim", [3, 4, 6])
def test_round_trip(dim):
    rng = np.random.default_rng(dim)
    x = rng.normal(scale=2.0, size=(10000, dim))
    y = kv.forward(x)
    assert np.max(np.abs(kv.inverse(y) - x)) < 1e-12
    assert np.max(np.abs(kv.forward(kv.inverse(y)) - y)) < 1e-12 * max(1.0, np.max(np.abs(y)))


def test_special_points():
    np.testing.assert_allclose(kv.forward(np.zeros(3)), [0.5, 0, 0], atol=1e-16)
    np.testing.assert_allclose(kv.forward(np.array([-1.0, 0, 0, 0])), 0.0, atol=1e-16)
    with pytest.raises(PoleInput):
        kv.forward(np.array([1.0, 0, 0]))
    with pytest.raises(PoleInput):
        kv.inverse(np.array([-0.5, 0, 0]))


@settings(max_examples=50, deadline=None)
@given(xi=st.floats(0.01, np.pi - 0.01), phi=st.floats(0, 2 * np.pi))
def test_parallel_maps_to_cap_radius(xi, phi):
    x = np.array([np.cos(xi), np.sin(xi) * np.cos(phi), np.sin(xi) * np.sin(phi)])
    y = kv.forward(x)
    assert abs(y[0]) < 1e-12
    assert np.linalg.norm(y[1:]) == pytest.approx(kv.cap_radius(xi), rel=1e-12)


@pytest.mark.parametrize("dim", [3, 5])
def test_classify_image_regions(dim):
    xi1, xi2, m = 0.8, 2.2, 1e-6
    rng = np.random.default_rng(10 + dim)
    N = 10000
    ball = _unit(rng, N, dim) * rng.uniform(0, 1 - m, N)[:, None]
    outside = _unit(rng, N, dim) * (1 + m + rng.exponential(2.0, N))[:, None]
    regions = {
        "ball": ball,
        "outside": outside,
        "E1": _sphere_points(rng, N, dim, m, xi1 - m),
        "E2": _sphere_points(rng, N, dim, xi2 + m, np.pi),
        "gap": _sphere_points(rng, N, dim, xi1 + m, xi2 - m),
    }
    for name, x in regions.items():
        labels = kv.classify_image(kv.forward(x), xi1, xi2)
        assert np.all(labels == name), name


# ---------------------------------------------------------------------------
# lifted functions


def test_lift_of_fundamental_solution():
    n = 3
    u = lambda x: np.linalg.norm(x, axis=-1) ** (2.0 - n)
    v = kv.kelvin_lift(u, n)
    y = np.array([[0.3, 0.2, -0.1], [1.5, 0.0, 0.4]])
    expect = np.linalg.norm(y + [0.5, 0, 0], axis=1) ** (2.0 - n) * np.linalg.norm(kv.inverse(y), axis=1) ** (2.0 - n)
    np.testing.assert_allclose(v(y), expect, rtol=1e-14)
    d1 = kv.spherical_mean_deviation(v, np.array([0.9, 0.3, 0.1]), 0.02)
    d2 = kv.spherical_mean_deviation(v, np.array([0.9, 0.3, 0.1]), 0.01)
    assert abs(d1) < 1e-6 and abs(d2) < abs(d1) / 8


def test_spherical_mean_detects_non_harmonic():
    f = lambda x: np.sum(np.asarray(x) ** 2, axis=-1)
    dev = kv.spherical_mean_deviation(f, np.array([0.1, 0.2, 0.3]), 0.1)
    assert dev == pytest.approx(0.01, rel=1e-12)


def test_lifted_omegas(two):
    n, g = two.geometry.n, two.geometry
    w1 = kv.kelvin_lift(kv.axisym_function(two.pair.omega1), n)
    w2 = kv.kelvin_lift(kv.axisym_function(two.pair.omega2), n)
    centre = np.array([[0.5, 0, 0, 0]])
    assert w1(centre)[0] == pytest.approx(float(two.pair.omega1.potential(0.0, 0.0)), rel=1e-13)
    assert w2(centre)[0] == pytest.approx(float(two.pair.omega2.potential(0.0, 0.0)), rel=1e-13)
    # F2 is the inner disc of the hyperplane
    rng = np.random.default_rng(4)
    rad = kv.cap_radius(g.xi2) * rng.uniform(0.0, 0.98, 60)
    dirs = _unit(rng, 60, n - 1)
    F2 = np.column_stack([np.zeros(60), rad[:, None] * dirs])
    assert np.max(np.abs(w1(F2))) < 1e-7
    # even in y1
    y = np.column_stack([rng.uniform(0.05, 1.5, 40), rng.normal(size=(40, n - 1))])
    y_ref = y * np.array([-1.0] + [1.0] * (n - 1))
    for w in (w1, w2):
        np.testing.assert_allclose(w(y), w(y_ref), rtol=1e-9, atol=1e-12)
        d1 = kv.spherical_mean_deviation(w, y[0], 0.02)
        d2 = kv.spherical_mean_deviation(w, y[0], 0.01)
        assert abs(d2) < abs(d1) / 8 + 1e-12


# ---------------------------------------------------------------------------
# boundary limit


def test_boundary_limit(two):
    rep = kv.boundary_limit_check(two)
    assert rep.target == pytest.approx(-(two.geometry.n - 2) * two.d / 2)
    assert rep.rel_error < 0.02
    # raw slopes approach the limit monotonically
    gaps = np.abs(rep.slopes - rep.target)
    assert np.all(np.diff(gaps) < 0)


def test_boundary_limit_rejects_single_cap():
    with pytest.raises(ValueError):
        kv.boundary_limit_check(build_single_cap(1.0, 4))
