import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from newton_extremal import planar as pl
from newton_extremal.errors import BranchAmbiguity
from newton_extremal.planar import PlanarGeometry

GEOMS = [PlanarGeometry(0.6, 2.2), PlanarGeometry(0.3, 1.0), PlanarGeometry(1.4, 2.9)]


def _ids(g):
    return f"{g.xi1:g}-{g.xi2:g}"


@pytest.mark.parametrize("g", GEOMS, ids=_ids)
def test_geometry(g):
    assert -1 < g.a < g.b < 1
    with pytest.raises(ValueError):
        PlanarGeometry(1.0, 1.0)
    with pytest.raises(ValueError):
        PlanarGeometry(0.0, 1.0)


@pytest.mark.parametrize("g", GEOMS, ids=_ids)
def test_boundary_derivative_structure(g):
    arcs = np.concatenate([np.linspace(0.0, g.xi1 - 1e-6, 50), np.linspace(g.xi2 + 1e-6, np.pi, 50)])
    # zero to rounding, relative to |f| which blows up like dist^{-1/2} at xi1
    scale = np.maximum(1.0, np.abs(pl.f_branch(np.exp(1j * arcs), g)))
    assert np.max(np.abs(pl.dP_dtheta(arcs, g)) / scale) < 1e-12
    gap = np.linspace(g.xi1 + 1e-6, g.xi2 - 1e-6, 200)
    vals = pl.dP_dtheta(gap, g)
    assert np.all(vals < 0)
    np.testing.assert_allclose(vals, -pl.gap_slope(gap, g), rtol=1e-12)
    with pytest.raises(BranchAmbiguity):
        pl.dP_dtheta(g.xi1, g)
    with pytest.raises(BranchAmbiguity):
        pl.dP_dtheta(np.array([1.0, g.xi2]), g)


@pytest.mark.parametrize("g", GEOMS, ids=_ids)
def test_branch_continuous_up_to_circle(g):
    th = np.linspace(0.05, np.pi - 0.05, 61)
    th = th[(np.abs(th - g.xi1) > 0.02) & (np.abs(th - g.xi2) > 0.02)]
    inner = pl.dP_dtheta(th, g, r=1 - 1e-9)
    np.testing.assert_allclose(inner, pl.dP_dtheta(th, g), atol=1e-6)
    # real and positive near the centre
    f0 = pl.f_branch(np.array([1e-3, 1e-3j, -1e-3]), g)
    assert np.all(np.abs(f0 - 1) < 1e-2)


@pytest.mark.parametrize("g", GEOMS, ids=_ids)
def test_radial_against_scipy(g):
    d, M = pl.planar_dM(g)
    a, b = g.a, g.b
    Mq = quad(lambda r: (np.sqrt((1 + r * r - 2 * a * r) / (1 + r * r - 2 * b * r)) - 1) / r, 0, 1,
              epsabs=1e-14, epsrel=1e-13)[0]
    dq = quad(lambda r: (np.sqrt((1 + r * r + 2 * a * r) / (1 + r * r + 2 * b * r)) - 1) / r, 0, 1,
              epsabs=1e-14, epsrel=1e-13)[0]
    assert M == pytest.approx(Mq, rel=1e-11)
    assert d == pytest.approx(dq, rel=1e-11, abs=1e-14)


@pytest.mark.parametrize("g", GEOMS, ids=_ids)
def test_log_scale_ranges(g):
    d, M = pl.planar_dM(g)
    assert np.log(0.25) < d < 0 < M


@pytest.mark.parametrize("g", GEOMS, ids=_ids)
def test_path_consistency(g):
    d, M = pl.planar_dM(g)
    assert abs((M - d) - pl.gap_drop(g)) < 1e-8
    # boundary profile rebuilt from d reaches M on the north arc
    prof = pl.boundary_profile(np.array([0.0, 0.5 * g.xi1, g.xi2, np.pi]), g)
    np.testing.assert_allclose(prof, [M, M, d, d], atol=1e-8)


def test_degenerate_limit():
    g = PlanarGeometry(1.0, 1.0 + 1e-9)
    d, M = pl.planar_dM(g)
    assert abs(d) < 1e-8 and abs(M) < 1e-8


# ---------------------------------------------------------------------------
# comparisons between xi1 < xi1' with common xi2


PAIRS = [(0.6, 1.0, 2.2), (0.3, 0.9, 1.5), (1.0, 2.0, 2.8)]


@pytest.mark.parametrize("x1,x1p,x2", PAIRS)
def test_d_shift(x1, x1p, x2):
    g, g2 = PlanarGeometry(x1, x2), PlanarGeometry(x1p, x2)
    d1, _ = pl.planar_dM(g)
    d2, _ = pl.planar_dM(g2)
    diff = pl.d_shift_integral(g, g2)
    assert diff > 0
    assert abs((d2 - d1) - diff) < 1e-10


@pytest.mark.parametrize("x1,x1p,x2", PAIRS)
def test_tail_slope_gain(x1, x1p, x2):
    g, g2 = PlanarGeometry(x1, x2), PlanarGeometry(x1p, x2)
    for t0 in np.linspace(x1p, x2, 8, endpoint=False):
        assert pl.tail_slope_gain(g, g2, t0) > 0
    th = np.linspace(x1p + 1e-6, x2 - 1e-6, 100)
    assert np.all(pl.gap_slope(th, g, g2.xi1) > pl.gap_slope(th, g))
    assert pl.tail_slope_gain(g, g, 0.5 * (x1 + x2)) == 0.0
    with pytest.raises(ValueError):
        pl.tail_slope_gain(g2, g, x1p)
    with pytest.raises(ValueError):
        pl.tail_slope_gain(g, g2, x2)


def test_tail_slope_gain_against_scipy():
    g, g2 = PlanarGeometry(0.6, 2.2), PlanarGeometry(1.0, 2.2)
    f = lambda t: pl.gap_slope(t, g, g2.xi1) - pl.gap_slope(t, g)
    ref = quad(f, 1.3, 2.2, epsabs=1e-13, limit=200)[0]
    assert pl.tail_slope_gain(g, g2, 1.3) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("x1,x1p,x2", PAIRS)
def test_cumulative_boundary_gap(x1, x1p, x2):
    g, g2 = PlanarGeometry(x1, x2), PlanarGeometry(x1p, x2)
    rep = pl.cumulative_boundary_gap(g, g2)
    assert rep.values[0] == 0.0
    assert abs(rep.values[-1]) < 1e-8
    interior = rep.values[1:-1]
    assert np.all(interior < 0)
    assert rep.argmax in (0.0, np.pi)
    assert rep.max_value <= 1e-8


def test_cumulative_boundary_mean_value():
    # the integral of P(1, .) over the half circle is pi P(0) = 0
    for g in GEOMS:
        assert abs(pl.cumulative_boundary(np.pi, g)[0]) < 1e-8


@settings(max_examples=25, deadline=None)
@given(x1=st.floats(0.1, 2.5), gap=st.floats(0.1, 0.5), shift=st.floats(0.05, 0.9))
def test_cumulative_gap_property(x1, gap, shift):
    x2 = min(x1 + gap + 0.1, 3.0)
    x1p = x1 + shift * (x2 - x1)
    rep = pl.cumulative_boundary_gap(PlanarGeometry(x1, x2), PlanarGeometry(x1p, x2), samples=65)
    assert rep.max_value <= 1e-8
