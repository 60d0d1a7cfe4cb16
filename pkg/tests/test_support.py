import xml.etree.ElementTree as ET

import numpy as np
import pytest

from newton_extremal.quadrature import gauss_legendre, graded_breaks, panel_rule, sqrt_endpoint_quad
from newton_extremal.svg import polyline_svg, sign_heatmap_svg


def test_gauss_legendre_exact_for_polynomials():
    x, w = gauss_legendre(8)
    for k in range(16):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert np.sum(w * x ** k) == pytest.approx(exact, abs=1e-14)
    with pytest.raises(ValueError):
        x[0] = 0.0


def test_panel_rule_integrates_over_breaks():
    th, w = panel_rule([0.0, 0.3, 1.0, np.pi], 12)
    assert np.sum(w * np.sin(th)) == pytest.approx(2.0, rel=1e-14)


def test_graded_breaks_refine_toward_point():
    br = graded_breaks(np.pi, [(1.0, 0.0)], 4, floor=1e-8)
    assert br[0] == 0.0 and br[-1] == np.pi and 1.0 in br
    gaps = np.diff(br)
    assert gaps.min() < 1e-7
    far = graded_breaks(np.pi, [(1.0, 2.0)], 4)
    np.testing.assert_allclose(far, np.linspace(0, np.pi, 5))


def test_log_singularity_with_grading():
    br = graded_breaks(1.0, [(0.4, 0.0)], 4, floor=1e-14)
    x, w = panel_rule(br, 16)
    got = np.sum(w * np.log(np.abs(x - 0.4)))
    exact = 0.4 * np.log(0.4) - 0.4 + 0.6 * np.log(0.6) - 0.6
    assert got == pytest.approx(exact, rel=1e-12)


def test_sqrt_endpoint_quad():
    # int_0^1 t^{-1/2} (1 - t)^{1/2} dt = B(1/2, 3/2) = pi / 2
    f = lambda t: np.sqrt(1 - t) / np.sqrt(t)
    assert sqrt_endpoint_quad(f, 0.0, 1.0, 32) == pytest.approx(np.pi / 2, rel=1e-13)
    assert sqrt_endpoint_quad(np.cos, 0.0, 1.0, 16, left=False, right=False) == pytest.approx(np.sin(1.0), rel=1e-14)
    assert sqrt_endpoint_quad(f, 1.0, 1.0) == 0.0


def test_polyline_svg_is_valid_xml():
    x = np.linspace(0, 1, 20)
    text = polyline_svg([("a", x, x ** 2), ("b", x, np.sqrt(x))], "two & curves")
    root = ET.fromstring(text)
    assert root.tag.endswith("svg")
    lines = [el for el in root.iter() if el.tag.endswith("polyline")]
    assert len(lines) == 2
    assert "two &amp; curves" in text


def test_heatmap_svg_colours():
    x = np.array([0.0, 1.0, 0.0, 1.0])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    vals = np.array([-1.0, 1.0, np.nan, 2.0])
    root = ET.fromstring(sign_heatmap_svg(x, y, vals, "signs <n=3>"))
    fills = [el.get("fill") for el in root.iter() if el.tag.endswith("rect") and el.get("fill")]
    assert len(set(fills)) >= 3
