import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import j0_quad, y0_quad
from ocmsd.special import SERIES_LIMIT, _asymptotic, _series, bessel_j0_y0, hankel1_0


def test_values_at_one():
    j, y = bessel_j0_y0(1.0)
    assert j == pytest.approx(0.76519769, abs=1e-8)
    assert y == pytest.approx(0.08825696, abs=1e-8)


@pytest.mark.parametrize("x", [0.1, 0.5, 1.0, 2.4048, 5.0, 11.9, 12.1, 20.0, 35.0, 50.0])
def test_against_quadrature(x):
    j, y = bessel_j0_y0(x)
    assert abs(j - j0_quad(x)) < 1e-8
    assert abs(y - y0_quad(x)) < 1e-8


def test_against_arbitrary_precision_dense():
    xs = np.linspace(0.1, 50.0, 400)
    err = max(max(abs(bessel_j0_y0(x)[0] - float(mpmath.besselj(0, x))), abs(bessel_j0_y0(x)[1] - float(mpmath.bessely(0, x)))) for x in xs)
    assert err < 1e-8


def test_small_argument_limits():
    j, y = bessel_j0_y0(1e-6)
    assert j == pytest.approx(1.0, abs=1e-12)
    assert y < -5
    assert bessel_j0_y0(1e-9)[1] < y


def test_branches_agree_at_threshold():
    for x in (SERIES_LIMIT, SERIES_LIMIT * (1 + 1e-9)):
        js, ys = _series(x)
        ja, ya = _asymptotic(x)
        assert abs(js - ja) < 1e-9 and abs(ys - ya) < 1e-9


def test_hankel_large_argument_magnitude():
    x = 1e4
    assert abs(abs(hankel1_0(x)) / math.sqrt(2 / (math.pi * x)) - 1) < 1e-6


def test_hankel_array_and_domain():
    xs = np.array([[1.0, 13.0], [100.0, 5000.0]])
    h = hankel1_0(xs)
    assert h.shape == xs.shape and h.dtype == complex
    assert h[0, 0] == hankel1_0(1.0)
    with pytest.raises(ValueError):
        hankel1_0(0.0)
    with pytest.raises(ValueError):
        hankel1_0(np.array([1.0, -2.0]))
    with pytest.raises(ValueError):
        bessel_j0_y0(-1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.5, max_value=200.0))
def test_wronskian(x):
    # J1 = -J0', Y1 = -Y0'; J1 Y0 - J0 Y1 = 2 / (pi x)
    d = 1e-5 * x
    j0, y0 = bessel_j0_y0(x)
    jp = (bessel_j0_y0(x + d)[0] - bessel_j0_y0(x - d)[0]) / (2 * d)
    yp = (bessel_j0_y0(x + d)[1] - bessel_j0_y0(x - d)[1]) / (2 * d)
    w = j0 * yp - y0 * jp
    assert w == pytest.approx(2 / (math.pi * x), rel=1e-5)
