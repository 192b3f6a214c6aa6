import math

import numpy as np
import pytest

from lubrex.errors import (ExceedsUnitHeight, NonPositiveShape, OutOfStatedRange, ParseError,
                           QuadratureUnderResolved)
from lubrex.geometry import (eval_h_derivs, moments, parse_shape, sine_family_closed_forms,
                             sine_family_r0, sup_r, t_values)


def test_parse_grammar():
    s = parse_shape("sine:a=0.2")
    assert s.c0 == pytest.approx(0.6) and s.sin == ((1, pytest.approx(0.4)),)
    c = parse_shape("const:c=0.5")
    assert c.is_constant and c(np.array([0.3]))[0] == 0.5
    f = parse_shape("fourier:c0=0.6;a1=0.1;b3=-0.05")
    x = np.array([0.1])
    assert f(x)[0] == pytest.approx(0.6 + 0.1 * math.cos(0.2 * math.pi)
                                    - 0.05 * math.sin(0.6 * math.pi))


@pytest.mark.parametrize("spec", ["sine", "sine:b=1", "const:c=x", "fourier:a1=0.1",
                                  "fourier:c0=0.5;z1=1", "const:c=1;c=1", "blob:a=1"])
def test_parse_errors(spec):
    with pytest.raises(ParseError):
        parse_shape(spec)


def test_shape_range_errors():
    with pytest.raises(NonPositiveShape):
        parse_shape("fourier:c0=0.3;b1=0.5")
    with pytest.raises(ExceedsUnitHeight):
        parse_shape("const:c=1.5")
    with pytest.raises(NonPositiveShape):
        parse_shape("sine:a=-0.1")


def test_analytic_derivatives():
    s = parse_shape("fourier:c0=0.6;a1=0.1;b2=0.05")
    x = np.linspace(0, 1, 9)
    D = eval_h_derivs(s, x, 4)
    dx = 1e-5
    fd = (s(x + dx) - s(x - dx)) / (2 * dx)
    np.testing.assert_allclose(D[1], fd, atol=1e-8)
    w = 2 * math.pi
    np.testing.assert_allclose(D[4], 0.1 * w ** 4 * np.cos(w * x)
                               + 0.05 * (2 * w) ** 4 * np.sin(2 * w * x), atol=1e-9)
    T = t_values(D)
    np.testing.assert_allclose(T[2], D[0] * D[2] / 2)


@pytest.mark.parametrize("a", [0.2, 0.05, 0.01])
def test_sine_closed_forms(a):
    mom = moments(parse_shape(f"sine:a={a}"), 0, N=4096)
    cf = sine_family_closed_forms(a)
    assert mom.I1 == pytest.approx(cf["I1"], rel=1e-12)
    assert mom.I2 == pytest.approx(cf["I2"], rel=1e-12)
    assert mom.I3 == pytest.approx(cf["I3"], rel=1e-12)
    assert math.sqrt(mom.I3 / mom.I1) == pytest.approx(cf["sqrt_I3_over_I1"], rel=1e-12)
    assert mom.r[0] == pytest.approx(sine_family_r0(a), rel=1e-6)


def test_r0_range():
    with pytest.raises(OutOfStatedRange):
        sine_family_r0(0.8)
    with pytest.raises(OutOfStatedRange):
        sine_family_r0(0.0)


def test_constant_shape_moments(const1):
    mom = moments(const1, 3)
    assert mom.I1 == mom.I3 == 1.0
    assert all(math.isinf(r) for r in mom.r)
    assert mom.h0 == 1.0


def test_moment_vectors(mom02):
    # E^(0) = 1 by normalization; E^(2) pairs with Phi_2 = (h_x^2, h h_xx/2)
    np.testing.assert_allclose(mom02.E[0][2], [1.0])
    assert mom02.E[2][3].shape == (2,)
    assert mom02.Et[4][1].shape == (5,)
    assert np.all(mom02.Et[4][1] >= 0)


def test_under_resolved_quadrature():
    with pytest.raises(QuadratureUnderResolved):
        moments(parse_shape("sine:a=0.001"), 0, N=64)


def test_r_values(sine02):
    r = [sup_r(sine02, k) for k in range(4)]
    assert r[0] == pytest.approx(0.3559, abs=5e-4)
    assert all(isinstance(v, float) for v in r)
    assert all(b <= a + 1e-12 for a, b in zip(r, r[1:]))
