import math
import warnings
from types import SimpleNamespace

import numpy as np
import pytest

from lubrex.bounds import (compare_bound_to_error, gamma_k_profile, lbb_factor, star_bound,
                           theta_combination)
from lubrex.errors import BinomialDivergence, BoundViolation, ValidityWarning
from lubrex.fields import BoundaryData
from lubrex.geometry import moments


def test_constant_shape_bounds_vanish(const1, exact_tables, boundary):
    b = star_bound(moments(const1, 2), exact_tables, boundary, 2, 0.1)
    assert b.star == b.bound_p == b.bound_Q == b.bound_uv == 0.0


def test_star_formula(mom02, exact_tables, boundary):
    k, eps = 1, 0.08
    b = star_bound(mom02, exact_tables, boundary, k, eps)
    rho, theta = exact_tables.universal.rho[k], exact_tables.universal.theta[k]
    r = mom02.r[k]
    ref = (math.sqrt(mom02.I1) * 1.5 * (1 + theta * eps / r * math.sqrt(mom02.I3 / mom02.I1))
           * (eps / (rho * r)) ** 4)
    assert b.star == pytest.approx(ref, rel=1e-14)
    assert b.bound_Q == pytest.approx(b.star / math.sqrt(3))
    assert b.bound_psi == b.bound_uv == b.bound_omega == b.star
    assert b.bound_p / b.star == pytest.approx(lbb_factor(mom02.h0) * (r + 1 / r) ** 2, rel=1e-14)
    assert b.validity


def test_pressure_factor_value(mom02, exact_tables, boundary):
    b = star_bound(mom02, exact_tables, boundary, 0, 0.1)
    # h0 = 0.2: max(9/sqrt(0.2), 2.25 * 0.2^-1.5) = 25.155
    assert lbb_factor(0.2) == pytest.approx(2.25 * 0.2 ** -1.5)
    assert b.pressure_factor == pytest.approx(252.1, abs=0.1)


def test_star_monotone(mom02, exact_tables):
    vals = [star_bound(mom02, exact_tables, BoundaryData(), 2, e, warn=False).star
            for e in np.linspace(0.02, 0.3, 15)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    v1 = star_bound(mom02, exact_tables, BoundaryData(-0.5, 1.0), 2, 0.1).star
    v2 = star_bound(mom02, exact_tables, BoundaryData(-0.7, 1.0), 2, 0.1).star
    assert v2 > v1


def test_validity_warning(mom02, exact_tables, boundary):
    with pytest.warns(ValidityWarning):
        b = star_bound(mom02, exact_tables, boundary, 0, 0.2)
    assert not b.validity


def test_theta_combination_spot(mom02, exact_tables, sine001):
    th = exact_tables.universal.theta
    assert theta_combination(th[0], mom02.r[0], mom02.I1, mom02.I3) == pytest.approx(12.5, abs=0.05)
    m = moments(sine001, 1, N=2048)
    assert theta_combination(th[1], m.r[1], m.I1, m.I3) == pytest.approx(19.3, abs=0.05)


def test_gamma_constant_shape(const1, boundary):
    g = gamma_k_profile(const1, boundary, 2, 0.1, 64)
    assert np.all(g.gamma == 0) and g.holds


def test_gamma0_direct(sine02, boundary):
    eps = 0.1
    g = gamma_k_profile(sine02, boundary, 0, eps, 512)
    hx = sine02.derivs(g.x, 1)[1]
    direct = ((1 + eps ** 2 * hx ** 2) ** -0.5 - 1) / eps ** 2
    np.testing.assert_allclose(g.gamma, direct, atol=1e-12)
    assert np.all(np.abs(g.gamma) <= hx ** 2 / 2 + 1e-15)


@pytest.mark.parametrize("k", [0, 1, 2, 3, 5])
def test_gamma_pointwise_bounds(sine02, boundary, k):
    g = gamma_k_profile(sine02, boundary, k, 0.1, 1024)
    assert g.holds
    assert np.max(np.abs(g.gamma) / np.maximum(g.bound_gamma, 1e-300)) <= 1.0


def test_gamma_x_matches_finite_differences(sine02, boundary):
    n = 4096
    g = gamma_k_profile(sine02, boundary, 1, 0.2, n)
    fd = (np.roll(g.gamma, -1) - np.roll(g.gamma, 1)) * n / 2
    assert np.abs(fd - g.gamma_x).max() < 1e-4 * np.abs(g.gamma_x).max()


def test_binomial_divergence(sine02, boundary):
    with pytest.raises(BinomialDivergence):
        gamma_k_profile(sine02, boundary, 0, 0.6, 64)   # sup|h_x| = 0.8 pi


def _measured(**kw):
    base = dict(norm_psi=1e-3, norm_uv=1e-3, norm_omega=1e-3, norm_p=1e-3, q_err=1e-4)
    base.update(kw)
    return SimpleNamespace(**base)


def test_compare_ratios(mom02, exact_tables, boundary):
    b = star_bound(mom02, exact_tables, boundary, 0, 0.1)
    out = compare_bound_to_error(b, _measured())
    assert out["uv"] == pytest.approx((b.star / 1e-3) ** 0.5)
    with pytest.raises(BoundViolation):
        compare_bound_to_error(b, _measured(norm_uv=1e9))
    soft = compare_bound_to_error(b, _measured(norm_uv=1e9), raise_on_violation=False)
    assert soft["uv"] < 1


def test_compare_zero_sentinel(const1, exact_tables, boundary):
    b = star_bound(moments(const1, 0), exact_tables, boundary, 0, 0.1)
    out = compare_bound_to_error(b, _measured(norm_psi=0, norm_uv=0, norm_omega=0, norm_p=0,
                                              q_err=0))
    assert all(math.isinf(v) for v in out.values())
