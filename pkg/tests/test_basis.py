import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lubrex.basis import (build_operator, generate_bases, get_basis, is_valid_element,
                          partition_count, partition_count_pentagonal, shift_rows)
from lubrex.errors import NotInBasis
from lubrex.geometry import eval_basis, parse_shape


def test_partition_counts_match_pentagonal_oracle():
    for k in range(0, 61):
        assert partition_count(k) == partition_count_pentagonal(k)
    assert [partition_count(k) for k in range(8)] == [1, 1, 2, 3, 5, 7, 11, 15]


def test_basis_dimensions_and_validity():
    bases = generate_bases(20)
    for k, b in enumerate(bases):
        assert b.dimension == partition_count(k)
        assert all(is_valid_element(e, k) for e in b.columns)
        assert len(set(b.columns)) == b.dimension


def test_basis_order_last_slot_first():
    b = get_basis(6)
    cols = b.columns
    assert cols[0] == (0, 6, 0, 0, 0, 0, 0)      # h_x^6
    assert cols[-1] == (5, 0, 0, 0, 0, 0, 1)     # h^5 d^6h/6!
    rev = [tuple(reversed(c)) for c in cols]
    assert rev == sorted(rev)


def test_basis_small_cases():
    assert get_basis(0).columns == [(0,)]
    assert get_basis(1).columns == [(0, 1)]
    assert get_basis(2).columns == [(0, 2, 0), (1, 0, 1)]


def test_index_is_one_based_and_rejects_invalid():
    b = get_basis(4)
    assert b.index((0, 4, 0, 0, 0)) == 1
    assert b.index((3, 0, 0, 0, 1)) == b.dimension
    with pytest.raises(NotInBasis):
        b.index((0, 3, 0, 0, 0))
    with pytest.raises(NotInBasis):
        b.index((0, 4, 0, 0))
    assert b.lookup(np.array([[0, 3, 0, 0, 0], [0, 4, 0, 0, 0]])).tolist() == [-1, 0]


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=18), st.data())
def test_lookup_roundtrip(k, data):
    b = get_basis(k)
    j = data.draw(st.integers(min_value=0, max_value=b.dimension - 1))
    assert b.index(b.columns[j]) == j + 1


def test_generation_speed_to_50():
    t = time.perf_counter()
    from lubrex.basis import _generate
    _generate.cache_clear()
    bases = generate_bases(50)
    assert time.perf_counter() - t < 5.0
    assert bases[50].dimension == 204226


def test_h_dx_column_sums():
    for k in range(1, 12):
        M = build_operator("h_dx", k).matrix
        assert np.all(np.asarray(M.sum(axis=0)).ravel() == 2 * k)
        H = build_operator("hx_mult", k).matrix
        assert np.all(np.asarray(H.sum(axis=0)).ravel() == 1)


def _spectral_dx(f):
    n = f.size
    k = np.fft.fftfreq(n, d=1.0 / n)
    return np.real(np.fft.ifft(2j * np.pi * k * np.fft.fft(f)))


@pytest.mark.parametrize("k", [1, 3, 6])
def test_operators_act_as_differential_maps(k):
    shape = parse_shape("fourier:c0=0.6;a1=0.2;b1=0.1;b2=0.05")
    x = np.arange(256) / 256
    D = shape.derivs(x, 1)
    rng = np.random.default_rng(k)
    c = rng.standard_normal(get_basis(k).dimension)
    f = eval_basis(shape, x, k) @ c
    Pk1 = eval_basis(shape, x, k + 1)
    hd = build_operator("h_dx", k).apply(c[None, :])[0]
    hx = build_operator("hx_mult", k).apply(c[None, :])[0]
    np.testing.assert_allclose(Pk1 @ hd, D[0] * _spectral_dx(f), atol=1e-9)
    np.testing.assert_allclose(Pk1 @ hx, D[1] * f, atol=1e-12)
    L = build_operator("shifted", k, 3).apply(c[None, :])[0]
    np.testing.assert_allclose(L, hd - 3 * hx, atol=1e-12)


def test_exact_and_float_application_agree():
    k = 8
    rng = np.random.default_rng(0)
    Xi = rng.integers(-50, 50, size=(3, get_basis(k).dimension))
    Xo = np.array(Xi.tolist(), dtype=object)
    shifts = [0, -2, 5]
    exact = shift_rows(k, Xo, shifts)
    flt = shift_rows(k, Xi.astype(float), shifts)
    assert exact.dtype == object
    np.testing.assert_array_equal(np.array(exact.tolist(), dtype=float), flt)


def test_fractional_shift_exact():
    from fractions import Fraction
    op = build_operator("shifted", 3, Fraction(1, 2))
    X = np.array([[Fraction(1)] * get_basis(3).dimension], dtype=object)
    out = op.apply(X)
    ref = op.matrix @ np.ones(get_basis(3).dimension)
    np.testing.assert_allclose(np.array(out.tolist(), dtype=float)[0], ref)
    assert all(isinstance(v, Fraction) for v in out[0])
