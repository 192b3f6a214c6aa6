from fractions import Fraction

import numpy as np
import pytest

from golden import A0_ORDER2, A1_ORDER2, B_ORDER2
from lubrex.basis import partition_count
from lubrex.errors import MissingPredecessor
from lubrex.matrices import (KINDS, RationalMatrix, base_case, binom_half, derive_x_derivatives,
                             expansion_stack, legendre_change_of_basis, next_order, to_jsonable,
                             weighted_frobenius_sq)


def _frac_table(rows):
    return [[Fraction(v) if isinstance(v, str) else Fraction(v) for v in r] for r in rows]


def test_base_case():
    m = base_case()
    assert m.A0[:, 0].tolist() == [0, 1, -2, 1]
    assert m.A1[:, 0].tolist() == [0, 0, -1, 1]
    assert m.B[:, 0].tolist() == [0, 0, 3, -2]


def test_order_two_matches_published_example():
    m = expansion_stack(1)[1]
    assert m.A0.tolist() == _frac_table(A0_ORDER2)
    assert m.A1.tolist() == _frac_table(A1_ORDER2)
    assert m.B.tolist() == _frac_table(B_ORDER2)


def test_shapes_and_zero_rows():
    for m in expansion_stack(5):
        d = partition_count(m.order)
        for kind in KINDS:
            M = m[kind]
            assert M.shape == (m.order + 4, d)
            if m.order >= 2:
                assert all(v == 0 for v in M[0]) and all(v == 0 for v in M[1])


def test_exact_and_float_recursions_agree():
    ex = expansion_stack(6, exact=True)
    fl = expansion_stack(6, exact=False)
    for a, b in zip(ex, fl):
        for kind in KINDS:
            ref = a.float(kind)
            np.testing.assert_allclose(b.float(kind), ref, rtol=1e-12,
                                       atol=1e-12 * np.abs(ref).max())


def test_next_order_needs_predecessors():
    with pytest.raises(MissingPredecessor):
        next_order([])
    two = next_order([base_case()])
    assert two.order == 2


def test_binom_half():
    assert [binom_half(k) for k in range(4)] == [1, Fraction(-1, 2), Fraction(3, 8),
                                                 Fraction(-5, 16)]


def test_rational_matrix_roundtrip():
    F = np.array([[Fraction(1, 3), Fraction(-2, 5)], [Fraction(0), Fraction(7, 2)]], dtype=object)
    R = RationalMatrix.from_fractions(F)
    assert R.fractions().tolist() == F.tolist()
    assert R.reduced().fractions().tolist() == F.tolist()
    assert to_jsonable(R) == [["1/3", "-2/5"], ["0", "7/2"]]


def test_legendre_change_of_basis_is_exact_inverse():
    lbc = legendre_change_of_basis(3)
    R, RinvT = lbc.R, lbc.RinvT
    prod = RinvT.T.dot(R)
    n = R.shape[0]
    assert all(prod[i, j] == (1 if i == j else 0) for i in range(n) for j in range(n))
    assert R[0].tolist()[:1] == [1]
    assert R[1].tolist()[:2] == [-1, 2]


def test_renormalized_legendre_orthonormal_on_gap():
    # P_n(y/h) sqrt((2n+1)/h) is orthonormal on [0, h] for each h
    lbc = legendre_change_of_basis(2)  # degrees 0..7; monomial rounding stays below 1e-12
    R = np.array(lbc.R.tolist(), dtype=float)
    g, w = np.polynomial.legendre.leggauss(30)
    for h in (0.2, 0.7, 1.0):
        y = 0.5 * h * (g + 1)
        eta = y / h
        V = eta[None, :] ** np.arange(R.shape[1])[:, None]
        P = (R @ V) * np.sqrt((2 * np.arange(R.shape[0]) + 1) / h)[:, None]
        G = (P * (0.5 * h * w)) @ P.T
        np.testing.assert_allclose(G, np.eye(R.shape[0]), atol=1e-12)


def test_weighted_frobenius_exact_matches_float():
    m = expansion_stack(3)[3]
    lbc = legendre_change_of_basis(3)
    for kind in KINDS:
        ex = weighted_frobenius_sq(lbc, m.raw(kind))
        assert isinstance(ex, Fraction)
        assert float(ex) == pytest.approx(weighted_frobenius_sq(lbc, m.float(kind)), rel=1e-13)


def test_derivative_matrices_shapes_and_prefactors():
    m = expansion_stack(2)[2]
    dm = derive_x_derivatives(m)
    d2, d4 = partition_count(6), partition_count(8)
    assert dm.dA0.shape == (8, d2) and dm.ddB.shape == (8, d4)
    assert dm.prefactors == {"dA0": -1, "dA1": -1, "dB": -2, "ddA0": -3, "ddA1": -3, "ddB": -4}


def test_legendre_gram_matrix_exact():
    lbc = legendre_change_of_basis(4)
    R = lbc.R
    n = R.shape[0]
    H = np.array([[Fraction(1, i + j + 1) for j in range(n)] for i in range(n)], dtype=object)
    G = R.dot(H).dot(R.T)
    assert all(G[i, j] == (Fraction(1, 2 * i + 1) if i == j else 0)
               for i in range(n) for j in range(n))
