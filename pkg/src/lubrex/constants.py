"""Geometry-independent constants kappa, K, K-tilde, rho_k and theta_k."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence

import numpy as np

from .basis import get_basis, partition_count, worker_count
from .matrices import (KINDS, PREFACTOR, Matrix, OrderMatrices, RationalMatrix, iter_orders,
                       legendre_change_of_basis, weighted_frobenius_sq, x_derivative_rows)


@dataclass(frozen=True)
class RawOrder:
    """Per-order quantities before the accumulation loops.

    kappa are half l1-norms of row 3; Ksq and Ktsq are the squared
    (unscaled by d) weighted Frobenius norms times d_{2k+2} resp. d_{2k+4}.
    """

    k: int
    kappa: tuple  # (kappa0, kappa1, kappa2); Fractions in exact mode
    Ksq: tuple
    Ktsq: tuple


def _half_l1_row3(M: Matrix):
    if isinstance(M, RationalMatrix):
        return Fraction(sum(abs(v) for v in M.num[3]), 2 * M.den)
    return 0.5 * float(np.sum(np.abs(np.asarray(M)[3])))


def raw_order(k: int, mats: Dict[str, Matrix]) -> RawOrder:
    """kappa and squared K, K-tilde for one order from its A0, A1, B."""
    lbc = legendre_change_of_basis(k)
    d2 = partition_count(2 * k + 2)
    d4 = partition_count(2 * k + 4)
    kap, ksq, ktsq = [], [], []
    for kind in KINDS:
        M = mats[kind]
        kap.append(_half_l1_row3(M))
        first = x_derivative_rows(M, PREFACTOR[kind], 2 * k, 2)
        cur = x_derivative_rows(first, PREFACTOR[kind] - 2, 2 * k + 2, 2)
        ksq.append(d2 * weighted_frobenius_sq(lbc, first))
        ktsq.append(d4 * weighted_frobenius_sq(lbc, cur))
    return RawOrder(k, tuple(kap), tuple(ksq), tuple(ktsq))


def raw_orders(k_max: int, precision: str = "exact") -> List[RawOrder]:
    """Stream the recursion to order 2*k_max computing RawOrder per order."""
    if precision not in ("exact", "float"):
        raise ValueError("precision must be 'exact' or 'float'")
    exact = precision == "exact"
    out = []
    get_basis(2 * k_max + 4)  # build the bases once before any worker starts

    def one_kind(kind):
        res = []
        for k, mats in iter_orders(k_max, exact=exact, kinds=(kind,)):
            M = mats[kind]
            first = x_derivative_rows(M, PREFACTOR[kind], 2 * k, 2)
            fourth = x_derivative_rows(first, PREFACTOR[kind] - 2, 2 * k + 2, 2)
            lbc = legendre_change_of_basis(k)
            res.append((
                _half_l1_row3(M),
                partition_count(2 * k + 2) * weighted_frobenius_sq(lbc, first),
                partition_count(2 * k + 4) * weighted_frobenius_sq(lbc, fourth),
            ))
        return res

    # One matrix type per worker keeps memory at two orders of each type.
    workers = min(len(KINDS), worker_count())
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_kind = dict(zip(KINDS, pool.map(one_kind, KINDS)))
    else:
        per_kind = {kind: one_kind(kind) for kind in KINDS}
    for k in range(k_max + 1):
        vals = [per_kind[kind][k] for kind in KINDS]
        out.append(RawOrder(k, tuple(v[0] for v in vals), tuple(v[1] for v in vals),
                            tuple(v[2] for v in vals)))
    return out


@dataclass(frozen=True)
class KappaConstants:
    """Rows (k, kappa0 before, kappa1 before, kappa2, kappa0 after, kappa1 after)."""

    before0: tuple
    before1: tuple
    kappa2: tuple
    after0: tuple
    after1: tuple

    def rows(self):
        return [(k, float(self.before0[k]), float(self.before1[k]), float(self.kappa2[k]),
                 float(self.after0[k]), float(self.after1[k])) for k in range(len(self.kappa2))]


def kappa_loop(raws: Sequence[RawOrder]) -> KappaConstants:
    b0 = [r.kappa[0] for r in raws]
    b1 = [r.kappa[1] for r in raws]
    k2 = [r.kappa[2] for r in raws]
    a0, a1 = list(b0), list(b1)
    for k in range(1, len(raws)):
        a0[k] = a0[k] + sum((a0[l] * k2[k - l] for l in range(k)), type(a0[k])(0))
        a1[k] = a1[k] + sum((a1[l] * k2[k - l] for l in range(k)), type(a1[k])(0))
    return KappaConstants(tuple(b0), tuple(b1), tuple(k2), tuple(a0), tuple(a1))


@dataclass(frozen=True)
class KConstants:
    K0_before: tuple
    K1_before: tuple
    K2: tuple
    K0_after: tuple
    K1_after: tuple
    Kt0_before: tuple
    Kt1_before: tuple
    Kt2: tuple
    Kt0_after: tuple
    Kt1_after: tuple

    def rows(self, tilde: bool = False):
        if tilde:
            cols = (self.Kt0_before, self.Kt1_before, self.Kt2, self.Kt0_after, self.Kt1_after)
        else:
            cols = (self.K0_before, self.K1_before, self.K2, self.K0_after, self.K1_after)
        return [(k,) + tuple(c[k] for c in cols) for k in range(len(self.K2))]


def _sqrt(v) -> float:
    if isinstance(v, Fraction):
        # exact radicand; double-precision root
        return math.sqrt(v.numerator / v.denominator) if v.numerator < 10 ** 300 else \
            math.exp(0.5 * (math.log(v.numerator) - math.log(v.denominator)))
    return math.sqrt(v)


def k_loop(raws: Sequence[RawOrder], kappa: KappaConstants) -> KConstants:
    n = len(raws)
    K = [[_sqrt(r.Ksq[i]) for r in raws] for i in range(3)]
    Kt = [[_sqrt(r.Ktsq[i]) for r in raws] for i in range(3)]
    ka = [[float(v) for v in kappa.after0], [float(v) for v in kappa.after1]]
    Ka = [list(K[0]), list(K[1])]
    Kta = [list(Kt[0]), list(Kt[1])]
    for k in range(n):
        for i in range(2):
            Ka[i][k] = K[i][k] + math.fsum(ka[i][l] * K[2][k - l] for l in range(k + 1))
            Kta[i][k] = Kt[i][k] + math.fsum(ka[i][l] * Kt[2][k - l] for l in range(k + 1))
    t = tuple
    return KConstants(t(K[0]), t(K[1]), t(K[2]), t(Ka[0]), t(Ka[1]),
                      t(Kt[0]), t(Kt[1]), t(Kt[2]), t(Kta[0]), t(Kta[1]))


@dataclass(frozen=True)
class UniversalConstants:
    rho: tuple
    theta: tuple
    argmax: tuple  # index (0, 1, 2) of the winning term in the rho max

    def rho_pow(self, k: int) -> float:
        return self.rho[k] ** (2 * k + 2)


def theta_from_rho(rho_k: float, k: int) -> float:
    return 15.0 * rho_k ** (2 * k + 2) * math.sqrt(85.0 / 16.0 + 20.0 * k / 3.0)


def rho_theta(kc: KConstants) -> UniversalConstants:
    rho, theta, arg = [], [], []
    for k in range(len(kc.K2)):
        terms = [5 * kc.K0_after[k], 5 * kc.K1_after[k] + 7.5]
        if k >= 1:
            terms[0] += kc.Kt0_after[k - 1]
            terms[1] += kc.Kt1_after[k - 1]
            terms.append(rho[k - 1] ** (-2 * k))
        j = int(np.argmax(terms))
        r = terms[j] ** (-1.0 / (2 * k + 2))
        rho.append(r)
        theta.append(theta_from_rho(r, k))
        arg.append(j)
    return UniversalConstants(tuple(rho), tuple(theta), tuple(arg))


@dataclass(frozen=True)
class UniversalTables:
    precision: str
    kappa: KappaConstants
    K: KConstants
    universal: UniversalConstants

    @property
    def k_max(self) -> int:
        return len(self.universal.rho) - 1


_CACHE: Dict[tuple, UniversalTables] = {}


def universal_constants(k_max: int, precision: str = "exact") -> UniversalTables:
    """All tables for 0 <= k <= k_max (cached per precision)."""
    for (prec, km), tab in _CACHE.items():
        if prec == precision and km >= k_max:
            return _truncate(tab, k_max) if km > k_max else tab
    raws = raw_orders(k_max, precision)
    kap = kappa_loop(raws)
    kc = k_loop(raws, kap)
    tab = UniversalTables(precision, kap, kc, rho_theta(kc))
    _CACHE[(precision, k_max)] = tab
    return tab


def _truncate(tab: UniversalTables, k_max: int) -> UniversalTables:
    n = k_max + 1

    def cut(obj):
        return type(obj)(*[v[:n] for v in obj.__dict__.values()])
    return UniversalTables(tab.precision, cut(tab.kappa), cut(tab.K), cut(tab.universal))


def kappa_constants(stack: Sequence[OrderMatrices]) -> KappaConstants:
    """kappa table from a precomputed stack of OrderMatrices."""
    raws = [RawOrder(m.k, tuple(_half_l1_row3(m.raw(kind)) for kind in KINDS), (), ())
            for m in stack]
    return kappa_loop(raws)


def k_constants(stack: Sequence[OrderMatrices], kappa: KappaConstants) -> KConstants:
    raws = [raw_order(m.k, m.data) for m in stack]
    return k_loop(raws, kappa)


def format_sci(v: float) -> str:
    """Three significant figures in the tables' scientific notation."""
    return f"{v:.2e}"
