"""Universal expansion matrices A0, A1, B, their x-derivatives, and the
shifted Legendre change of basis.

Rows are indexed by the power n of (y/h), columns by the basis Phi_{2k}.
A part of psi represented by a matrix M with h-prefactor exponent p reads

    h**p * sum_n (y/h)**n * (M[n, :] . Phi_m(x)).

The A matrices carry p = 1, the B matrix p = 0.  Differentiating such a
term in x maps row n by L_{n-p} = h d/dx - (n-p) h_x and lowers p by one.

Two arithmetic modes are supported.  In exact mode a matrix is a
``RationalMatrix``: an object array of Python integers over one common
denominator, so the sparse integer operators act without any rational
normalisation.  In float mode plain float64 arrays are used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Dict, Iterator, List, Optional, Sequence, Union

import numpy as np

from .basis import get_basis, shift_rows
from .errors import MissingPredecessor

KINDS = ("A0", "A1", "B")
PREFACTOR = {"A0": 1, "A1": 1, "B": 0}


def binom_half(k: int) -> Fraction:
    """Binomial coefficient (-1/2 choose k)."""
    out = Fraction(1)
    for i in range(k):
        out *= Fraction(-1, 2) - i
        out /= i + 1
    return out


def _int_array(values, shape) -> np.ndarray:
    arr = np.empty(shape, dtype=object)
    arr.ravel()[:] = [int(v) for v in np.ravel(values)]
    return arr


@dataclass(frozen=True, eq=False)
class RationalMatrix:
    """Exact matrix num / den with integer entries and a positive integer den."""

    num: np.ndarray
    den: int = 1
    _frac: list = field(default_factory=list, repr=False, compare=False)

    @property
    def shape(self):
        return self.num.shape

    @classmethod
    def from_fractions(cls, M) -> "RationalMatrix":
        M = np.asarray(M, dtype=object)
        if M.ndim == 1:
            M = M.reshape(-1, 1)
        den = 1
        for v in M.ravel():
            den = math.lcm(den, Fraction(v).denominator)
        num = np.empty(M.shape, dtype=object)
        num.ravel()[:] = [int(Fraction(v) * den) for v in M.ravel()]
        return cls(num, den).reduced()

    def reduced(self) -> "RationalMatrix":
        g = self.den
        for v in self.num.ravel():
            if g == 1:
                break
            g = math.gcd(g, v)
        if g <= 1:
            return self
        return RationalMatrix(self.num // g, self.den // g)

    def fractions(self) -> np.ndarray:
        """Entries as Fraction objects (cached)."""
        if not self._frac:
            out = np.empty(self.num.shape, dtype=object)
            d = self.den
            out.ravel()[:] = [Fraction(v, d) for v in self.num.ravel()]
            self._frac.append(out)
        return self._frac[0]

    def to_float(self) -> np.ndarray:
        d = self.den
        out = np.empty(self.num.shape)
        out.ravel()[:] = [v / d for v in self.num.ravel()]
        return out

    def __getitem__(self, idx) -> Fraction:
        return Fraction(self.num[idx], self.den)

    def rows(self, idx) -> "RationalMatrix":
        return RationalMatrix(self.num[idx], self.den)


Matrix = Union[RationalMatrix, np.ndarray]


def to_float(M: Matrix) -> np.ndarray:
    return M.to_float() if isinstance(M, RationalMatrix) else np.asarray(M, dtype=float)


def apply_shift_chain(M: Matrix, m: int, chain: Sequence[Sequence[int]]) -> Matrix:
    """Apply per-row shifted operators successively starting at superdegree m.

    ``chain[s][i]`` is the integer shift c of L_c used on row i at step s
    (the first step is applied first).
    """
    if isinstance(M, RationalMatrix):
        N = M.num
        for s, shifts in enumerate(chain):
            N = shift_rows(m + s, N, [int(c) for c in shifts])
        return RationalMatrix(N, M.den)
    X = np.asarray(M, dtype=float)
    for s, shifts in enumerate(chain):
        X = shift_rows(m + s, X, shifts)
    return X


def x_derivative_rows(M: Matrix, p: int, m: int, times: int = 1) -> Matrix:
    """x-derivative (``times`` times) of the part (p, M) at superdegree m.

    Row n picks up L_{n-p}, then L_{n-p+1}, ...; the resulting prefactor
    exponent is p - times and the superdegree m + times.
    """
    n = np.arange(M.shape[0])
    chain = [n - (p - s) for s in range(times)]
    return apply_shift_chain(M, m, chain)


def _combine(blocks, exact: bool, nrow: int, d: int):
    """Sum of row-scaled blocks: blocks = [(target_rows, factors, Matrix)]."""
    if not exact:
        out = np.zeros((nrow, d))
        for rows, facs, X in blocks:
            X *= np.asarray(facs, dtype=float)[:, None]  # X is a fresh temporary
            out[rows] += X
        return out
    den = 1
    for rows, facs, X in blocks:
        for f in facs:
            den = math.lcm(den, f.denominator * X.den)
    out = np.empty((nrow, d), dtype=object)
    out.fill(0)
    for rows, facs, X in blocks:
        mult = np.array([f.numerator * (den // (f.denominator * X.den)) for f in facs],
                        dtype=object)
        out[rows] = out[rows] + X.num * mult[:, None]
    return RationalMatrix(out, den)


def _next_matrix(kind: str, k: int, prev: Matrix, prev2: Optional[Matrix],
                 exact: bool) -> Matrix:
    """One step of the recursion for a single matrix type.

    prev is order 2k-2 (rows 0..2k+1), prev2 order 2k-4 when k >= 2.
    """
    p = PREFACTOR[kind]
    nrow = 2 * k + 4
    d = get_basis(2 * k).dimension
    sub = (lambda M, idx: M.rows(idx)) if exact else (lambda M, idx: np.asarray(M)[idx])
    blocks = []
    # -2/(n(n-1)) L_{n-1-p} L_{n-2-p} [row n-2 of order 2k-2]
    n = np.arange(4, nrow)
    X = apply_shift_chain(sub(prev, n - 2), 2 * k - 2, [n - 2 - p, n - 1 - p])
    blocks.append((n, [Fraction(-2, c * (c - 1)) for c in n.tolist()], X))
    if k >= 2:
        # -1/(n(n-1)(n-2)(n-3)) L_{n-1-p} ... L_{n-4-p} [row n-4 of order 2k-4]
        n = np.arange(6, nrow)
        X = apply_shift_chain(sub(prev2, n - 4), 2 * k - 4,
                              [n - 4 - p, n - 3 - p, n - 2 - p, n - 1 - p])
        blocks.append((n, [Fraction(-1, c * (c - 1) * (c - 2) * (c - 3)) for c in n.tolist()], X))
    out = _combine(blocks, exact, nrow, d)
    rows = np.arange(4, nrow)
    N = out.num if exact else out
    w2 = rows - 3
    w3 = 2 - rows
    if exact:
        N[2] = (N[4:] * _int_array(w2, (len(w2), 1))).sum(axis=0)
        N[3] = (N[4:] * _int_array(w3, (len(w3), 1))).sum(axis=0)
    else:
        N[2] = w2 @ N[4:]
        N[3] = w3 @ N[4:]
    if kind == "A1":
        c = binom_half(k)
        if exact:
            den = math.lcm(out.den, c.denominator)
            N = N * (den // out.den)
            cn = c.numerator * (den // c.denominator)
            N[2, 0] -= cn
            N[3, 0] += cn
            out = RationalMatrix(N, den)
        else:
            N[2, 0] -= float(c)
            N[3, 0] += float(c)
    return out.reduced() if exact else out


def _base(kind: str, exact: bool) -> Matrix:
    col = {"A0": (0, 1, -2, 1), "A1": (0, 0, -1, 1), "B": (0, 0, 3, -2)}[kind]
    if exact:
        return RationalMatrix(_int_array(col, (4, 1)), 1)
    return np.array(col, dtype=float).reshape(4, 1)


@dataclass(frozen=True, eq=False)
class OrderMatrices:
    """A0, A1, B at order 2k; shape (2k+4, d_{2k}).

    In exact mode ``A0``, ``A1``, ``B`` return object arrays of Fractions;
    the underlying ``RationalMatrix`` is available via ``raw``.
    """

    order: int
    data: Dict[str, Matrix]
    exact: bool = True

    @property
    def k(self) -> int:
        return self.order // 2

    def raw(self, kind: str) -> Matrix:
        return self.data[kind]

    def __getitem__(self, kind: str) -> np.ndarray:
        M = self.data[kind]
        return M.fractions() if isinstance(M, RationalMatrix) else M

    @property
    def A0(self):
        return self["A0"]

    @property
    def A1(self):
        return self["A1"]

    @property
    def B(self):
        return self["B"]

    def float(self, kind: str) -> np.ndarray:
        return to_float(self.data[kind])


def base_case(exact: bool = True) -> OrderMatrices:
    return OrderMatrices(0, {kind: _base(kind, exact) for kind in KINDS}, exact)


def next_order(stack: Sequence[OrderMatrices]) -> OrderMatrices:
    """Order 2k matrices from a stack ending with orders 2k-4, 2k-2."""
    if not stack:
        raise MissingPredecessor("empty stack")
    prev = stack[-1]
    k = prev.k + 1
    prev2 = None
    if k >= 2:
        if len(stack) < 2 or stack[-2].order != prev.order - 2:
            raise MissingPredecessor(f"order {2 * k - 4} needed for order {2 * k}")
        prev2 = stack[-2]
    data = {kind: _next_matrix(kind, k, prev.raw(kind),
                               None if prev2 is None else prev2.raw(kind), prev.exact)
            for kind in KINDS}
    return OrderMatrices(2 * k, data, prev.exact)


def iter_orders(k_max: int, exact: bool = True, kinds: Sequence[str] = KINDS) -> Iterator:
    """Yield (k, {kind: Matrix}) for k = 0..k_max keeping only two predecessors."""
    cur = {kind: _base(kind, exact) for kind in kinds}
    old: Optional[Dict[str, Matrix]] = None
    yield 0, cur
    for k in range(1, k_max + 1):
        new = {kind: _next_matrix(kind, k, cur[kind], None if old is None else old[kind], exact)
               for kind in kinds}
        old, cur = cur, new
        yield k, cur


_STACKS: Dict[bool, List[OrderMatrices]] = {True: [], False: []}


def expansion_stack(k_max: int, exact: bool = True) -> List[OrderMatrices]:
    """Cached list of OrderMatrices for orders 0, 2, ..., 2*k_max."""
    st = _STACKS[exact]
    if not st:
        st.append(base_case(exact))
    while len(st) <= k_max:
        st.append(next_order(st))
    return st[: k_max + 1]


@dataclass(frozen=True, eq=False)
class DerivativeMatrices:
    """Second (dA*, dB) and fourth (ddA*, ddB) x-derivative representations.

    Entries are ``Matrix`` objects (RationalMatrix in exact mode).
    """

    order: int
    dA0: Matrix
    dA1: Matrix
    dB: Matrix
    ddA0: Matrix
    ddA1: Matrix
    ddB: Matrix
    prefactors: Dict[str, int]


def derive_x_derivatives(m: OrderMatrices) -> DerivativeMatrices:
    s = m.order
    d2 = {kind: x_derivative_rows(m.raw(kind), PREFACTOR[kind], s, 2) for kind in KINDS}
    d4 = {kind: x_derivative_rows(m.raw(kind), PREFACTOR[kind], s, 4) for kind in KINDS}
    pref = {"dA0": -1, "dA1": -1, "dB": -2, "ddA0": -3, "ddA1": -3, "ddB": -4}
    return DerivativeMatrices(s, d2["A0"], d2["A1"], d2["B"], d4["A0"], d4["A1"], d4["B"], pref)


@dataclass(frozen=True, eq=False)
class LegendreBasisChange:
    """R (rows: shifted Legendre coefficients), R^{-T} and D = diag(sqrt(2n+1))."""

    order: int
    R: np.ndarray
    RinvT: np.ndarray
    D: np.ndarray

    @property
    def size(self) -> int:
        return self.R.shape[0]

    @cached_property
    def RinvT_float(self) -> np.ndarray:
        return self.RinvT.astype(float)


@lru_cache(maxsize=None)
def legendre_change_of_basis(k: int) -> LegendreBasisChange:
    size = 2 * k + 4
    P = [[Fraction(1)], [Fraction(-1), Fraction(2)]]
    for n in range(2, size):
        a = Fraction(2 * n - 1, n)
        b = Fraction(n - 1, n)
        row = [Fraction(0)] * (n + 1)
        for m, c in enumerate(P[n - 1]):
            row[m] -= a * c
            row[m + 1] += 2 * a * c
        for m, c in enumerate(P[n - 2]):
            row[m] -= b * c
        P.append(row)
    R = np.empty((size, size), dtype=object)
    R.fill(0)
    for n in range(size):
        for m, c in enumerate(P[n]):
            if c.denominator != 1:
                raise ArithmeticError("non-integer Legendre coefficient")
            R[n, m] = int(c)
    # forward substitution for the lower-triangular inverse
    Rinv = np.empty((size, size), dtype=object)
    Rinv.fill(Fraction(0))
    for j in range(size):
        for i in range(j, size):
            acc = Fraction(int(i == j))
            for m in range(j, i):
                acc -= R[i, m] * Rinv[m, j]
            Rinv[i, j] = acc / R[i, i]
    D = np.sqrt(2.0 * np.arange(size) + 1.0)
    return LegendreBasisChange(2 * k, R, Rinv.T.copy(), D)


def weighted_frobenius_sq(lbc: LegendreBasisChange, M: Matrix):
    """||D^{-1} R^{-T} M||_F^2; a Fraction for exact input."""
    if isinstance(M, RationalMatrix):
        W = RationalMatrix.from_fractions(lbc.RinvT)
        T = W.num.dot(M.num)
        total = Fraction(0)
        for n in range(T.shape[0]):
            total += Fraction(int((T[n] * T[n]).sum()), 2 * n + 1)
        return total / (W.den * M.den) ** 2
    T = lbc.RinvT_float @ np.asarray(M, dtype=float)
    sq = np.einsum("ij,ij->i", T, T)
    return float(sq @ (1.0 / (2.0 * np.arange(T.shape[0]) + 1.0)))


def to_jsonable(M: Matrix) -> list:
    """Matrix as nested lists; rationals serialized "p/q"."""
    if isinstance(M, RationalMatrix):
        out = []
        for row in M.fractions():
            out.append([str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
                        for v in row])
        return out
    return [[float(v) for v in row] for row in np.asarray(M)]
