"""Canonical bases of the graded algebra H_k and the operators h*d/dx, h_x*.

A basis element of superdegree k is stored as an integer tuple
``(i_0, i_1, ..., i_k)`` standing for the monomial

    h**i_0 * prod_{r>=1} (d^r h / r!)**i_r  =  prod_{j>=1} t_j**i_j,

with ``t_j = h**(j-1) d^j h / j!``.  The invariants are
``sum_j j*i_j = k`` and ``i_0 = sum_j (j-1)*i_j``.  Columns of a basis are
sorted lexicographically comparing the last slot first, so that the pure
``h_x**k`` element comes first.
"""
from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import NotInBasis

def worker_count() -> int:
    """Worker cap from LUBREX_THREADS (default: CPU count, at most 8)."""
    v = os.environ.get("LUBREX_THREADS")
    if v:
        try:
            return max(1, int(v))
        except ValueError:
            pass
    return max(1, min(8, os.cpu_count() or 1))


_KEY_LIMIT = 254  # slot values are stored as uint8 keys (value + 1)


_HASH_W = np.random.default_rng(20240601).integers(1, 2 ** 63, size=_KEY_LIMIT + 2,
                                                   dtype=np.int64).astype(np.uint64)


def _hash(exps: np.ndarray) -> np.ndarray:
    """64-bit multiplicative hash of each row (wrapping arithmetic)."""
    E = np.asarray(exps).astype(np.uint64)
    return E @ _HASH_W[: E.shape[1]]


def _keys(exps: np.ndarray) -> np.ndarray:
    """Byte keys whose natural order is the last-slot-first lexicographic order."""
    width = exps.shape[1]
    raw = np.ascontiguousarray(exps[:, ::-1] + 1, dtype=np.uint8)
    return raw.view(f"S{width}").reshape(-1)


@dataclass(frozen=True, eq=False)
class Basis:
    """Sorted basis Phi_k of H_k."""

    k: int
    exponents: np.ndarray  # (d_k, k+1) int16, sorted
    keys: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.exponents.shape[0]

    def __len__(self) -> int:
        return self.dimension

    @property
    def columns(self) -> list:
        return [tuple(int(v) for v in row) for row in self.exponents]

    @cached_property
    def hashes(self) -> np.ndarray:
        return _hash(self.exponents)

    @cached_property
    def _hash_index(self):
        """(sorted hashes, permutation) or None if two tuples share a hash."""
        hv = self.hashes
        perm = np.argsort(hv, kind="stable")
        hs = hv[perm]
        if hs.size > 1 and np.any(hs[1:] == hs[:-1]):
            return None
        return hs, perm

    def positions_of_hashes(self, hq: np.ndarray) -> Optional[np.ndarray]:
        """Column indices for hashes of tuples known to lie in the basis.

        Returns None when the hash index is unavailable (collision) so the
        caller can fall back to ``lookup``; raises if a hash is absent.
        """
        index = self._hash_index
        if index is None:
            return None
        hs, perm = index
        pos = np.minimum(np.searchsorted(hs, hq), self.dimension - 1)
        if not np.array_equal(hs[pos], hq):
            raise RuntimeError(f"operator image left the basis Phi_{self.k}")
        return perm[pos]

    def lookup(self, exps: np.ndarray) -> np.ndarray:
        """0-based column indices of the rows of ``exps``; -1 where absent."""
        exps = np.asarray(exps)
        if exps.ndim != 2 or exps.shape[1] != self.k + 1:
            raise ValueError("tuples must have k+1 slots")
        if exps.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        if exps.min() < 0 or exps.max() > _KEY_LIMIT:
            out = np.full(exps.shape[0], -1, dtype=np.int64)
            ok = (exps.min(axis=1) >= 0) & (exps.max(axis=1) <= _KEY_LIMIT)
            out[ok] = self.lookup(exps[ok])
            return out
        index = self._hash_index
        if index is not None:
            hs, perm = index
            pos = np.minimum(np.searchsorted(hs, _hash(exps)), self.dimension - 1)
            cand = perm[pos]
            hit = np.all(self.exponents[cand] == exps, axis=1)
            return np.where(hit, cand, -1).astype(np.int64)
        q = _keys(exps)
        pos = np.searchsorted(self.keys, q)
        pos_c = np.minimum(pos, self.dimension - 1)
        hit = self.keys[pos_c] == q
        return np.where(hit, pos_c, -1).astype(np.int64)

    def index(self, elem: Sequence[int]) -> int:
        """1-based column index of ``elem`` (binary search)."""
        elem = tuple(int(v) for v in elem)
        if not is_valid_element(elem, self.k):
            raise NotInBasis(f"{elem} is not a superdegree-{self.k} basis tuple")
        j = int(self.lookup(np.array([elem]))[0])
        if j < 0:
            raise NotInBasis(f"{elem} not found in Phi_{self.k}")
        return j + 1


def is_valid_element(elem: Sequence[int], k: int) -> bool:
    if len(elem) != k + 1 or any(v < 0 for v in elem):
        return False
    if sum(j * v for j, v in enumerate(elem)) != k:
        return False
    return elem[0] == sum((j - 1) * v for j, v in enumerate(elem) if j >= 1)


def _make_basis(k: int, exps: np.ndarray) -> Basis:
    keys = _keys(exps)
    order = np.argsort(keys, kind="stable")
    exps = exps[order]
    keys = keys[order]
    if exps.shape[0] > 1 and np.any(keys[1:] == keys[:-1]):
        raise RuntimeError(f"duplicate tuples while building Phi_{k}")
    exps.setflags(write=False)
    keys.setflags(write=False)
    return Basis(k=k, exponents=exps, keys=keys)


@lru_cache(maxsize=4)
def _generate(k_max: int) -> tuple:
    if k_max > _KEY_LIMIT:
        raise ValueError(f"k_max > {_KEY_LIMIT} not supported")
    # Start with Phi_k = {t_1^k}; then for j = 2..k_max adjoin t_j * Phi_{k-j}.
    pieces = []
    for k in range(k_max + 1):
        e = np.zeros((1, k + 1), dtype=np.int16)
        if k >= 1:
            e[0, 1] = k
        pieces.append([e])
    merged: dict = {}

    def current(m: int) -> np.ndarray:
        if len(pieces[m]) > 1:
            pieces[m] = [np.concatenate(pieces[m], axis=0)]
        return pieces[m][0]

    for j in range(2, k_max + 1):
        for k in range(j, k_max + 1):
            src = current(k - j)
            new = np.zeros((src.shape[0], k + 1), dtype=np.int16)
            new[:, : k - j + 1] = src
            new[:, j] += 1
            new[:, 0] += j - 1
            pieces[k].append(new)
    for k in range(k_max + 1):
        merged[k] = _make_basis(k, current(k))
    return tuple(merged[k] for k in range(k_max + 1))


def generate_bases(k_max: int) -> list:
    """Bases Phi_0 .. Phi_{k_max} (Algorithm 3.1 set-union loop)."""
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    return list(_generate(int(k_max)))


_BASES: list = []
_BASIS_LOCK = threading.Lock()


def get_basis(k: int) -> Basis:
    """Cached access to Phi_k (thread-safe)."""
    global _BASES
    if k >= len(_BASES):
        with _BASIS_LOCK:
            if k >= len(_BASES):
                _BASES = generate_bases(max(k + 2, 8, len(_BASES) + 8))
    return _BASES[k]


def partition_count(k: int) -> int:
    """d_k via the counting form of Algorithm 3.1 (d_k += d_{k-j})."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    d = [1] * (k + 1)
    for j in range(2, k + 1):
        for m in range(j, k + 1):
            d[m] += d[m - j]
    return d[k]


def partition_count_pentagonal(k: int) -> int:
    """Euler pentagonal-number recurrence, used as an independent oracle."""
    p = [1] + [0] * k
    for n in range(1, k + 1):
        total = 0
        m = 1
        while True:
            g1 = m * (3 * m - 1) // 2
            if g1 > n:
                break
            sign = 1 if m % 2 else -1
            total += sign * p[n - g1]
            g2 = m * (3 * m + 1) // 2
            if g2 <= n:
                total += sign * p[n - g2]
            m += 1
        p[n] = total
    return p[k]


# ---------------------------------------------------------------- operators

@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Linear map H_k -> H_{k+1} in the bases Phi_k, Phi_{k+1}.

    ``matrix`` is a CSR matrix of shape (d_{k+1}, d_k).  Integer kinds
    carry int64 entries; a shifted operator with non-integer ``c`` is
    stored in float64 and keeps ``c`` for exact application.
    """

    kind: str
    k: int
    matrix: sp.csr_matrix
    c: Optional[Fraction] = None

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Apply to each row of ``X`` (shape (r, d_k)); returns (r, d_{k+1}).

        Object arrays (Python ints / Fractions) are handled exactly.
        """
        X = np.asarray(X)
        if X.dtype != object:
            return np.asarray((self.matrix @ X.T).T)
        if self.c is not None and self.c.denominator != 1:
            hd = build_operator("h_dx", self.k)
            hx = build_operator("hx_mult", self.k)
            return hd.apply(X) - hx.apply(X) * self.c
        return _object_spmv(self.matrix, X)


def _object_spmv(A: sp.csr_matrix, X: np.ndarray) -> np.ndarray:
    """Rows of X times A^T with Python-object arithmetic (exact)."""
    nrow = A.shape[0]
    out = np.zeros((X.shape[0], nrow), dtype=object)
    out[...] = 0
    if A.nnz == 0 or X.shape[0] == 0:
        return out
    data = np.array([int(v) for v in A.data], dtype=object)
    contrib = X.T[A.indices] * data[:, None]
    counts = np.diff(A.indptr)
    nonempty = np.nonzero(counts)[0]
    sums = np.add.reduceat(contrib, A.indptr[nonempty], axis=0)
    out[:, nonempty] = sums.T
    return out


_OP_CACHE: dict = {}
_OP_LOCK = threading.Lock()


def _raw_operator(kind: str, k: int) -> sp.csr_matrix:
    key = (kind, k)
    M = _OP_CACHE.get(key)
    if M is None:
        with _OP_LOCK:
            M = _OP_CACHE.get(key)
            if M is None:
                M = _OP_CACHE[key] = _build_raw_operator(kind, k)
    return M


def _build_raw_operator(kind: str, k: int) -> sp.csr_matrix:
    src = get_basis(k)
    tgt = get_basis(k + 1)
    E = src.exponents
    d = E.shape[0]
    rows, cols, vals = [], [], []
    # The row hash is linear, so an image tuple's hash is the source hash plus
    # a fixed offset; images are valid tuples of Phi_{k+1} by construction.
    H = src.hashes
    W = _HASH_W

    def locate(sel, offset, make_tuples):
        pos = tgt.positions_of_hashes(H[sel] + offset)
        if pos is None:
            pos = tgt.lookup(make_tuples())
        return pos

    if kind == "hx_mult":
        def tuples():
            T = np.zeros((d, k + 2), dtype=np.int64)
            T[:, : k + 1] = E
            T[:, 1] += 1
            return T
        sel = np.arange(d)
        rows.append(locate(sel, W[1], tuples))
        cols.append(sel)
        vals.append(np.ones(d, dtype=np.int64))
    elif kind == "h_dx":
        for r in range(k + 1):
            sel = np.nonzero(E[:, r] > 0)[0]
            if sel.size == 0:
                continue

            def tuples(sel=sel, r=r):
                T = np.zeros((sel.size, k + 2), dtype=np.int64)
                T[:, : k + 1] = E[sel]
                T[:, 0] += 1
                T[:, r] -= 1
                T[:, r + 1] += 1
                return T
            with np.errstate(over="ignore"):
                offset = W[0] - W[r] + W[r + 1]
            rows.append(locate(sel, offset, tuples))
            cols.append(sel)
            vals.append(E[sel, r].astype(np.int64) * (r + 1))
    else:
        raise ValueError(f"unknown operator kind {kind!r}")
    if rows:
        r_ = np.concatenate(rows)
        c_ = np.concatenate(cols)
        v_ = np.concatenate(vals)
    else:
        r_ = c_ = v_ = np.zeros(0, dtype=np.int64)
    if np.any(r_ < 0):
        raise RuntimeError("operator image left the target basis")
    M = sp.csr_matrix((v_, (r_, c_)), shape=(tgt.dimension, d), dtype=np.int64)
    M.sum_duplicates()
    M.sort_indices()
    return M


def _shift_operator(k: int) -> sp.csr_matrix:
    """[h_dx, -hx_mult] in float64: L_c x = [h_dx, -hx_mult] @ [x; c x]."""
    key = ("shift", k)
    M = _OP_CACHE.get(key)
    if M is None:
        A, B = _raw_operator("h_dx", k), _raw_operator("hx_mult", k)
        M = sp.hstack([A, -B], format="csr").astype(np.float64)
        with _OP_LOCK:
            _OP_CACHE[key] = M
    return M


def build_operator(kind: str, k: int, c=None) -> SparseOperator:
    """Operator H_k -> H_{k+1}: ``h_dx``, ``hx_mult`` or ``shifted``.

    ``shifted`` is h*d/dx - c*h_x.
    """
    if kind in ("h_dx", "hx_mult"):
        return SparseOperator(kind=kind, k=k, matrix=_raw_operator(kind, k))
    if kind != "shifted":
        raise ValueError(f"unknown operator kind {kind!r}")
    if c is None:
        raise ValueError("shifted operator needs c")
    c = Fraction(c)
    hd = _raw_operator("h_dx", k)
    hx = _raw_operator("hx_mult", k)
    if c.denominator == 1:
        M = (hd - int(c) * hx).tocsr()
    else:
        M = (hd.astype(np.float64) - float(c) * hx.astype(np.float64)).tocsr()
    M.sort_indices()
    return SparseOperator(kind="shifted", k=k, matrix=M, c=c)


def shift_rows(k: int, X: np.ndarray, shifts: Iterable) -> np.ndarray:
    """Apply L_c = h*d/dx - c*h_x (H_k -> H_{k+1}) to row i of X with c = shifts[i].

    Works for float arrays and for object arrays of Python integers
    (the shifts must then be integers).
    """
    shifts = np.asarray(list(shifts))
    hd = _raw_operator("h_dx", k)
    hx = _raw_operator("hx_mult", k)
    if X.dtype == object:
        s = np.array([int(v) for v in shifts], dtype=object)
        return _object_spmv(hd, X) - _object_spmv(hx, X) * s[:, None]
    d = hd.shape[1]
    Z = np.empty((2 * d, X.shape[0]))
    Z[:d] = X.T
    np.multiply(X.T, shifts[None, :].astype(float), out=Z[d:])
    return np.asarray(_shift_operator(k) @ Z).T
