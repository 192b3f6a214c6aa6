"""Flux recursion and evaluation of the truncated expansion fields.

A field is a ``FieldRep``: a sum of terms ``weight * h**p * sum_n (y/h)**n
(M[n, :] . Phi_m(x))``.  Derivatives act on the term matrices via the
integer operators, so all y-dependence stays in closed form.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import PointOutsideDomain, ValidityWarning
from .geometry import GeometryMoments, ShapeSpec, basis_values, moments as geometry_moments, \
    t_values
from .basis import get_basis
from .matrices import OrderMatrices, expansion_stack, x_derivative_rows

FIELDS = ("psi", "u", "v", "omega", "p")


@dataclass(frozen=True)
class BoundaryData:
    V0: float = -0.5
    V1: float = 1.0


@dataclass(frozen=True)
class FluxExpansion:
    Q: Tuple[float, ...]
    a: Tuple[float, ...]
    b: Tuple[float, ...]

    def approx(self, eps: float, k: int) -> float:
        return math.fsum(eps ** (2 * l) * self.Q[l] for l in range(k + 1))


def flux_terms(mom: GeometryMoments, stack: Sequence[OrderMatrices], boundary: BoundaryData,
               k_max: int) -> FluxExpansion:
    """a^(2k), b^(2k) from row 3 of the matrices and the E moments; Q by recursion."""
    a, b, Q = [], [], []
    r = mom.I2 / mom.I3
    for k in range(k_max + 1):
        m = stack[k]
        row_a = boundary.V0 * m.float("A0")[3] + boundary.V1 * m.float("A1")[3]
        a.append(0.5 * float(row_a @ mom.E[2 * k][2]))
        b.append(0.5 * float(m.float("B")[3] @ mom.E[2 * k][3]))
        Q.append(r * a[k] + math.fsum(Q[l] * b[k - l] for l in range(k)))
    return FluxExpansion(tuple(Q), tuple(a), tuple(b))


@dataclass(frozen=True, eq=False)
class Term:
    p: int             # exponent of the h prefactor
    m: int             # superdegree of the basis
    M: np.ndarray      # (rows n, d_m), float
    weight: float = 1.0


@dataclass(frozen=True, eq=False)
class FieldRep:
    terms: Tuple[Term, ...]
    order: int = 0

    def __add__(self, other: "FieldRep") -> "FieldRep":
        return FieldRep(self.terms + other.terms, self.order)

    def scaled(self, c: float) -> "FieldRep":
        return FieldRep(tuple(Term(t.p, t.m, t.M, t.weight * c) for t in self.terms), self.order)

    def __neg__(self):
        return self.scaled(-1.0)


ZERO = FieldRep(())


def build_field_rep(stack: Sequence[OrderMatrices], fluxes: FluxExpansion,
                    boundary: BoundaryData, k: int) -> FieldRep:
    """psi^(2k) = Y^T (V0 A0 + V1 A1) h Phi_2k + sum_l Q^(2l) Y^T B^(2k-2l) Phi_(2k-2l)."""
    m = stack[k]
    alpha = boundary.V0 * m.float("A0") + boundary.V1 * m.float("A1")
    terms = [Term(1, 2 * k, alpha)]
    for l in range(k + 1):
        terms.append(Term(0, 2 * (k - l), stack[k - l].float("B"), fluxes.Q[l]))
    return FieldRep(tuple(terms), 2 * k)


def differentiate(rep: FieldRep, axis: str) -> FieldRep:
    """d/dx: (n, p, g) -> (n, p-1, (h d/dx - (n-p) h_x) g); d/dy: (n, p) -> (n-1, p-1) times n."""
    out = []
    for t in rep.terms:
        if axis == "x":
            out.append(Term(t.p - 1, t.m + 1, x_derivative_rows(t.M, t.p, t.m, 1), t.weight))
        elif axis == "y":
            n = np.arange(1, t.M.shape[0])
            if n.size == 0:
                continue
            out.append(Term(t.p - 1, t.m, t.M[1:] * n[:, None], t.weight))
        else:
            raise ValueError("axis must be 'x' or 'y'")
    return FieldRep(tuple(out), rep.order)


def derivative(rep: FieldRep, spec: str) -> FieldRep:
    """Repeated derivative, e.g. spec 'xxy'."""
    for ax in spec:
        rep = differentiate(rep, ax)
    return rep


def antiderivative_y(rep: FieldRep) -> FieldRep:
    """Integral from 0 to y: (n, p) -> (n+1, p+1) divided by n+1."""
    out = []
    for t in rep.terms:
        R, d = t.M.shape
        M = np.zeros((R + 1, d))
        M[1:] = t.M / np.arange(1, R + 1)[:, None]
        out.append(Term(t.p + 1, t.m, M, t.weight))
    return FieldRep(tuple(out), rep.order)


class Evaluator:
    """Caches h(x) and Phi_m(x) at a fixed set of x samples."""

    def __init__(self, shape: ShapeSpec, x):
        self.shape = shape
        self.x = np.atleast_1d(np.asarray(x, dtype=float))
        self._D = shape.derivs(self.x, 0)
        self._T = None
        self._phi: Dict[int, np.ndarray] = {}

    @property
    def h(self) -> np.ndarray:
        return self._D[0]

    def phi(self, m: int) -> np.ndarray:
        if m not in self._phi:
            if self._T is None or self._T.shape[0] <= m:
                self._T = t_values(self.shape.derivs(self.x, max(m, 8 if self._T is None else 2 * m)))
            self._phi[m] = basis_values(self._T, get_basis(m))
        return self._phi[m]

    def _coeffs(self, rep: FieldRep, nmax: int) -> np.ndarray:
        """C[i, n] with value = sum_n C[i, n] (y/h)^n at sample i."""
        C = np.zeros((self.x.size, nmax))
        h = self.h
        for t in rep.terms:
            if t.weight == 0:
                continue
            G = self.phi(t.m) @ t.M.T
            C[:, : G.shape[1]] += (t.weight * h ** t.p)[:, None] * G
        return C

    def _nmax(self, rep: FieldRep) -> int:
        return max([t.M.shape[0] for t in rep.terms], default=1)

    def grid(self, rep: FieldRep, eta) -> np.ndarray:
        """Values on the tensor grid (x_i, y = eta_j h(x_i)); shape (Nx, Ny)."""
        eta = np.asarray(eta, dtype=float)
        nmax = self._nmax(rep)
        C = self._coeffs(rep, nmax)
        V = eta[None, :] ** np.arange(nmax)[:, None]
        return C @ V

    def points(self, rep: FieldRep, eta) -> np.ndarray:
        """Values at (x_i, eta_i h(x_i)) for matching arrays."""
        eta = np.asarray(eta, dtype=float)
        nmax = self._nmax(rep)
        C = self._coeffs(rep, nmax)
        V = eta[:, None] ** np.arange(nmax)[None, :]
        return np.sum(C * V, axis=1)


@dataclass(eq=False)
class EvalContext:
    """Everything needed to evaluate the expansion for one shape and eps."""

    shape: ShapeSpec
    k_max: int
    eps: float = 0.1
    boundary: BoundaryData = field(default_factory=BoundaryData)
    N: int = 1024
    mom: Optional[GeometryMoments] = None
    exact_matrices: bool = True

    def __post_init__(self):
        if self.mom is None:
            self.mom = geometry_moments(self.shape, self.k_max, self.N)
        self.stack = expansion_stack(self.k_max, exact=self.exact_matrices)
        self.fluxes = flux_terms(self.mom, self.stack, self.boundary, self.k_max)
        self._reps: Dict[tuple, FieldRep] = {}
        self.check_validity()

    def check_validity(self) -> bool:
        r0 = self.mom.r[0]
        ok = self.eps <= r0 / 3
        if not ok:
            warnings.warn(f"eps={self.eps} exceeds r_0/3={r0 / 3:.4g}; "
                          "error bounds do not apply", ValidityWarning, stacklevel=3)
        return ok

    def psi(self, k: int) -> FieldRep:
        if k < 0:
            return ZERO
        key = (k, "")
        if key not in self._reps:
            self._reps[key] = build_field_rep(self.stack, self.fluxes, self.boundary, k)
        return self._reps[key]

    def d(self, k: int, spec: str) -> FieldRep:
        """Derivative ``spec`` (like 'xxy') of psi^(2k); zero for k < 0."""
        if k < 0:
            return ZERO
        spec = "".join(sorted(spec))  # derivatives commute; x's first
        key = (k, spec)
        if key not in self._reps:
            self._reps[key] = derivative(self.psi(k), spec)
        return self._reps[key]

    # per-order field representations
    def u(self, k):
        return self.d(k, "y")

    def v(self, k):
        return -self.d(k, "x")

    def omega(self, k):
        return -(self.d(k - 1, "xx") + self.d(k, "yy"))

    def px(self, k):
        return self.d(k - 1, "xxy") + self.d(k, "yyy")

    def py(self, k):
        return -(self.d(k - 2, "xxx") + self.d(k - 1, "xyy"))

    def rep(self, name: str, k: int) -> FieldRep:
        if name == "psi":
            return self.psi(k)
        return getattr(self, name)(k)

    def pressure_grid(self, k: int, x, eta, n_gauss: int = 20) -> np.ndarray:
        """p^(2k) on the tensor grid: x-line integral at y=0 plus analytic y-integral."""
        x = np.asarray(x, dtype=float)
        line = pressure_line(self, k, x, n_gauss)
        up = antiderivative_y(self.py(k))
        return line[:, None] + Evaluator(self.shape, x).grid(up, eta)


def pressure_line(ctx: EvalContext, k: int, x, n_gauss: int = 20) -> np.ndarray:
    """int_0^x p_x^(2k)(s, 0) ds with an n_gauss-point Gauss rule per interval."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x)
    xs = x[order]
    edges = np.concatenate([[0.0], xs])
    g, w = np.polynomial.legendre.leggauss(n_gauss)
    lo, hi = edges[:-1], edges[1:]
    nodes = (0.5 * (hi - lo)[:, None] * (g[None, :] + 1) + lo[:, None]).ravel()
    ev = Evaluator(ctx.shape, nodes)
    f = ev.points(ctx.px(k), np.zeros(nodes.size)).reshape(lo.size, n_gauss)
    seg = 0.5 * (hi - lo) * (f @ w)
    out = np.empty_like(x)
    out[order] = np.cumsum(seg)
    return out


@dataclass(eq=False)
class FieldGrid:
    x: np.ndarray
    eta: np.ndarray
    y: np.ndarray
    eps: float
    order: int
    per_order: Dict[str, List[np.ndarray]]
    approx: Dict[str, np.ndarray]


def truncated_fields(ctx: EvalContext, k: int, x, eta, fields: Sequence[str] = FIELDS,
                     eps: Optional[float] = None) -> FieldGrid:
    """Per-order fields and eps-weighted truncated sums on the tensor grid."""
    eps = ctx.eps if eps is None else eps
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < -1e-14) or np.any(eta > 1 + 1e-14):
        raise PointOutsideDomain("eta levels must lie in [0, 1]")
    ev = Evaluator(ctx.shape, x)
    per: Dict[str, List[np.ndarray]] = {}
    approx: Dict[str, np.ndarray] = {}
    for name in fields:
        vals = []
        for l in range(k + 1):
            if name == "p":
                vals.append(ctx.pressure_grid(l, x, eta))
            else:
                vals.append(ev.grid(ctx.rep(name, l), eta))
        per[name] = vals
        approx[name] = sum(eps ** (2 * l) * vals[l] for l in range(k + 1))
    y = ev.h[:, None] * eta[None, :]
    return FieldGrid(x, eta, y, eps, 2 * k, per, approx)


def eval_points(ctx: EvalContext, rep: FieldRep, x, y) -> np.ndarray:
    """Evaluate a FieldRep at scattered points (x_i, y_i) with 0 <= y_i <= h(x_i)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ev = Evaluator(ctx.shape, x)
    h = ev.h
    if np.any(y < -1e-12) or np.any(y > h * (1 + 1e-12)):
        raise PointOutsideDomain("points must satisfy 0 <= y <= h(x)")
    return ev.points(rep, y / h)


def approx_rep(ctx: EvalContext, name: str, k: int, eps: Optional[float] = None) -> FieldRep:
    """eps-weighted sum of the per-order representations (not for pressure)."""
    eps = ctx.eps if eps is None else eps
    out = ZERO
    for l in range(k + 1):
        out = out + ctx.rep(name, l).scaled(eps ** (2 * l))
    return out
