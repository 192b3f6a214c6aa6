"""Shape functions h(x) (trigonometric polynomials) and their moments."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .basis import Basis, get_basis
from .errors import (ExceedsUnitHeight, NonPositiveShape, OutOfStatedRange, ParseError,
                     QuadratureUnderResolved)

N_SUP = 8192  # samples for positivity checks and sup norms
_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ShapeSpec:
    """h(x) = c0 + sum_j a_j cos(2 pi j x) + b_j sin(2 pi j x) on the unit period."""

    kind: str
    c0: float
    cos: Tuple[Tuple[int, float], ...] = ()
    sin: Tuple[Tuple[int, float], ...] = ()
    param: Optional[float] = None  # c for const, a for the sine family
    text: str = ""

    @property
    def is_constant(self) -> bool:
        return all(v == 0 for _, v in self.cos) and all(v == 0 for _, v in self.sin)

    def derivs(self, x, max_order: int) -> np.ndarray:
        """Array of shape (max_order+1, len(x)) with h, h', ..., d^max_order h."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros((max_order + 1, x.size))
        out[0] += self.c0
        for j, a in self.cos:
            w = _TWO_PI * j
            for l in range(max_order + 1):
                out[l] += a * w ** l * np.cos(w * x + l * math.pi / 2)
        for j, b in self.sin:
            w = _TWO_PI * j
            for l in range(max_order + 1):
                out[l] += b * w ** l * np.sin(w * x + l * math.pi / 2)
        return out

    def __call__(self, x) -> np.ndarray:
        return self.derivs(x, 0)[0]


def eval_h_derivs(shape: ShapeSpec, x, max_order: int) -> np.ndarray:
    """(h, h', ..., d^max_order h) at the points x; rows indexed by order."""
    if max_order < 0:
        raise ValueError("max_order must be nonnegative")
    return shape.derivs(x, max_order)


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def _num(s: str, what: str) -> float:
    if not re.fullmatch(_NUM, s.strip()):
        raise ParseError(f"bad number for {what}: {s!r}")
    return float(s)


def parse_shape(spec: str) -> ShapeSpec:
    """Parse ``const:c=<v>``, ``sine:a=<v>`` or ``fourier:c0=<v>;a1=..;b2=..``."""
    if not isinstance(spec, str) or ":" not in spec:
        raise ParseError(f"shape spec must look like kind:params, got {spec!r}")
    kind, _, rest = spec.strip().partition(":")
    kind = kind.strip().lower()
    items = [t for t in rest.split(";") if t.strip()]
    kv: Dict[str, str] = {}
    for t in items:
        if "=" not in t:
            raise ParseError(f"expected key=value in {t!r}")
        k, _, v = t.partition("=")
        k = k.strip()
        if k in kv:
            raise ParseError(f"duplicate key {k!r}")
        kv[k] = v
    if kind == "const":
        if set(kv) != {"c"}:
            raise ParseError("const shape takes exactly c=<v>")
        c = _num(kv["c"], "c")
        shape = ShapeSpec("constant", c, param=c, text=spec)
    elif kind == "sine":
        if set(kv) != {"a"}:
            raise ParseError("sine shape takes exactly a=<v>")
        a = _num(kv["a"], "a")
        shape = ShapeSpec("sine", (1 + a) / 2, sin=((1, (1 - a) / 2),), param=a, text=spec)
    elif kind == "fourier":
        if "c0" not in kv:
            raise ParseError("fourier shape needs c0")
        c0 = _num(kv.pop("c0"), "c0")
        cos, sin = {}, {}
        for k, v in kv.items():
            m = re.fullmatch(r"([ab])(\d+)", k)
            if not m or int(m.group(2)) < 1:
                raise ParseError(f"bad fourier key {k!r}")
            (cos if m.group(1) == "a" else sin)[int(m.group(2))] = _num(v, k)
        shape = ShapeSpec("fourier", c0, tuple(sorted(cos.items())), tuple(sorted(sin.items())),
                          text=spec)
    else:
        raise ParseError(f"unknown shape kind {kind!r}")
    check_shape(shape)
    return shape


def check_shape(shape: ShapeSpec, n: int = N_SUP) -> None:
    h = shape(np.arange(n) / n)
    if not np.all(np.isfinite(h)) or h.min() <= 0:
        raise NonPositiveShape(f"h must be positive; sampled min {h.min():.6g}")
    if h.max() > 1 + 1e-12:
        raise ExceedsUnitHeight(f"h must not exceed 1; sampled max {h.max():.6g}")


def t_values(D: np.ndarray) -> np.ndarray:
    """t_j = h^(j-1) d^j h / j! for j = 0..J from a derivative array; t_0 = 1."""
    J = D.shape[0] - 1
    T = np.ones_like(D)
    for j in range(1, J + 1):
        T[j] = D[0] ** (j - 1) * D[j] / math.factorial(j)
    return T


def basis_values(T: np.ndarray, basis: Basis) -> np.ndarray:
    """Phi_m at sample points from the t-array; returns (npts, d_m)."""
    E = basis.exponents
    npts = T.shape[1]
    out = np.ones((npts, E.shape[0]))
    for j in range(1, basis.k + 1):
        col = E[:, j]
        if not col.any():
            continue
        powers = np.unique(col[col > 0])
        tj = T[j]
        for pw in powers:
            sel = col == pw
            out[:, sel] *= (tj ** int(pw))[:, None]
    return out


def eval_basis(shape: ShapeSpec, x, m: int) -> np.ndarray:
    """Phi_m(x) as an array (len(x), d_m)."""
    D = shape.derivs(x, m)
    return basis_values(t_values(D), get_basis(m))


@dataclass(frozen=True, eq=False)
class GeometryMoments:
    shape: ShapeSpec
    I: Dict[int, float]
    h0: float
    r: Tuple[float, ...]
    E: Dict[int, Dict[int, np.ndarray]]  # order 2k -> m -> vector
    Et: Dict[int, Dict[int, np.ndarray]]
    N: int

    @property
    def I1(self):
        return self.I[1]

    @property
    def I2(self):
        return self.I[2]

    @property
    def I3(self):
        return self.I[3]

    def r_k(self, k: int) -> float:
        return self.r[k]


def sup_r(shape: ShapeSpec, k: int, n_samples: int = N_SUP) -> float:
    """r_k by dense sampling; +inf for a constant shape."""
    if shape.is_constant:
        return math.inf
    x = np.arange(n_samples) / n_samples
    T = t_values(shape.derivs(x, 2 * k + 2))
    m = max(np.max(np.abs(T[l])) ** (1.0 / l) for l in range(1, 2 * k + 3))
    return math.inf if m == 0 else 1.0 / m


def _inverse_moments(shape: ShapeSpec, N: int) -> Dict[int, float]:
    h = shape(np.arange(N) / N)
    return {m: float(np.mean(h ** (-m))) for m in (1, 2, 3)}


def moments(shape: ShapeSpec, k_max: int, N: int = 1024, n_samples: int = N_SUP) -> GeometryMoments:
    """I_m, E, E-tilde by the N-point periodic trapezoid rule; r_k and h0 by sampling."""
    if N < 64 or N % 2:
        raise ValueError("N must be even and at least 64")
    I = _inverse_moments(shape, N)
    I_2N = _inverse_moments(shape, 2 * N)
    if abs(I_2N[3] - I[3]) > 1e-10 * abs(I_2N[3]):
        raise QuadratureUnderResolved(f"I3 changes by {abs(I_2N[3] - I[3]) / I_2N[3]:.2e} "
                                      f"from N={N} to {2 * N}")
    x = np.arange(N) / N
    D = shape.derivs(x, 2 * k_max)
    T = t_values(D)
    h = D[0]
    E, Et = {}, {}
    for k in range(k_max + 1):
        P = basis_values(T, get_basis(2 * k))
        E[2 * k] = {m: (h ** (-m)) @ P / N / I[m] for m in (2, 3)}
        Et[2 * k] = {m: (h ** (-m)) @ (P * P) / N / I[m] for m in (1, 3)}
    xs = np.arange(n_samples) / n_samples
    h0 = float(shape(xs).min())
    r = tuple(sup_r(shape, k, n_samples) for k in range(k_max + 1))
    return GeometryMoments(shape, I, h0, r, E, Et, N)


def sine_family_r0(a: float) -> float:
    """Closed form r_0 = 1/(pi sqrt(1-a)) for the sine family, 0 < a <= 2/3."""
    if not (0 < a <= 2.0 / 3.0):
        raise OutOfStatedRange(f"closed form holds for 0 < a <= 2/3, got a={a}")
    return 1.0 / (math.pi * math.sqrt(1.0 - a))


def sine_family_closed_forms(a: float) -> Dict[str, float]:
    """Contour-integral closed forms of I_1, I_2, I_3 for h = A + B sin(2 pi x)."""
    A, B = (1 + a) / 2, (1 - a) / 2
    s = A * A - B * B
    return {
        "I1": s ** -0.5,
        "I2": A * s ** -1.5,
        "I3": (2 * A * A + B * B) / 2 * s ** -2.5,
        "sqrt_I3_over_I1": 0.5 * math.sqrt(1.5 + 1 / a + 1.5 / a ** 2),
    }
