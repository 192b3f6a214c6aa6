"""A priori truncation-error bounds and the slip-boundary mismatch gamma_k."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np

from .constants import UniversalTables
from .errors import BinomialDivergence, BoundViolation, ValidityWarning
from .fields import BoundaryData
from .geometry import GeometryMoments, ShapeSpec
from .matrices import binom_half


@dataclass(frozen=True)
class ErrorBudget:
    k: int
    eps: float
    star: float
    bound_psi: float
    bound_Q: float
    bound_uv: float
    bound_omega: float
    bound_p: float
    pressure_factor: float
    beta_lbb_inverse_bound: float
    validity: bool
    r_k: float
    r_0: float
    I1: float
    I3: float
    rho_k: float
    theta_k: float
    h0: float
    V0: float
    V1: float

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def lbb_factor(h0: float) -> float:
    return max(9.0 * h0 ** -0.5, 2.25 * h0 ** -1.5)


def star_bound(mom: GeometryMoments, tables: UniversalTables, boundary: BoundaryData,
               k: int, eps: float, warn: bool = True) -> ErrorBudget:
    """The master bound (*) and the per-field bounds derived from it."""
    uc = tables.universal
    rho, theta = uc.rho[k], uc.theta[k]
    r_k, r_0 = float(mom.r[k]), float(mom.r[0])
    valid = eps <= r_0 / 3
    if not valid and warn:
        warnings.warn(f"eps={eps} exceeds r_0/3={r_0 / 3:.4g}; the bound is not guaranteed",
                      ValidityWarning, stacklevel=2)
    if math.isinf(r_k):
        star = 0.0
        pf = 0.0
        lbb = lbb_factor(mom.h0)
    else:
        star = (math.sqrt(mom.I1) * (abs(boundary.V0) + abs(boundary.V1))
                * (1.0 + theta * (eps / r_k) * math.sqrt(mom.I3 / mom.I1))
                * (eps / (rho * r_k)) ** (2 * k + 2))
        pf = lbb_factor(mom.h0) * (r_k + 1.0 / r_k) ** 2
        lbb = lbb_factor(mom.h0) * (1.0 + r_0 ** -2)
    return ErrorBudget(k=k, eps=eps, star=star, bound_psi=star, bound_Q=star / math.sqrt(3.0),
                       bound_uv=star, bound_omega=star, bound_p=pf * star, pressure_factor=pf,
                       beta_lbb_inverse_bound=lbb, validity=valid, r_k=r_k, r_0=r_0,
                       I1=mom.I1, I3=mom.I3, rho_k=rho, theta_k=theta, h0=mom.h0,
                       V0=boundary.V0, V1=boundary.V1)


def theta_combination(theta_k: float, r_k: float, I1: float, I3: float) -> float:
    """theta_k / r_k * sqrt(I3/I1), the size of the boundary contribution in (*)."""
    return theta_k / r_k * math.sqrt(I3 / I1)


@dataclass(frozen=True, eq=False)
class BoundaryResidual:
    x: np.ndarray
    gamma: np.ndarray
    gamma_x: np.ndarray
    bound_gamma: np.ndarray    # V1 |h_x|^(2k+2) / sqrt(3k+4)
    bound_gamma_x: np.ndarray  # V1 2(k+1)/sqrt(3k+4) |h_x^(2k+1) h_xx|

    @property
    def holds(self) -> bool:
        tol = 1e-14
        return bool(np.all(np.abs(self.gamma) <= self.bound_gamma * (1 + tol) + 1e-300)
                    and np.all(np.abs(self.gamma_x) <= self.bound_gamma_x * (1 + tol) + 1e-300))


def _tail_series(k: int, z: np.ndarray, max_terms: int = 100000):
    """S(z) = sum_j c_{k+1+j} z^j and S'(z) with c_l = binom(-1/2, l).

    Neumaier-compensated; stops once the terms are below double precision.
    """
    c = float(binom_half(k + 1))
    s = np.zeros_like(z)
    comp = np.zeros_like(z)
    ds = np.zeros_like(z)
    dcomp = np.zeros_like(z)
    power = np.ones_like(z)
    for j in range(max_terms):
        l = k + 1 + j
        term = c * power
        t = s + term
        comp += np.where(np.abs(s) >= np.abs(term), (s - t) + term, (term - t) + s)
        s = t
        # d/dz of c z^j is j c z^(j-1); accumulated as (j+1) c_{l+1} z^j next step
        dterm = (j + 1) * c * (-(l + 0.5) / (l + 1)) * power
        t = ds + dterm
        dcomp += np.where(np.abs(ds) >= np.abs(dterm), (ds - t) + dterm, (dterm - t) + ds)
        ds = t
        c *= -(l + 0.5) / (l + 1)
        power = power * z
        if np.all(np.abs(term) <= 1e-18 * np.abs(s) + 1e-300) and \
                np.all(np.abs(dterm) <= 1e-18 * np.abs(ds) + 1e-300):
            break
    return s + comp, ds + dcomp


def gamma_k_profile(shape: ShapeSpec, boundary: BoundaryData, k: int, eps: float,
                    n_samples: int = 1024) -> BoundaryResidual:
    """gamma_k(x) = eps^(-2k-2) (g1 - g1^(2k)) and its x-derivative on samples."""
    x = np.arange(n_samples) / n_samples
    D = shape.derivs(x, 2)
    hx, hxx = D[1], D[2]
    if eps * np.max(np.abs(hx)) >= 1:
        raise BinomialDivergence("eps * sup|h_x| >= 1: binomial series diverges")
    z = (eps * hx) ** 2
    S, dS = _tail_series(k, z)
    V1 = boundary.V1
    # gamma = V1 h_x^(2k+2) S(z); differentiate using dz/dx = 2 eps^2 h_x h_xx
    hx2k1 = hx ** (2 * k + 1)
    gamma = V1 * hx2k1 * hx * S
    gamma_x = V1 * hxx * hx2k1 * ((2 * k + 2) * S + 2 * z * dS)
    bg = abs(V1) * np.abs(hx) ** (2 * k + 2) / math.sqrt(3 * k + 4)
    bgx = abs(V1) * 2 * (k + 1) / math.sqrt(3 * k + 4) * np.abs(hx2k1 * hxx)
    return BoundaryResidual(x, gamma, gamma_x, bg, bgx)


NORM_FIELDS = (("psi", "norm_psi", "bound_psi"), ("uv", "norm_uv", "bound_uv"),
               ("omega", "norm_omega", "bound_omega"), ("p", "norm_p", "bound_p"),
               ("Q", "q_err", "bound_Q"))


def compare_bound_to_error(budget: ErrorBudget, measured, floor: float = 1e-11,
                           raise_on_violation: bool = True) -> Dict[str, Optional[float]]:
    """ratio^(1/(2k+2)) of bound to measured error per field.

    Measured values at or below ``floor`` count as zero; a zero bound with a
    zero error yields the sentinel value ``float('inf')``.
    """
    out: Dict[str, Optional[float]] = {}
    power = 1.0 / (2 * budget.k + 2)
    bad = []
    for name, mattr, battr in NORM_FIELDS:
        err = float(getattr(measured, mattr))
        bnd = float(getattr(budget, battr))
        if err <= floor:
            out[name] = math.inf
            continue
        ratio = bnd / err
        if ratio < 1:
            bad.append(f"{name}: error {err:.3e} > bound {bnd:.3e}")
        out[name] = ratio ** power if ratio > 0 else 0.0
    if bad and raise_on_violation:
        raise BoundViolation("; ".join(bad))
    return out
