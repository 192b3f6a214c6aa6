"""Spectral reference solver for the rescaled biharmonic problem.

Coordinates are mapped to (x, eta) with eta = y/h(x) in [0, 1].  The
x-direction is Fourier collocation on Nx equispaced nodes; eta uses
Chebyshev-Gauss-Lobatto nodes.  The PDE

    psi_yyyy + 2 eps^2 psi_xxyy + eps^4 psi_xxxx = 0

is collocated at interior eta nodes; each x column carries four boundary
rows and one global closure row fixes the unknown flux Q.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import GridMismatch, SingularSystem, UnresolvedSolution
from .fields import BoundaryData, EvalContext, FieldGrid, truncated_fields
from .geometry import ShapeSpec


def fourier_diff(N: int) -> np.ndarray:
    """First-derivative matrix on N equispaced nodes of the unit period (N even)."""
    if N % 2:
        raise ValueError("Nx must be even")
    i = np.arange(N)
    d = i[:, None] - i[None, :]
    with np.errstate(divide="ignore"):
        D = 0.5 * (-1.0) ** d / np.tan(np.pi * d / N)
    D[d == 0] = 0.0
    return 2 * np.pi * D


def cheb_nodes(N: int) -> np.ndarray:
    """N Gauss-Lobatto nodes on [0, 1], increasing (eta_0 = 0, eta_{N-1} = 1)."""
    j = np.arange(N)
    return 0.5 * (1.0 - np.cos(np.pi * j / (N - 1)))


def cheb_diff(N: int) -> np.ndarray:
    """Differentiation matrix on cheb_nodes(N) (Trefethen's construction, mapped)."""
    n = N - 1
    t = np.cos(np.pi * np.arange(N) / n)  # 1 .. -1
    c = np.ones(N)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N)
    T = t[:, None] - t[None, :]
    D = np.outer(c, 1.0 / c) / (T + np.eye(N))
    D -= np.diag(D.sum(axis=1))
    # eta = (1 - t)/2  =>  d/deta = -2 d/dt
    return -2.0 * D


def cheb_integration(N: int) -> np.ndarray:
    """S with (S f)_j = int_0^{eta_j} f(eta) d eta for the interpolant of f."""
    eta = cheb_nodes(N)
    t = 2 * eta - 1
    V = np.polynomial.chebyshev.chebvander(t, N - 1)
    C = np.linalg.inv(V)
    Ci = np.polynomial.chebyshev.chebint(C, lbnd=-1, axis=0) * 0.5
    return np.polynomial.chebyshev.chebvander(t, N) @ Ci


def clenshaw_curtis_weights(N: int) -> np.ndarray:
    return cheb_integration(N)[-1].copy()


@dataclass(frozen=True)
class SolverConfig:
    shape: ShapeSpec
    eps: float
    Nx: int = 64
    Ny: int = 24
    boundary: BoundaryData = field(default_factory=BoundaryData)

    def __post_init__(self):
        if self.Nx < 16 or self.Nx % 2:
            raise ValueError("Nx must be even and >= 16")
        if self.Ny < 12:
            raise ValueError("Ny must be >= 12")
        if not self.eps > 0:
            raise ValueError("eps must be positive")


class MappedGrid:
    """Tensor grid and differentiation operators in mapped coordinates."""

    def __init__(self, shape: ShapeSpec, Nx: int, Ny: int):
        self.Nx, self.Ny = Nx, Ny
        self.x = np.arange(Nx) / Nx
        self.eta = cheb_nodes(Ny)
        D = shape.derivs(self.x, 1)
        self.h, self.hx = D[0], D[1]
        self.Dxi = fourier_diff(Nx)
        self.Deta = cheb_diff(Ny)
        self.w_eta = clenshaw_curtis_weights(Ny)
        self.S_eta = cheb_integration(Ny)

    # operators on arrays of shape (Nx, Ny)
    def d_eta(self, f):
        return f @ self.Deta.T

    def dy(self, f):
        return self.d_eta(f) / self.h[:, None]

    def dx(self, f):
        return self.Dxi @ f - (self.eta[None, :] * (self.hx / self.h)[:, None]) * self.d_eta(f)

    def integrate(self, f2):
        """int_0^1 int_0^h f dy dx for grid values (trapezoid x Clenshaw-Curtis)."""
        return float(np.mean(self.h * (f2 @ self.w_eta)))

    def flat_ops(self):
        """Dense Dy and Dx acting on vectors flattened x-major."""
        n = self.Nx * self.Ny
        Ix = np.eye(self.Nx)
        De = np.kron(Ix, self.Deta)
        hflat = np.repeat(self.h, self.Ny)
        Dy = De / hflat[:, None]
        coef = (np.tile(self.eta, self.Nx) * np.repeat(self.hx / self.h, self.Ny))
        Dx = np.kron(self.Dxi, np.eye(self.Ny)) - coef[:, None] * De
        return Dy, Dx


@dataclass(eq=False)
class ReferenceSolution:
    config: SolverConfig
    grid: MappedGrid
    psi: np.ndarray
    Q: float
    residual: float
    fields: Dict[str, np.ndarray] = field(default_factory=dict)
    accuracy: Optional[float] = None

    @property
    def u(self):
        return self.fields["u"]

    @property
    def v(self):
        return self.fields["v"]

    @property
    def omega(self):
        return self.fields["omega"]

    @property
    def p(self):
        return self.fields["p"]


def _periodic_antiderivative(f: np.ndarray) -> np.ndarray:
    """F(x) - F(0) with F' = f - mean(f), spectrally, on the unit period."""
    N = f.size
    fh = np.fft.rfft(f)
    k = np.fft.rfftfreq(N, d=1.0 / N)
    Fh = np.zeros_like(fh)
    nz = k > 0
    Fh[nz] = fh[nz] / (2j * np.pi * k[nz])
    if N % 2 == 0:
        Fh[-1] = 0.0
    F = np.fft.irfft(Fh, n=N)
    return F - F[0]


def derived_fields(grid: MappedGrid, psi: np.ndarray, eps: float) -> Dict[str, np.ndarray]:
    e2 = eps * eps
    py_ = grid.dy(psi)
    px_ = grid.dx(psi)
    pyy = grid.dy(py_)
    pxx = grid.dx(px_)
    omega = -(e2 * pxx + pyy)
    # pressure: p_x = psi_yyy + eps^2 psi_xxy, p_y = -eps^4 psi_xxx - eps^2 psi_xyy
    p_x0 = grid.dy(pyy)[:, 0] + e2 * grid.dx(grid.dx(py_))[:, 0]
    line = _periodic_antiderivative(p_x0)
    p_y = -e2 * e2 * grid.dx(pxx) - e2 * grid.dx(grid.dy(py_))
    up = (p_y @ grid.S_eta.T) * grid.h[:, None]
    return {"u": py_, "v": -px_, "omega": omega, "p": line[:, None] + up, "p_x0": p_x0}


def solve_stokes(config: SolverConfig, check_refinement: bool = False) -> ReferenceSolution:
    """Dense collocation solve; returns psi on the grid, Q and derived fields."""
    g = MappedGrid(config.shape, config.Nx, config.Ny)
    Nx, Ny = g.Nx, g.Ny
    n = Nx * Ny
    e2 = config.eps ** 2
    interior = (np.arange(Nx)[:, None] * Ny + np.arange(2, Ny - 2)[None, :]).ravel()
    # operator columns: apply the mapped derivatives to a batch of unit vectors
    E = np.eye(n).reshape(n, Nx, Ny)
    Ey2 = g.dy(g.dy(E))
    Ex2 = g.dx(g.dx(E))
    L = g.dy(g.dy(Ey2)) + 2 * e2 * g.dx(g.dx(Ey2)) + e2 * e2 * g.dx(g.dx(Ex2))
    del E, Ey2, Ex2
    # L[b] holds column b of the operator; scale PDE rows by h^4 for balance
    rows_pde = L.reshape(n, n).T[interior] * (np.repeat(g.h, Ny)[interior] ** 4)[:, None]
    del L
    A = np.zeros((n + 1, n + 1))
    b = np.zeros(n + 1)
    A[interior, :n] = rows_pde
    V0, V1 = config.boundary.V0, config.boundary.V1
    g1 = V1 / np.sqrt(1.0 + e2 * g.hx ** 2)
    De = g.Deta
    for i in range(Nx):
        base = i * Ny
        r0, r1, r2, r3 = base, base + 1, base + Ny - 2, base + Ny - 1
        A[r0, base] = 1.0                      # psi = 0 at eta = 0
        A[r1, base: base + Ny] = De[0]         # psi_eta = h V0
        b[r1] = g.h[i] * V0
        A[r2, base: base + Ny] = De[-1]        # psi_eta = h g1 at eta = 1
        b[r2] = g.h[i] * g1[i]
        A[r3, base + Ny - 1] = 1.0             # psi - Q = 0 at eta = 1
        A[r3, n] = -1.0
    # closure: mean over x of psi_etaetaeta(x, 0) / h^3 = 0
    D3 = (De @ De @ De)[0]
    for i in range(Nx):
        A[n, i * Ny: (i + 1) * Ny] = D3 / g.h[i] ** 3 / Nx
    # row equilibration, then iterative refinement with extended-precision residuals
    scale = 1.0 / np.abs(A).max(axis=1)
    A *= scale[:, None]
    b *= scale
    try:
        lu, piv = sla.lu_factor(A, check_finite=False)
        if np.any(np.abs(np.diag(lu)) < 1e-14 * np.abs(np.diag(lu)).max()):
            raise SingularSystem("collocation matrix is numerically singular")
        sol = sla.lu_solve((lu, piv), b, check_finite=False)
        Al, bl = A.astype(np.longdouble), b.astype(np.longdouble)
        for _ in range(3):
            r = (bl - Al @ sol.astype(np.longdouble)).astype(float)
            sol = sol + sla.lu_solve((lu, piv), r, check_finite=False)
    except (sla.LinAlgError, ValueError) as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("non-finite solution")
    res = float(np.max(np.abs(A @ sol - b)))
    psi = sol[:n].reshape(Nx, Ny)
    ref = ReferenceSolution(config, g, psi, float(sol[n]), res)
    ref.fields = derived_fields(g, psi, config.eps)
    if check_refinement:
        fine = SolverConfig(config.shape, config.eps, 2 * config.Nx, config.Ny + 8, config.boundary)
        Qf = solve_stokes(fine).Q
        ref.accuracy = abs(Qf - ref.Q) / max(abs(Qf), 1e-300)
        if ref.accuracy > 1e-8:
            raise UnresolvedSolution(f"refinement changes Q by {ref.accuracy:.2e}")
    return ref


@dataclass(frozen=True)
class NormReport:
    order: int
    eps: float
    norm_psi: float
    norm_uv: float
    norm_omega: float
    norm_p: float
    q_err: float


def _norm1(g: MappedGrid, f, eps) -> float:
    """||f||_{1,eps}^2 = int f^2 + f_y^2 + eps^2 f_x^2."""
    return g.integrate(f * f + g.dy(f) ** 2 + eps * eps * g.dx(f) ** 2)


def norms_of(g: MappedGrid, psi_e, u_e, v_e, w_e, p_e, eps: float):
    """Weighted norms of a set of error arrays (derivatives taken spectrally)."""
    e2 = eps * eps
    py, px = g.dy(psi_e), g.dx(psi_e)
    pyy, pxy, pxx = g.dy(py), g.dx(py), g.dx(px)
    n_psi = g.integrate(psi_e ** 2 + py ** 2 + e2 * px ** 2 + pyy ** 2 + 2 * e2 * pxy ** 2
                        + e2 * e2 * pxx ** 2)
    n_uv = _norm1(g, u_e, eps) + e2 * _norm1(g, v_e, eps)
    n_w = g.integrate(w_e ** 2)
    # pressure is defined up to a constant: compare mean-free parts
    area = g.integrate(np.ones_like(p_e))
    pm = p_e - g.integrate(p_e) / area
    n_p = g.integrate(pm ** 2)
    return tuple(math.sqrt(max(v, 0.0)) for v in (n_psi, n_uv, n_w, n_p))


def error_norms(ref: ReferenceSolution, approx: FieldGrid, Q_approx: float) -> NormReport:
    g = ref.grid
    if approx.approx["psi"].shape != ref.psi.shape or not np.allclose(approx.x, g.x) \
            or not np.allclose(approx.eta, g.eta):
        raise GridMismatch("approximation and reference grids differ")
    eps = ref.config.eps
    a = approx.approx
    n_psi, n_uv, n_w, n_p = norms_of(g, a["psi"] - ref.psi, a["u"] - ref.u, a["v"] - ref.v,
                                     a["omega"] - ref.omega, a["p"] - ref.p, eps)
    return NormReport(approx.order, eps, n_psi, n_uv, n_w, n_p, abs(Q_approx - ref.Q))


def approx_on_grid(ctx: EvalContext, k: int, g: MappedGrid, eps: float) -> FieldGrid:
    return truncated_fields(ctx, k, g.x, g.eta, eps=eps)


@dataclass
class StudyResult:
    rows: List[dict]
    slopes: Dict[int, Dict[str, float]]


NOISE_FLOOR = 1e-11


def fit_slope(eps: Sequence[float], values: Sequence[float], floor: float = NOISE_FLOOR) -> float:
    """Least-squares slope of log(values) against log(eps).

    NaN (not applicable) when any value is at or below the noise floor.
    """
    e = np.log(np.asarray(eps, dtype=float))
    v = np.asarray(values, dtype=float)
    if v.size < 2 or np.any(v <= floor):
        return float("nan")
    return float(np.polyfit(e, np.log(v), 1)[0])


def convergence_study(shape: ShapeSpec, boundary: BoundaryData, orders: Sequence[int],
                      eps_list: Sequence[float], Nx: int = 64, Ny: int = 24,
                      tables=None, N_moments: int = 1024) -> StudyResult:
    """Errors of the truncated expansion against the reference solver over eps.

    ``orders`` are even orders 2k.  Rows carry the bound (*) when ``tables``
    (UniversalTables) is given.
    """
    import warnings

    from .bounds import star_bound
    from .errors import ValidityWarning
    from .geometry import moments

    ks = [o // 2 for o in orders]
    kmax = max(ks)
    mom = moments(shape, kmax, N_moments)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        ctx = EvalContext(shape, kmax, eps=float(eps_list[0]), boundary=boundary, mom=mom)
    rows = []
    for eps in eps_list:
        ref = solve_stokes(SolverConfig(shape, float(eps), Nx, Ny, boundary))
        g = ref.grid
        for k in ks:
            fg = truncated_fields(ctx, k, g.x, g.eta, eps=float(eps))
            rep = error_norms(ref, fg, ctx.fluxes.approx(float(eps), k))
            row = dict(eps=float(eps), order=2 * k, norm_psi=rep.norm_psi, norm_uv=rep.norm_uv,
                       norm_omega=rep.norm_omega, norm_p=rep.norm_p, q_err=rep.q_err)
            if tables is not None:
                b = star_bound(mom, tables, boundary, k, float(eps), warn=False)
                row.update(bound_star=b.star, bound_p=b.bound_p,
                           ratio=(b.star / rep.norm_uv) if rep.norm_uv > 0 else math.inf,
                           valid=b.validity)
            rows.append(row)
    slopes = {}
    for k in ks:
        sel = [r for r in rows if r["order"] == 2 * k]
        e = [r["eps"] for r in sel]
        slopes[2 * k] = {name: fit_slope(e, [r[name] for r in sel])
                         for name in ("norm_psi", "norm_uv", "norm_omega", "norm_p", "q_err")}
    return StudyResult(rows, slopes)


def field_l2(g: MappedGrid, f: np.ndarray, mean_free: bool = False) -> float:
    if mean_free:
        f = f - g.integrate(f) / g.integrate(np.ones_like(f))
    return math.sqrt(max(g.integrate(f * f), 0.0))


CONSISTENCY_FIELDS = ("psi", "u", "v", "omega", "p")


def mutual_consistency(ctx: EvalContext, g: MappedGrid, orders: Sequence[int],
                       eps_list: Sequence[float]) -> Dict[int, Dict[str, object]]:
    """L2 norms of field_approx^(2k+2) - field_approx^(2k) over eps, with slopes.

    Plain L2 per field (pressure mean-free); the eps-weighted norms would add
    eps-dependent derivative weights and bias the slope upward.
    """
    out = {}
    for order in orders:
        k = order // 2
        vals = {f: [] for f in CONSISTENCY_FIELDS}
        for eps in eps_list:
            lo = truncated_fields(ctx, k, g.x, g.eta, eps=float(eps)).approx
            hi = truncated_fields(ctx, k + 1, g.x, g.eta, eps=float(eps)).approx
            for f in CONSISTENCY_FIELDS:
                vals[f].append(field_l2(g, hi[f] - lo[f], mean_free=(f == "p")))
        out[order] = {"values": vals,
                      "slopes": {f: fit_slope(eps_list, vals[f]) for f in CONSISTENCY_FIELDS}}
    return out


TURNOVER_ORDERS = (0, 2, 4, 6, 10, 16, 20)


def probe_gaps(shape: ShapeSpec, eps: float, orders: Sequence[int] = TURNOVER_ORDERS,
               x0: float = 0.375, eta0: float = 0.75, Nx: int = 64, Ny: int = 24,
               boundary: Optional[BoundaryData] = None) -> Dict[str, object]:
    """|u_approx^(2k) - u_ref| at (x0, eta0 h(x0)) for each order (turnover probe)."""
    import warnings

    from scipy.interpolate import BarycentricInterpolator

    from .errors import ValidityWarning

    boundary = boundary or BoundaryData()
    i = x0 * Nx
    if abs(i - round(i)) > 1e-12:
        raise GridMismatch("probe x must be a grid node; choose Nx accordingly")
    ref = solve_stokes(SolverConfig(shape, eps, Nx, Ny, boundary))
    u_ref = float(BarycentricInterpolator(ref.grid.eta, ref.u[int(round(i))])(eta0))
    kmax = max(orders) // 2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        ctx = EvalContext(shape, kmax, eps=eps, boundary=boundary)
    grid = truncated_fields(ctx, kmax, np.array([x0]), np.array([eta0]), fields=("u",), eps=eps)
    per = [v[0, 0] for v in grid.per_order["u"]]
    gaps = []
    for o in orders:
        k = o // 2
        approx = sum(eps ** (2 * l) * per[l] for l in range(k + 1))
        gaps.append(abs(approx - u_ref))
    return {"orders": list(orders), "u_ref": u_ref, "gaps": gaps}
