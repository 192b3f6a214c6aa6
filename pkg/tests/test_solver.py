import math
import warnings

import numpy as np
import pytest

from lubrex.errors import GridMismatch, UnresolvedSolution, ValidityWarning
from lubrex.fields import BoundaryData, EvalContext, FieldGrid
from lubrex.geometry import parse_shape
from lubrex.solver import (MappedGrid, SolverConfig, cheb_diff, cheb_integration, cheb_nodes,
                           clenshaw_curtis_weights, convergence_study, error_norms, fit_slope,
                           fourier_diff, mutual_consistency, probe_gaps, solve_stokes)


def test_fourier_diff_exact_on_trig():
    N = 16
    x = np.arange(N) / N
    D = fourier_diff(N)
    f = np.sin(2 * np.pi * 3 * x) + np.cos(2 * np.pi * x)
    df = 6 * np.pi * np.cos(2 * np.pi * 3 * x) - 2 * np.pi * np.sin(2 * np.pi * x)
    np.testing.assert_allclose(D @ f, df, atol=1e-11)


def test_chebyshev_operators_exact_on_polynomials():
    N = 12
    eta = cheb_nodes(N)
    assert eta[0] == pytest.approx(0.0, abs=1e-15) and eta[-1] == pytest.approx(1.0)
    f = eta ** 5 - 2 * eta ** 2
    np.testing.assert_allclose(cheb_diff(N) @ f, 5 * eta ** 4 - 4 * eta, atol=1e-11)
    np.testing.assert_allclose(cheb_integration(N) @ f, eta ** 6 / 6 - 2 * eta ** 3 / 3,
                               atol=1e-13)
    assert clenshaw_curtis_weights(N) @ f == pytest.approx(1 / 6 - 2 / 3, abs=1e-14)


def test_config_validation(sine02):
    with pytest.raises(ValueError):
        SolverConfig(sine02, 0.1, Nx=15)
    with pytest.raises(ValueError):
        SolverConfig(sine02, 0.1, Ny=8)
    with pytest.raises(ValueError):
        SolverConfig(sine02, 0.0)


def test_constant_shape_is_plane_couette(const1):
    ref = solve_stokes(SolverConfig(const1, 0.1, 16, 12))
    V0, V1 = -0.5, 1.0
    assert ref.Q == pytest.approx((V0 + V1) / 2, abs=1e-12)
    y = ref.grid.h[:, None] * ref.grid.eta[None, :]
    np.testing.assert_allclose(ref.psi, V0 * y + (V1 - V0) / 2 * y ** 2, atol=1e-12)
    np.testing.assert_allclose(ref.p, 0.0, atol=1e-10)


@pytest.fixture(scope="module")
def ref_sine(sine02):
    return solve_stokes(SolverConfig(sine02, 0.1, 48, 18))


def test_boundary_conditions_and_flux(ref_sine):
    g = ref_sine.grid
    np.testing.assert_allclose(ref_sine.psi[:, 0], 0.0, atol=1e-12)
    np.testing.assert_allclose(ref_sine.u[:, 0], -0.5, atol=1e-10)
    np.testing.assert_allclose(ref_sine.psi[:, -1], ref_sine.Q, atol=1e-12)
    # flux through every vertical section equals Q
    flux = g.h * (ref_sine.u @ g.w_eta)
    assert np.ptp(flux) / ref_sine.Q < 1e-9


def test_pressure_is_periodic(ref_sine):
    px0 = ref_sine.fields["p_x0"]
    assert abs(np.mean(px0)) < 1e-8 * np.abs(px0).max()


@pytest.mark.parametrize("eps", [0.06, 0.2])
def test_self_convergence(sine02, eps):
    a = solve_stokes(SolverConfig(sine02, eps, 32, 16))
    b = solve_stokes(SolverConfig(sine02, eps, 64, 32))
    assert abs(a.Q - b.Q) / abs(b.Q) < 1e-8


def test_refinement_check_flags_coarse_grid():
    shape = parse_shape("sine:a=0.05")
    with pytest.raises(UnresolvedSolution):
        solve_stokes(SolverConfig(shape, 0.1, 16, 12), check_refinement=True)


def test_refinement_check_accepts_resolved(ref_sine, sine02):
    ref = solve_stokes(SolverConfig(sine02, 0.1, 32, 16), check_refinement=True)
    assert ref.accuracy < 1e-8


def test_zero_error_against_itself(ref_sine):
    g = ref_sine.grid
    fields = {name: getattr(ref_sine, name) for name in ("u", "v", "omega", "p")}
    fields["psi"] = ref_sine.psi
    fg = FieldGrid(g.x, g.eta, g.h[:, None] * g.eta, 0.1, 0, {}, fields)
    rep = error_norms(ref_sine, fg, ref_sine.Q)
    assert max(rep.norm_psi, rep.norm_uv, rep.norm_omega, rep.norm_p, rep.q_err) == 0.0

    other = MappedGrid(ref_sine.config.shape, 32, 18)
    bad = FieldGrid(other.x, other.eta, other.h[:, None] * other.eta, 0.1, 0, {},
                    {k: np.zeros((32, 18)) for k in fields})
    with pytest.raises(GridMismatch):
        error_norms(ref_sine, bad, ref_sine.Q)


def test_fit_slope_sentinel():
    eps = [0.1, 0.2]
    assert fit_slope(eps, [1e-3, 4e-3]) == pytest.approx(2.0)
    assert math.isnan(fit_slope(eps, [0.0, 1e-3]))


def test_convergence_slopes_low_orders(sine02, boundary):
    eps = np.geomspace(0.06, 0.2, 4)
    st = convergence_study(sine02, boundary, [0, 4], eps, Nx=48, Ny=18)
    assert st.slopes[0]["norm_uv"] == pytest.approx(2.0, abs=0.15)
    assert st.slopes[4]["norm_uv"] == pytest.approx(6.0, abs=0.2)


def test_constant_shape_study_is_not_applicable(const1, boundary):
    st = convergence_study(const1, boundary, [0, 2], [0.05, 0.1], Nx=16, Ny=12)
    for order in (0, 2):
        assert math.isnan(st.slopes[order]["norm_uv"])
    assert all(r["norm_uv"] < 1e-10 for r in st.rows)


def test_mutual_consistency_slopes(ctx02):
    g = MappedGrid(ctx02.shape, 32, 14)
    res = mutual_consistency(ctx02, g, [0, 2], np.geomspace(0.02, 0.08, 4))
    for order in (0, 2):
        for f, s in res[order]["slopes"].items():
            assert s == pytest.approx(order + 2, abs=0.2), (order, f)


def test_probe_gaps_grid_node_required(sine02):
    with pytest.raises(GridMismatch):
        probe_gaps(sine02, 0.1, orders=(0,), x0=0.3, Nx=16, Ny=12)


def test_probe_gaps_decrease_at_small_eps(sine02):
    out = probe_gaps(sine02, 0.05, orders=(0, 2, 4), Nx=32, Ny=16)
    g = out["gaps"]
    assert g[0] > g[1] > g[2]
