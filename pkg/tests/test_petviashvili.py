import numpy as np
import pytest

from gapsolitons.cme import CmeModel, symmetric_four_mode_model
from gapsolitons.errors import ConfigError, NumericalError, SingularSymbolError
from gapsolitons.grid import UniformGrid, VectorField
from gapsolitons.nls_seed import build_cme_ansatz, effective_nls_coeffs, shoot_radial
from gapsolitons.petviashvili import (
    angular_asymmetry,
    apply_symbol,
    apply_symbol_inverse,
    continue_in_omega,
    crop_refine,
    petviashvili_solve,
    refine,
    stationary_residual,
)

GRID = UniformGrid.centered(60.0, 256, 2)


def scalar_model(gamma=-1.0):
    # L(K) = K_1 + 1, N(B) = gamma |B|^2 B
    return CmeModel([[1.0, 0.0]], [[-1.0]], {(0, 0, 0, 0): gamma})


@pytest.fixture(scope="module")
def ex41_soliton(ex41_gamma_module):
    model, edge = ex41_gamma_module
    pb = effective_nls_coeffs(model, edge)
    seed = build_cme_ansatz(shoot_radial(pb), edge, 0.1, GRID)
    return model, petviashvili_solve(model, -0.99, seed)


@pytest.fixture(scope="module")
def ex41_gamma_module(ex41_gamma, ex41_edge):
    return symmetric_four_mode_model(3, 1, 1, (0, 1), (1, 0), gamma=ex41_gamma), ex41_edge


def test_symbol_inverse_roundtrip(ex41_model):
    g = UniformGrid.centered(10.0, 32, 2)
    rng = np.random.default_rng(0)
    B = VectorField(rng.normal(size=(4, 32, 32)) + 1j * rng.normal(size=(4, 32, 32)), g)
    C = apply_symbol_inverse(B, 0.5, ex41_model)
    back = apply_symbol(C, ex41_model).values - 0.5 * C.values
    assert np.abs(back - B.values).max() < 1e-11


def test_constant_field_fixed_point():
    # Omega B = B + |B|^2 B  ->  |B| = 1 at Omega = 2
    g = UniformGrid.centered(5.0, 16, 2)
    sol = petviashvili_solve(scalar_model(), 2.0, VectorField(0.3 * np.ones((1, 16, 16), complex), g))
    assert np.allclose(np.abs(sol.field.values), 1.0, atol=1e-12)
    assert sol.s_factor == pytest.approx(1.0, abs=1e-12)


def test_refeed_converges_immediately():
    g = UniformGrid.centered(5.0, 16, 2)
    sol = petviashvili_solve(scalar_model(), 2.0, VectorField(np.ones((1, 16, 16), complex), g))
    again = petviashvili_solve(scalar_model(), 2.0, sol.field)
    assert again.iterations <= 2


def test_spectrum_point_rejected():
    m = symmetric_four_mode_model(0, 0, 0, (0, 1), (1, 0), gamma={(0, 0, 0, 0): -1.0})
    seed = VectorField(np.ones((4, 16, 16), complex), UniformGrid.centered(5.0, 16, 2))
    with pytest.raises(SingularSymbolError):
        petviashvili_solve(m, 0.0, seed)


def test_bad_initial_guess_rejected(ex41_model):
    g = UniformGrid.centered(5.0, 16, 2)
    with pytest.raises(ConfigError):
        petviashvili_solve(ex41_model, -0.99, VectorField(np.zeros((4, 16, 16), complex), g))
    with pytest.raises(ConfigError):
        petviashvili_solve(ex41_model, -0.99, VectorField(np.ones((2, 16, 16), complex), g))


def test_example_soliton(ex41_soliton):
    model, sol = ex41_soliton
    assert sol.residual < 1e-8
    assert abs(sol.s_factor - 1) < 1e-6
    assert sol.diagnostics["B2_conj_B1"] < 1e-6 and sol.diagnostics["B4_conj_B3"] < 1e-6
    assert sol.localized
    assert stationary_residual(model, -0.99, sol.field) == pytest.approx(sol.residual)
    # the leading-order pattern B1 = B2 = -B3 = -B4 holds to O(eps)
    assert sol.diagnostics["ansatz_pattern"] < 0.2
    assert all(isinstance(v, (int, float)) for v in sol.summary().values())


def test_phase_covariance(ex41_soliton):
    model, sol = ex41_soliton
    rot = np.exp(1j * np.pi / 3)
    again = petviashvili_solve(model, -0.99, VectorField(rot * sol.field.values, sol.field.grid))
    B, R = sol.field.values, again.field.values
    align = np.vdot(R, rot * B) / abs(np.vdot(R, rot * B))
    assert np.abs(align * R - rot * B).max() < 1e-6 * np.abs(B).max()


def test_grid_refinement_and_no_checkerboard(ex41_soliton):
    model, sol = ex41_soliton
    fine = petviashvili_solve(model, -0.99, refine(sol.field))
    assert abs(np.abs(fine.field.values[0]).max() - np.abs(sol.field.values[0]).max()) < 1e-4
    assert sol.diagnostics["highest_mode"] < 1e-8


def test_zero_length_continuation(ex41_soliton):
    model, sol = ex41_soliton
    branch = continue_in_omega(model, sol, -0.99)
    assert branch.completed and branch.omegas == [-0.99] and branch.final is sol


def test_short_continuation_step(ex41_soliton):
    model, sol = ex41_soliton
    branch = continue_in_omega(model, sol, -0.98, d_omega=0.01)
    assert branch.completed and branch.omegas[-1] == pytest.approx(-0.98)
    assert branch.final.residual < 1e-8
    assert branch.final.peak > sol.peak


def test_regridding_preserves_band_limited_field():
    g = UniformGrid.centered(12.0, 48, 2)
    X, Y = g.mesh()
    f = VectorField(np.exp(-(X**2 + Y**2) / 2)[None].astype(complex), g)
    fine = refine(f)
    Xf, Yf = fine.grid.mesh()
    assert np.abs(fine.values[0] - np.exp(-(Xf**2 + Yf**2) / 2)).max() < 1e-8
    cr = crop_refine(f)
    Xc, Yc = cr.grid.mesh()
    assert cr.grid.shape == g.shape and np.abs(cr.values[0] - np.exp(-(Xc**2 + Yc**2) / 2)).max() < 1e-8


def test_angular_asymmetry_oracle():
    g = UniformGrid.centered(10.0, 128, 2)
    X, Y = g.mesh()
    round_ = VectorField(np.exp(-(X**2 + Y**2))[None].astype(complex), g)
    oval = VectorField(np.exp(-(X**2 / 1.5 + Y**2))[None].astype(complex), g)
    assert angular_asymmetry(round_)[0] < 1e-4
    assert angular_asymmetry(oval)[0] > 1e-2


def test_nonconvergence_reported(ex41_model):
    g = UniformGrid.centered(20.0, 32, 2)
    X, Y = g.mesh()
    seed = VectorField(np.array([np.exp(-(X**2 + Y**2) / 50)] * 4, dtype=complex), g)
    with pytest.raises(NumericalError):
        petviashvili_solve(ex41_model, -0.99, seed, max_iter=3)
