from fractions import Fraction as F

import numpy as np
import pytest

from gapsolitons.bloch import PerturbationPotential, PeriodicPotential, solve_bloch
from gapsolitons.cme import CarrierSet, CmeModel
from gapsolitons.dynamics import (
    EnvelopeState,
    GpState,
    assemble_uapp,
    bloch_on_box,
    envelope_grid_for,
    error_scaling_study,
    evolve_cme,
    evolve_gp,
    fit_slope,
    periodic_box,
)
from gapsolitons.errors import ConfigError, ResolutionError
from gapsolitons.grid import UniformGrid, VectorField

COS = PeriodicPotential.cosine_product(2)
ZERO = PeriodicPotential.zero(2)


def test_linear_cme_plane_wave_is_exact():
    m = CmeModel([[0.7, -0.2], [-0.3, 0.5]], [[0.1, 0.4 - 0.2j], [0.4 + 0.2j, -0.3]])
    g = UniformGrid.centered(np.pi * 4, 16, 2)
    X = g.mesh()
    K = np.array([0.5, -0.75])  # grid wavenumbers are multiples of 1/4
    w, U = np.linalg.eigh(np.diag(m.group_velocities @ K) - m.kappa)
    wave = np.exp(1j * (K[0] * X[0] + K[1] * X[1]))
    A0 = U[:, 1].reshape(2, 1, 1) * wave
    out = evolve_cme(EnvelopeState(VectorField(A0, g), 0.0, m), 0.1, 2.0)
    assert np.abs(out.field.values - np.exp(-2j * w[1]) * A0).max() < 1e-12


def test_pure_transport():
    m = CmeModel([[1.0, 0.5]], [[0.0]])
    g = UniformGrid.centered(10.0, 64, 2)
    X, Y = g.mesh()
    A0 = np.exp(-(X**2 + Y**2) / 2)[None].astype(complex)
    out = evolve_cme(EnvelopeState(VectorField(A0, g), 0.0, m), 0.05, 2.0)
    assert np.abs(out.field.values[0] - np.exp(-((X - 2.0) ** 2 + (Y - 1.0) ** 2) / 2)).max() < 1e-9


@pytest.fixture(scope="module")
def ex41_soliton_state(ex41_gamma, ex41_edge):
    from gapsolitons.cme import symmetric_four_mode_model
    from gapsolitons.nls_seed import build_cme_ansatz, effective_nls_coeffs, shoot_radial
    from gapsolitons.petviashvili import petviashvili_solve

    model = symmetric_four_mode_model(3, 1, 1, (0, 1), (1, 0), gamma=ex41_gamma)
    grid = UniformGrid.centered(60.0, 256, 2)
    seed = build_cme_ansatz(shoot_radial(effective_nls_coeffs(model, ex41_edge)), ex41_edge, 0.1, grid)
    return model, petviashvili_solve(model, -0.99, seed)


def test_soliton_modulus_preserved(ex41_soliton_state):
    model, sol = ex41_soliton_state
    out = evolve_cme(EnvelopeState(sol.field, 0.0, model), 0.05, 1.0)
    B = sol.field.values
    assert np.abs(np.abs(out.field.values) - np.abs(B)).max() < 1e-5 * np.abs(B).max()
    assert np.abs(out.field.values - np.exp(0.99j) * B).max() < 1e-5 * np.abs(B).max()


def test_cme_rejects_large_step_and_rough_data():
    m = CmeModel([[1.0, 0.0]], [[0.0]], {(0, 0, 0, 0): -1.0})
    g = UniformGrid.centered(10.0, 64, 2)
    X, Y = g.mesh()
    smooth = VectorField(10 * np.exp(-(X**2 + Y**2) / 4)[None].astype(complex), g)
    with pytest.raises(ConfigError):
        evolve_cme(EnvelopeState(smooth, 0.0, m), 0.1, 1.0)
    rough = VectorField(np.random.default_rng(0).normal(size=(1, 64, 64)).astype(complex), g)
    with pytest.raises(ResolutionError):
        evolve_cme(EnvelopeState(rough, 0.0, m), 0.01, 0.1)


def test_free_gaussian_closed_form():
    g = periodic_box(6, 8, 2)
    X, Y = g.mesh()
    a, t = 2.0, 1.5
    u0 = np.exp(-(X**2 + Y**2) / (4 * a)).astype(complex)
    out = evolve_gp(GpState(u0, g, 0.0, 0.1, ZERO), 0.1, t)
    exact = a / (a + 1j * t) * np.exp(-(X**2 + Y**2) / (4 * (a + 1j * t)))
    assert np.abs(out.u - exact).max() < 1e-12


def test_bloch_wave_phase():
    mode = solve_bloch(COS, [0.25, -0.5], 12, 3)[2]
    g = periodic_box(4, 16, 2)
    X = g.mesh()
    u0 = bloch_on_box(mode, g) * np.exp(1j * (0.25 * X[0] - 0.5 * X[1]))
    out = evolve_gp(GpState(u0, g, 0.0, 0.1, COS), 1e-3, 1.0)
    assert np.abs(out.u - np.exp(-1j * mode.omega) * u0).max() < 1e-6


def test_gp_mass_conserved_over_long_time():
    g = periodic_box(4, 8, 2)
    X, Y = g.mesh()
    u0 = (np.exp(-(X**2 + Y**2) / 20) * np.exp(0.3j * X)).astype(complex)
    W = PerturbationPotential.cosine_terms([(1.0, (F(1, 2), F(1, 4)))])
    s = GpState(u0, g, 0.0, 0.2, COS, W, PeriodicPotential.constant(1.0, 2))
    out = evolve_gp(s, 0.01, 10.0)
    assert abs(out.mass() - s.mass()) / s.mass() < 1e-8


def strang_errors():
    g = periodic_box(2, 16, 2)
    X, Y = g.mesh()
    u0 = (np.exp(-(X**2 + Y**2) / 8) * (1 + 0.5j * np.sin(X))).astype(complex)
    s = GpState(u0, g, 0.0, 0.2, COS, None, PeriodicPotential.constant(1.0, 2))
    ref = evolve_gp(s, 1e-4, 0.5).u
    return [float(np.abs(evolve_gp(s, dt, 0.5).u - ref).max()) for dt in (0.02, 0.01, 0.005)]


def test_strang_is_second_order():
    e = strang_errors()
    for a, b in zip(e, e[1:]):
        assert 3.2 <= a / b <= 4.8


def test_gp_checks_commensurability():
    g = UniformGrid.centered(10.0, 32, 2)
    with pytest.raises(ConfigError):
        GpState(np.zeros((32, 32), complex), g, 0.0, 0.1, COS)
    box = periodic_box(3, 8, 2)
    W = PerturbationPotential.cosine_terms([(1.0, (F(1, 2), 0))])
    with pytest.raises(ConfigError) as info:
        GpState(np.zeros(box.shape, complex), box, 0.0, 0.1, COS, W)
    assert "cells" in str(info.value)


def band1_pair():
    return CarrierSet.from_bloch(COS, [(1, (F(1, 10), 0)), (1, (F(-1, 10), 0))], 12)


def test_uapp_matches_direct_formula():
    car = band1_pair()
    fast = periodic_box(10, 8, 2)
    eps = 0.2
    slow = envelope_grid_for(fast, eps, 2)
    Xs = slow.mesh()
    A = np.array([np.exp(-(Xs[0] ** 2 + Xs[1] ** 2) / 2), 0.5j * np.exp(-(Xs[0] ** 2 + Xs[1] ** 2) / 2)])
    env = EnvelopeState(VectorField(A.astype(complex), slow), 0.0, None)
    u = assemble_uapp(car, env, eps, fast, t=0.7)
    x = fast.mesh()
    env_fast = np.exp(-eps**2 * (x[0] ** 2 + x[1] ** 2) / 2)
    direct = sum(c * env_fast * bloch_on_box(m, fast) * np.exp(1j * m.k[0] * x[0])
                 for c, m in zip([1.0, 0.5j], car.modes))
    assert np.abs(u - np.sqrt(eps) * np.exp(-0.7j * car.omega0) * direct).max() < 1e-8


def test_uapp_rejects_wrong_envelope_grid():
    car = band1_pair()
    fast = periodic_box(10, 8, 2)
    env = EnvelopeState(VectorField(np.ones((2, 40, 40), complex), envelope_grid_for(fast, 0.3, 2)), 0.0, None)
    with pytest.raises(ConfigError):
        assemble_uapp(car, env, 0.2, fast)
    with pytest.raises(ResolutionError):
        assemble_uapp(car, env, 0.3, fast)


def test_fit_slope_power_law():
    eps = np.array([0.2, 0.1, 0.05])
    assert fit_slope(eps, 3.0 * eps**1.5) == pytest.approx(1.5, abs=1e-12)


def test_small_scaling_study_protocol():
    car = CarrierSet.from_bloch(COS, [(1, (F(1, 10), 0))], 12)
    model = CmeModel.from_carriers(car, PerturbationPotential.zero(2), ZERO)
    res = error_scaling_study(car, model, lambda X: [np.exp(-(X[0] ** 2 + X[1] ** 2) / 4)],
                              [0.3, 0.25, 0.2], 0.2, COS, cells=20, dt_gp=5e-3, dt_cme=5e-3, n_times=3)
    assert len(res.runs) == 3 and not res.excluded
    assert all(r["initial_error"] == 0.0 for r in res.runs)
    assert all(r["mass_drift"] < 1e-10 for r in res.runs)
    assert np.isfinite(res.slope) and res.slope > 0
    header, rows = res.to_csv_rows()
    assert header[0] == "epsilon" and len(rows) == 3
    with pytest.raises(ConfigError):
        error_scaling_study(car, model, lambda X: [X[0]], [0.3, 0.2], 0.2, COS, cells=10)
