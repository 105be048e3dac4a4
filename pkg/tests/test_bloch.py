import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapsolitons.bloch import (
    PerturbationPotential,
    PeriodicPotential,
    basis_vectors,
    build_planewave_operator,
    evaluate_bloch_on_grid,
    group_velocity,
    solve_bloch,
    torus_grid,
)
from gapsolitons.errors import ConfigError, DegenerateModeError, ResolutionError

COS = PeriodicPotential.cosine_product(2)


def test_free_operator_1d_is_diagonal():
    H = build_planewave_operator(PeriodicPotential.zero(1), [0.0], 1)
    assert np.allclose(H, np.diag([1.0, 0.0, 1.0]))


def test_cosine_product_coupling_pattern():
    G = 3
    H = build_planewave_operator(COS, [0.1, 0.2], G)
    etas = basis_vectors(2, G)
    interior = np.all(np.abs(etas) < G, axis=1)
    off = H - np.diag(np.diag(H))
    counts = (np.abs(off) > 0).sum(axis=1)
    assert np.all(counts[interior] == 4)
    assert np.allclose(off[np.abs(off) > 0], 0.25)


def test_reference_eigenvalue():
    modes = solve_bloch(COS, [-0.2, -0.4], 12, 4)
    assert abs(modes[3].omega - 0.9942) < 1e-3


def test_free_band_and_eigenvector():
    m = solve_bloch(PeriodicPotential.zero(2), [0.1, 0.2], 2, 1)[0]
    assert abs(m.omega - 0.05) < 1e-14
    star = np.argmax(np.abs(m.coeffs))
    assert tuple(m.etas[star]) == (0, 0)
    assert abs(abs(m.coeffs[star]) - 1) < 1e-12
    # quadratic band: v = 2 (k + eta*)
    assert np.allclose(group_velocity(m), [0.2, 0.4])


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_inversion_symmetry_of_bands(k1, k2):
    a = solve_bloch(COS, [k1, k2], 4, 5)
    b = solve_bloch(COS, [-k1, -k2], 4, 5)
    assert np.allclose([m.omega for m in a], [m.omega for m in b], atol=1e-11)
    for ma, mb in zip(a, b):
        if not (ma.degenerate or mb.degenerate):
            assert np.allclose(ma.group_velocity, -mb.group_velocity, atol=1e-8)


def test_hellmann_feynman_matches_finite_difference():
    rng = np.random.default_rng(1)
    h = 1e-4
    for _ in range(5):
        k = rng.uniform(-0.5, 0.5, 2)
        n = int(rng.integers(1, 5))
        m = solve_bloch(COS, k, 6, 5)[n - 1]
        if m.degenerate:
            continue
        fd = []
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd.append((solve_bloch(COS, k + e, 6, 5)[n - 1].omega - solve_bloch(COS, k - e, 6, 5)[n - 1].omega) / (2 * h))
        assert np.allclose(m.group_velocity, fd, atol=1e-6)


def test_degenerate_mode_has_no_group_velocity():
    # free bands 2 and 3 coincide at k = 0 in 1D (eta = -1, +1)
    m = solve_bloch(PeriodicPotential.zero(1), [0.0], 2, 3)[1]
    assert m.degenerate and m.group_velocity is None
    with pytest.raises(DegenerateModeError):
        group_velocity(m)


def test_gauge_and_normalisation():
    for m in solve_bloch(COS, [0.3, -0.1], 5, 4):
        assert abs(np.linalg.norm(m.coeffs) - 1) < 1e-12
        star = np.argmax(np.abs(m.coeffs))
        assert abs(m.coeffs[star].imag) < 1e-14 and m.coeffs[star].real > 0
        assert m.residual < 1e-10


def test_grid_sampling_constant_and_single_mode():
    m = solve_bloch(PeriodicPotential.zero(2), [0.0, 0.0], 1, 1)[0]
    assert np.allclose(evaluate_bloch_on_grid(m, 6), 1.0)
    c = np.zeros(9, dtype=complex)
    etas = basis_vectors(2, 1)
    c[np.flatnonzero((etas == [1, 0]).all(axis=1))[0]] = 1.0
    m.coeffs = c
    x = torus_grid(8, 2)
    assert np.allclose(evaluate_bloch_on_grid(m, 8), np.exp(1j * x[..., 0]))


def test_grid_sampling_parseval_and_direct_sum():
    rng = np.random.default_rng(3)
    m = solve_bloch(COS, [0.1, 0.3], 3, 2)[1]
    m.coeffs = rng.normal(size=m.coeffs.size) + 1j * rng.normal(size=m.coeffs.size)
    M = 16
    p = evaluate_bloch_on_grid(m, M)
    assert abs(np.mean(np.abs(p) ** 2) - np.sum(np.abs(m.coeffs) ** 2)) < 1e-12 * np.sum(np.abs(m.coeffs) ** 2)
    x = torus_grid(M, 2)
    for idx in [(0, 0), (3, 7), (15, 2)]:
        direct = np.sum(m.coeffs * np.exp(1j * (m.etas @ x[idx])))
        assert abs(direct - p[idx]) < 1e-12


def test_grid_sampling_guard():
    m = solve_bloch(COS, [0.0, 0.0], 3, 1)[0]
    with pytest.raises(ResolutionError):
        evaluate_bloch_on_grid(m, 10)


def test_potential_validation_and_text_roundtrip():
    with pytest.raises(ConfigError):
        PeriodicPotential(2, {(1, 0): 1.0})
    with pytest.raises(ConfigError):
        build_planewave_operator(PeriodicPotential.cosine_sum([1.0, 1.0]), [0, 0], 0)
    V = PeriodicPotential.cosine_sum([0.5, 2.0])
    assert PeriodicPotential.from_text(V.to_text()) == V
    pts = np.array([[0.3, 1.1], [2.0, -0.4]])
    assert np.allclose(V.evaluate(pts), 0.5 * np.cos(pts[:, 0]) + 2.0 * np.cos(pts[:, 1]))
    assert np.allclose(COS.evaluate(pts), np.cos(pts[:, 0]) * np.cos(pts[:, 1]))


def test_perturbation_cosine_terms():
    from fractions import Fraction as F

    W = PerturbationPotential.cosine_terms([(2.0, (F(2, 5), F(4, 5)))])
    pts = np.array([[0.3, 1.1], [2.0, -0.4]])
    assert np.allclose(W.evaluate(pts).real, 2.0 * np.cos(0.4 * pts[:, 0] + 0.8 * pts[:, 1]))
    assert W.exact_vectors is not None
