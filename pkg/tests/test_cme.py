import itertools
from fractions import Fraction as F

import numpy as np
import pytest

from gapsolitons.bloch import PerturbationPotential, PeriodicPotential, evaluate_bloch_on_grid, solve_bloch
from gapsolitons.cme import (
    CarrierSet,
    CmeModel,
    gamma_tensor,
    kappa_matrix,
    resonant_triples,
    symmetric_four_mode_model,
)
from gapsolitons.dispersion import symbol_batch
from gapsolitons.errors import ConfigError

COS1 = PeriodicPotential.cosine_sum([1.0])


def pair_1d(q):
    """Two band-1 carriers at +-q for V = cos x."""
    return CarrierSet.from_bloch(COS1, [(1, (q,)), (1, (-q,))], 6)


def test_carrier_frequency_mismatch_rejected():
    with pytest.raises(ConfigError):
        CarrierSet.from_bloch(COS1, [(1, (F(3, 10),)), (2, (F(3, 10),))], 6)


def test_single_carrier_always_resonant():
    cs = CarrierSet.from_bloch(COS1, [(1, (F(1, 7),))], 4)
    assert resonant_triples(cs, 0) == [(0, 0, 0)]


def test_two_carrier_resonances():
    cs = pair_1d(F(3, 10))
    assert resonant_triples(cs, 0) == [(0, 0, 0), (0, 1, 1), (1, 1, 0)]
    half = pair_1d(F(1, 4))
    assert (1, 0, 1) in resonant_triples(half, 0)


def test_kappa_zero_without_perturbation():
    cs = pair_1d(F(3, 10))
    assert np.all(kappa_matrix(cs, PerturbationPotential.zero(1)) == 0)


def test_kappa_two_carrier_formula():
    q = F(3, 10)
    cs = pair_1d(q)
    # W = 2 cos((k1 - k2) x) + 1
    W = PerturbationPotential.cosine_terms([(2.0, (2 * q,)), (1.0, (0,))])
    kappa = kappa_matrix(cs, W)
    assert np.allclose(np.diag(kappa), -1.0, atol=1e-12)
    m = 64
    p1, p2 = (evaluate_bloch_on_grid(mode, m) for mode in cs.modes)
    assert abs(kappa[0, 1] - (-np.mean(p2 * p1.conj()))) < 1e-12


def test_kappa_gauge_covariance(ex41_carriers):
    cs = ex41_carriers
    W = PerturbationPotential.cosine_terms([(0.5, (F(2, 5), F(4, 5))), (0.3, (F(2, 5), F(-4, 5)))])
    k0 = kappa_matrix(cs, W)
    theta = np.random.default_rng(0).uniform(0, 2 * np.pi, len(cs))
    for mode, t in zip(cs.modes, theta):
        mode.coeffs = mode.coeffs * np.exp(1j * t)
    k1 = kappa_matrix(cs, W)
    D = np.diag(np.exp(1j * theta))
    assert np.allclose(k1, D.conj().T @ k0 @ D, atol=1e-12)
    v = cs.group_velocities()
    Ks = np.random.default_rng(1).normal(size=(20, 2))
    e0 = np.linalg.eigvalsh(symbol_batch(CmeModel(v, k0), Ks))
    e1 = np.linalg.eigvalsh(symbol_batch(CmeModel(v, k1), Ks))
    assert np.allclose(e0, e1, atol=1e-10)


def test_gamma_zero_and_free_value():
    cs = CarrierSet.from_bloch(PeriodicPotential.zero(1), [(1, (F(1, 5),))], 2)
    assert all(v == 0 for v in gamma_tensor(cs, PeriodicPotential.zero(1)).values())
    g = gamma_tensor(cs, PeriodicPotential.constant(1.0, 1))
    assert abs(g[(0, 0, 0, 0)] + 1) < 1e-14


def test_gamma_single_carrier_is_minus_l4_norm():
    cs = CarrierSet.from_bloch(COS1, [(1, (F(1, 5),))], 6)
    p = evaluate_bloch_on_grid(cs.modes[0], 128)
    g = gamma_tensor(cs, PeriodicPotential.constant(1.0, 1))
    assert abs(g[(0, 0, 0, 0)] + np.mean(np.abs(p) ** 4)) < 1e-12


def test_gamma_symmetries(ex41_gamma):
    g = ex41_gamma
    assert len(g) == 36
    for (j, a, b, c), v in g.items():
        assert abs(np.conj(v) - g[(c, b, a, j)]) < 1e-10
        assert abs(v - g[(j, c, b, a)]) < 1e-10


def test_model_json_roundtrip(tmp_path, ex41_model):
    path = tmp_path / "m.json"
    ex41_model.save(path)
    back = CmeModel.load(path)
    assert np.array_equal(back.kappa, ex41_model.kappa)
    assert np.array_equal(back.group_velocities, ex41_model.group_velocities)
    assert back.gamma == ex41_model.gamma


def test_model_validation():
    with pytest.raises(ConfigError):
        CmeModel([[1.0], [-1.0]], [[0, 1], [2, 0]])
    with pytest.raises(ConfigError):
        CmeModel.from_dict({"format": "other"})


def test_nonlinearity_matches_direct_sum(ex41_model):
    rng = np.random.default_rng(2)
    B = rng.normal(size=(4, 7)) + 1j * rng.normal(size=(4, 7))
    direct = np.zeros_like(B)
    for (j, a, b, c), v in ex41_model.gamma.items():
        direct[j] += v * B[a] * B[b].conj() * B[c]
    assert np.allclose(ex41_model.nonlinearity(B), direct, atol=1e-13)


def test_symmetric_model_structure():
    m = symmetric_four_mode_model(3, 1, 1, (0, 1), (1, 0))
    assert np.allclose(m.kappa, m.kappa.conj().T)
    for i, j in itertools.product(range(4), repeat=2):
        assert m.kappa[i, j] == m.kappa[j, i].conjugate()
    assert np.allclose(m.group_velocities, [[0, 1], [0, -1], [1, 0], [-1, 0]])
