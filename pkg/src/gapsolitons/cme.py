"""Coupled-mode model: resonances, linear coupling matrix and cubic tensor.

Carrier indices are 0-based array positions throughout.  Integrals over the
torus use the mean-normalised convention documented in
:mod:`gapsolitons.bloch`; they are evaluated exactly as FFT quadratures of
band-limited products on a zero-padded grid.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .bloch import PerturbationPotential, PeriodicPotential, evaluate_bloch_on_grid, solve_bloch
from .errors import ConfigError, NumericalError, ResolutionError

RESONANCE_TOL = 1e-9
MODEL_FORMAT = "gapsolitons.cme-model"
MODEL_VERSION = 1


def lattice_offset(q, exact=None, tol=RESONANCE_TOL):
    """Return the integer vector nearest to ``q`` if ``q`` lies in ``Z^d``, else ``None``.

    When ``exact`` (a tuple of Fractions) is given the decision is exact.
    """
    if exact is not None:
        if all(f.denominator == 1 for f in exact):
            return np.array([int(f) for f in exact])
        return None
    q = np.asarray(q, dtype=float)
    r = np.round(q)
    if np.max(np.abs(q - r), initial=0.0) <= tol:
        return r.astype(int)
    return None


def _combine_exact(parts, signs):
    if any(p is None for p in parts):
        return None
    return tuple(sum((s * Fraction(c) for s, c in zip(signs, comps)), Fraction(0)) for comps in zip(*parts))


@dataclass
class CarrierSet:
    """``N`` Bloch carriers sharing the frequency ``omega0``."""

    modes: list
    omega0: float
    tol_omega: float = 1e-6

    def __post_init__(self):
        if not self.modes:
            raise ConfigError("need at least one carrier")
        for j, m in enumerate(self.modes):
            if abs(m.omega - self.omega0) > self.tol_omega:
                raise ConfigError(
                    f"carrier {j} (band {m.band}, k={m.k}) has omega={m.omega:.12g}, "
                    f"not within {self.tol_omega:g} of omega0={self.omega0:.12g}"
                )
        for i, j in itertools.combinations(range(len(self.modes)), 2):
            a, b = self.modes[i], self.modes[j]
            if a.band == b.band and np.allclose(a.k, b.k, atol=1e-14):
                raise ConfigError(f"carriers {i} and {j} coincide")
            if np.allclose(a.k, b.k, atol=1e-14) and a.cutoff == b.cutoff:
                overlap = abs(np.vdot(b.coeffs, a.coeffs))
                if overlap > 1e-8:
                    raise ConfigError(f"carriers {i} and {j} share k but are not orthogonal ({overlap:.2e})")

    @classmethod
    def from_bloch(cls, potential, specs, cutoff, tol_omega=1e-6):
        """Solve for carriers given as ``[(band, k), ...]`` (band 1-based)."""
        modes = []
        for band, k in specs:
            modes.append(solve_bloch(potential, k, cutoff, band)[band - 1])
        omega0 = float(np.mean([m.omega for m in modes]))
        return cls(modes, omega0, tol_omega)

    def __len__(self):
        return len(self.modes)

    @property
    def dim(self):
        return self.modes[0].dim

    @property
    def wavevectors(self):
        return np.array([m.k for m in self.modes])

    @property
    def exact_wavevectors(self):
        return [m.k_exact for m in self.modes]

    @property
    def cutoff(self):
        return max(m.cutoff for m in self.modes)

    def group_velocities(self):
        out = []
        for j, m in enumerate(self.modes):
            if m.group_velocity is None:
                raise NumericalError(f"carrier {j} is degenerate; group velocity undefined")
            out.append(m.group_velocity)
        return np.array(out)


def resonant_triples(carriers, j):
    """All ``(alpha, beta, gamma)`` with ``k_alpha - k_beta + k_gamma in k_j + Z^d``.

    Returned in lexicographic order.
    """
    ks = carriers.wavevectors
    ex = carriers.exact_wavevectors
    n = len(carriers)
    out = []
    for a, b, g in itertools.product(range(n), repeat=3):
        q = ks[a] - ks[b] + ks[g] - ks[j]
        qe = _combine_exact([ex[a], ex[b], ex[g], ex[j]], [1, -1, 1, -1])
        if lattice_offset(q, qe) is not None:
            out.append((a, b, g))
    return out


def _quadrature_points(carriers, extra_radius, factor):
    from scipy.fft import next_fast_len

    need = factor * (2 * carriers.cutoff + 1) + 2 * extra_radius
    return next_fast_len(need)


def _fields(carriers, m):
    return [evaluate_bloch_on_grid(mode, m) for mode in carriers.modes]


def _mean_with_phase(f, q):
    """Torus mean of ``f(x) exp(i q.x)`` for integer ``q`` (exact for band-limited ``f``)."""
    m = f.shape[0]
    F = np.fft.fftn(f) / f.size
    # mean(f e^{iqx}) is the Fourier coefficient of f at -q
    return F[tuple((-qi) % m for qi in q)]


def kappa_matrix(carriers, W, m=None):
    """Linear coupling matrix from the perturbation ``W``.

    ``kappa_jr = -sum_m a_m <exp(i (k_r + l_m - k_j).x) p_r, p_j>`` over the
    ``m`` with ``k_r + l_m - k_j`` in ``Z^d``.
    """
    n = len(carriers)
    if W.amplitudes.size and W.dim != carriers.dim:
        raise ConfigError("perturbation dimension does not match carriers")
    m = m or _quadrature_points(carriers, 0, 2)
    if m < 2 * (2 * carriers.cutoff + 1):
        raise ResolutionError(f"quadrature grid {m} too small for cutoff {carriers.cutoff}")
    p = _fields(carriers, m)
    ks = carriers.wavevectors
    ex = carriers.exact_wavevectors
    wex = W.exact_vectors
    kappa = np.zeros((n, n), dtype=complex)
    for j, r in itertools.product(range(n), repeat=2):
        prod = p[r] * p[j].conj()
        for idx, (a, l) in enumerate(zip(W.amplitudes, W.vectors)):
            qe = None
            if wex is not None:
                qe = _combine_exact([ex[r], wex[idx], ex[j]], [1, 1, -1])
            q = lattice_offset(ks[r] + l - ks[j], qe)
            if q is None:
                continue
            kappa[j, r] -= a * _mean_with_phase(prod, q)
    err = np.abs(kappa - kappa.conj().T).max(initial=0.0)
    if err > 1e-9:
        raise NumericalError(f"coupling matrix is not Hermitian (deviation {err:.2e}); gauge or quadrature bug")
    return kappa


def gamma_tensor(carriers, sigma, m=None):
    """Cubic coefficients ``{(j, alpha, beta, gamma): value}`` over resonant quadruples.

    ``gamma_j^{abg} = -< sigma p_a conj(p_b) p_g exp(i q.x), p_j >`` with the
    integer vector ``q = k_a - k_b + k_g - k_j``.
    """
    if sigma.dim != carriers.dim:
        raise ConfigError("nonlinearity coefficient dimension does not match carriers")
    m = m or _quadrature_points(carriers, sigma.radius, 4)
    if m < 4 * (2 * carriers.cutoff + 1):
        raise ResolutionError(f"quadrature grid {m} too small for quartic products (cutoff {carriers.cutoff})")
    p = _fields(carriers, m)
    s = sigma.on_torus_grid(m)
    ks = carriers.wavevectors
    ex = carriers.exact_wavevectors
    out = {}
    for j in range(len(carriers)):
        for a, b, g in resonant_triples(carriers, j):
            qe = _combine_exact([ex[a], ex[b], ex[g], ex[j]], [1, -1, 1, -1])
            q = lattice_offset(ks[a] - ks[b] + ks[g] - ks[j], qe)
            f = s * p[a] * p[b].conj() * p[g] * p[j].conj()
            out[(j, a, b, g)] = -complex(_mean_with_phase(f, q))
    return out


@dataclass
class CmeModel:
    """Linear part (group velocities, coupling ``kappa``) and cubic tensor of a CME system.

    The system reads ``i (d_T A_j + v_j . grad A_j) + sum_r kappa_jr A_r + N_j(A) = 0``
    with ``N_j(A) = sum gamma_j^{abg} A_a conj(A_b) A_g``.
    """

    group_velocities: np.ndarray
    kappa: np.ndarray
    gamma: dict = field(default_factory=dict)
    wavevectors: np.ndarray | None = None

    def __post_init__(self):
        self.group_velocities = np.atleast_2d(np.asarray(self.group_velocities, dtype=float))
        self.kappa = np.asarray(self.kappa, dtype=complex)
        n = self.group_velocities.shape[0]
        if self.kappa.shape != (n, n):
            raise ConfigError(f"kappa must be {n}x{n}")
        if np.abs(self.kappa - self.kappa.conj().T).max() > 1e-9:
            raise ConfigError("kappa must be Hermitian")
        self.gamma = {tuple(int(i) for i in key): complex(v) for key, v in self.gamma.items()}
        for key in self.gamma:
            if len(key) != 4 or not all(0 <= i < n for i in key):
                raise ConfigError(f"bad cubic coefficient index {key}")
        if self.wavevectors is not None:
            self.wavevectors = np.asarray(self.wavevectors, dtype=float)
        self._plan = None

    @property
    def n_modes(self):
        return self.group_velocities.shape[0]

    @property
    def dim(self):
        return self.group_velocities.shape[1]

    @classmethod
    def from_carriers(cls, carriers, W=None, sigma=None, m=None):
        W = W if W is not None else PerturbationPotential.zero(carriers.dim)
        sigma = sigma if sigma is not None else PeriodicPotential.zero(carriers.dim)
        return cls(
            carriers.group_velocities(),
            kappa_matrix(carriers, W, m),
            gamma_tensor(carriers, sigma),
            carriers.wavevectors,
        )

    def with_gamma(self, gamma):
        return CmeModel(self.group_velocities, self.kappa, gamma, self.wavevectors)

    def _terms(self):
        if self._plan is None:
            plan = {}
            for (j, a, b, g), v in self.gamma.items():
                if v != 0:
                    plan.setdefault((b, g), []).append((j, a, v))
            self._plan = plan
        return self._plan

    def nonlinearity(self, B):
        """``N(B)`` pointwise for ``B`` of shape ``(N, ...)``."""
        B = np.asarray(B)
        out = np.zeros(B.shape, dtype=complex)
        for (b, g), terms in self._terms().items():
            pair = B[b].conj() * B[g]
            for j, a, v in terms:
                out[j] += v * B[a] * pair
        return out

    def nonlinearity_vector(self, eta):
        return self.nonlinearity(np.asarray(eta, dtype=complex).reshape(-1, 1))[:, 0]

    # serialization -----------------------------------------------------

    def to_dict(self):
        d = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "N": self.n_modes,
            "d": self.dim,
            "group_velocities": self.group_velocities.tolist(),
            "kappa": [[[z.real, z.imag] for z in row] for row in self.kappa],
            "gamma": [
                {"j": j, "abg": [a, b, g], "value": [v.real, v.imag]}
                for (j, a, b, g), v in sorted(self.gamma.items())
            ],
        }
        if self.wavevectors is not None:
            d["wavevectors"] = self.wavevectors.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT:
            raise ConfigError(f"not a CME model file (format={d.get('format')!r})")
        if d.get("version") != MODEL_VERSION:
            raise ConfigError(f"unsupported CME model version {d.get('version')}")
        kappa = np.array([[complex(re, im) for re, im in row] for row in d["kappa"]])
        gamma = {(e["j"], *e["abg"]): complex(*e["value"]) for e in d.get("gamma", [])}
        model = cls(d["group_velocities"], kappa, gamma, d.get("wavevectors"))
        if model.n_modes != d["N"] or model.dim != d["d"]:
            raise ConfigError("CME model header disagrees with its arrays")
        return model

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def symmetric_four_mode_kappa(alpha1, alpha2, alpha3):
    """Coupling matrix with ``kappa_12 = kappa_34 = a1``, ``kappa_14 = kappa_32 = a2``,
    ``kappa_13 = kappa_42 = a3`` and zero diagonal (Hermitian completion)."""
    a1, a2, a3 = complex(alpha1), complex(alpha2), complex(alpha3)
    c = np.conj
    return np.array(
        [
            [0, a1, a3, a2],
            [c(a1), 0, c(a2), c(a3)],
            [c(a3), a2, 0, a1],
            [c(a2), a3, c(a1), 0],
        ],
        dtype=complex,
    )


def symmetric_four_mode_model(alpha1, alpha2, alpha3, v, w, gamma=None):
    """Hand-authored ``N = 4`` model with velocities ``(v, -v, w, -w)``."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return CmeModel(np.array([v, -v, w, -w]), symmetric_four_mode_kappa(alpha1, alpha2, alpha3), gamma or {})
