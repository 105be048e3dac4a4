"""Bloch eigenvalue problem for 2*pi-periodic potentials in a plane-wave basis.

Conventions
-----------
A periodic function is stored by its Fourier coefficients
``f(x) = sum_eta f_eta exp(i eta.x)`` with ``eta`` in ``Z^d``.  Inner products
on the torus are *mean* normalised,

    <f, g> = (2 pi)^{-d} int_T f conj(g) dx,

so plane waves are orthonormal and a Bloch function with coefficient vector
``c`` has ``<p, p> = sum |c_eta|^2 = 1``.  Every coupling coefficient in
:mod:`gapsolitons.cme` uses the same convention.

The truncated basis is ``{eta : |eta|_inf <= G}`` in lexicographic order
(first coordinate slowest).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigError, DegenerateModeError, NumericalError, ResolutionError

DEGENERACY_RTOL = 1e-8
GAUGE_TIE_TOL = 1e-12


def _as_vector(k, dim=None):
    k = np.atleast_1d(np.asarray([float(c) for c in np.ravel(k)], dtype=float))
    if dim is not None and k.size != dim:
        raise ConfigError(f"wavevector {k} does not have dimension {dim}")
    return k


def _exact_or_none(k):
    vals = list(np.ravel(k)) if not isinstance(k, (list, tuple)) else list(k)
    if all(isinstance(v, (Fraction, int, np.integer)) for v in vals):
        return tuple(Fraction(v) for v in vals)
    return None


@dataclass
class PeriodicPotential:
    """Real ``2 pi Z^d``-periodic function given by finitely many Fourier coefficients."""

    dim: int
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for eta, value in self.coeffs.items():
            eta = tuple(int(e) for e in np.atleast_1d(eta))
            if len(eta) != self.dim:
                raise ConfigError(f"lattice vector {eta} has wrong dimension (d={self.dim})")
            if value != 0:
                clean[eta] = complex(value)
        self.coeffs = clean
        for eta, value in clean.items():
            partner = clean.get(tuple(-e for e in eta), 0.0)
            if abs(partner - np.conj(value)) > 1e-12 * max(1.0, abs(value)):
                raise ConfigError(
                    f"potential is not real: coefficient at {eta} is {value}, at its negative {partner}"
                )

    @property
    def radius(self):
        """Largest ``|eta|_inf`` carrying a nonzero coefficient."""
        return max((max(abs(e) for e in eta) for eta in self.coeffs), default=0)

    @classmethod
    def zero(cls, dim):
        return cls(dim, {})

    @classmethod
    def constant(cls, value, dim):
        return cls(dim, {(0,) * dim: value})

    @classmethod
    def cosine_product(cls, dim=2, amplitude=1.0):
        """``amplitude * prod_i cos(x_i)``."""
        coeffs = {}
        for signs in itertools.product((-1, 1), repeat=dim):
            coeffs[signs] = amplitude / 2**dim
        return cls(dim, coeffs)

    @classmethod
    def cosine_sum(cls, amplitudes):
        """``sum_i a_i cos(x_i)`` for a list of per-axis amplitudes."""
        dim = len(amplitudes)
        coeffs = {}
        for i, a in enumerate(amplitudes):
            e = [0] * dim
            e[i] = 1
            coeffs[tuple(e)] = coeffs.get(tuple(e), 0) + a / 2
            e[i] = -1
            coeffs[tuple(e)] = coeffs.get(tuple(e), 0) + a / 2
        return cls(dim, coeffs)

    def evaluate(self, points):
        """Evaluate at points of shape ``(..., d)``."""
        points = np.asarray(points, dtype=float)
        out = np.zeros(points.shape[:-1], dtype=complex)
        for eta, value in self.coeffs.items():
            out += value * np.exp(1j * points @ np.asarray(eta, dtype=float))
        return out.real

    def on_torus_grid(self, m):
        """Values on the ``m^d`` grid of ``[0, 2 pi)^d`` (exact by inverse FFT)."""
        if m <= 2 * self.radius:
            raise ResolutionError(f"grid of {m} points cannot represent potential of radius {self.radius}")
        spec = np.zeros((m,) * self.dim, dtype=complex)
        for eta, value in self.coeffs.items():
            spec[tuple(e % m for e in eta)] += value
        return (np.fft.ifftn(spec) * m**self.dim).real

    def to_text(self):
        lines = [f"d = {self.dim}"]
        for eta in sorted(self.coeffs):
            v = self.coeffs[eta]
            lines.append(f"{','.join(str(e) for e in eta)} -> ({v.real!r}, {v.imag!r})")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        """Parse ``d = <dim>`` followed by lines ``e1,...,ed -> (re, im)``."""
        dim = None
        coeffs = {}
        entry = re.compile(r"^\s*([-\d,\s]+?)\s*->\s*\(\s*([^,]+)\s*,\s*([^)]+)\)\s*$")
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("d") and "=" in line:
                dim = int(line.split("=", 1)[1])
                continue
            m = entry.match(line)
            if not m:
                raise ConfigError(f"cannot parse potential entry: {raw!r}")
            eta = tuple(int(e) for e in m.group(1).split(","))
            coeffs[eta] = coeffs.get(eta, 0) + complex(float(m.group(2)), float(m.group(3)))
        if dim is None:
            raise ConfigError("potential text lacks a 'd = <dim>' line")
        return cls(dim, coeffs)


@dataclass
class PerturbationPotential:
    """``W(x) = sum_m a_m exp(i l_m . x)`` with ``a_{-m} = conj(a_m)``, ``l_{-m} = -l_m``.

    The ``l_m`` need not be integer vectors.  Exact rational components are
    kept in ``exact_vectors`` when every component was given as a
    :class:`~fractions.Fraction` or ``int``.
    """

    amplitudes: np.ndarray
    vectors: np.ndarray
    exact_vectors: list | None = None

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).ravel()
        raw = self.vectors
        self.vectors = np.atleast_2d(np.asarray(raw, dtype=float))
        if self.exact_vectors is None:
            exact = [_exact_or_none(list(v)) for v in raw] if len(self.amplitudes) else []
            self.exact_vectors = exact if exact and all(e is not None for e in exact) else None
        if self.vectors.shape[0] != self.amplitudes.size:
            raise ConfigError("need one vector per amplitude")
        self._validate()

    @property
    def dim(self):
        return self.vectors.shape[1]

    def _validate(self):
        n = self.amplitudes.size
        for i in range(n):
            for j in range(i + 1, n):
                if np.allclose(self.vectors[i], self.vectors[j], atol=1e-12):
                    raise ConfigError(f"perturbation wavevectors {i} and {j} coincide")
        for i in range(n):
            partners = [j for j in range(n) if np.allclose(self.vectors[j], -self.vectors[i], atol=1e-12)]
            if not partners:
                raise ConfigError(f"wavevector {self.vectors[i]} has no partner -l; W would not be real")
            j = partners[0]
            if abs(self.amplitudes[j] - np.conj(self.amplitudes[i])) > 1e-12 * max(1, abs(self.amplitudes[i])):
                raise ConfigError(
                    f"amplitudes at l and -l are not conjugate ({self.amplitudes[i]} vs {self.amplitudes[j]})"
                )

    @classmethod
    def zero(cls, dim):
        return cls(np.zeros(0), np.zeros((0, dim)))

    @classmethod
    def cosine_terms(cls, terms, dim=None):
        """Build ``sum_i c_i cos(l_i . x)`` from ``[(c_i, l_i), ...]``; ``l_i = 0`` is a constant."""
        amps, vecs = [], []

        def add(a, l):
            for idx, v in enumerate(vecs):
                if all(abs(float(x) - float(y)) < 1e-14 for x, y in zip(v, l)):
                    amps[idx] += a
                    return
            amps.append(complex(a))
            vecs.append(tuple(l))

        for c, l in terms:
            l = tuple(l)
            if all(float(x) == 0 for x in l):
                add(c, l)
            else:
                add(c / 2, l)
                add(c / 2, tuple(-x for x in l))
        if not vecs:
            return cls.zero(dim or 1)
        return cls(np.array(amps), vecs)

    def evaluate(self, points):
        points = np.asarray(points, dtype=float)
        out = np.zeros(points.shape[:-1], dtype=complex)
        for a, l in zip(self.amplitudes, self.vectors):
            out += a * np.exp(1j * points @ l)
        return out.real


def basis_vectors(dim, cutoff):
    """Plane-wave lattice vectors ``|eta|_inf <= cutoff`` in lexicographic order."""
    r = range(-cutoff, cutoff + 1)
    return np.array(list(itertools.product(r, repeat=dim)), dtype=int).reshape(-1, dim)


def _basis_index(eta, cutoff):
    """Index of lattice vectors (rows of ``eta``) in :func:`basis_vectors` order; -1 if outside."""
    side = 2 * cutoff + 1
    shifted = eta + cutoff
    inside = np.all((shifted >= 0) & (shifted < side), axis=-1)
    idx = np.zeros(eta.shape[:-1], dtype=int)
    for axis in range(eta.shape[-1]):
        idx = idx * side + shifted[..., axis]
    return np.where(inside, idx, -1)


def build_planewave_operator(potential, k, cutoff):
    """Galerkin matrix of ``-(grad + i k)^2 + V`` on the truncated plane-wave basis.

    Diagonal entries are ``|k + eta|^2``; the entry in row ``eta``, column
    ``eta'`` is ``V_hat(eta - eta')``.
    """
    k = _as_vector(k, potential.dim)
    if cutoff < potential.radius:
        raise ConfigError(
            f"plane-wave cutoff G={cutoff} is smaller than the potential's Fourier radius {potential.radius}"
        )
    etas = basis_vectors(potential.dim, cutoff)
    n = etas.shape[0]
    H = np.zeros((n, n), dtype=complex)
    H[np.arange(n), np.arange(n)] = ((k + etas) ** 2).sum(axis=1)
    rows = np.arange(n)
    for delta, value in potential.coeffs.items():
        cols = _basis_index(etas - np.asarray(delta), cutoff)
        ok = cols >= 0
        H[rows[ok], cols[ok]] += value
    return H


@dataclass
class BlochMode:
    """One Bloch eigenpair ``(omega_n(k), p_n(., k))`` in the plane-wave basis."""

    band: int
    k: np.ndarray
    omega: float
    coeffs: np.ndarray
    cutoff: int
    group_velocity: np.ndarray | None = None
    degenerate: bool = False
    residual: float = 0.0
    k_exact: tuple | None = None

    @property
    def dim(self):
        return self.k.size

    @property
    def etas(self):
        return basis_vectors(self.dim, self.cutoff)

    def on_torus_grid(self, m):
        return evaluate_bloch_on_grid(self, m)


def _gauge_fix(c):
    mags = np.abs(c)
    top = mags.max()
    # basis order is lexicographic, so the first candidate is the smallest eta
    star = int(np.flatnonzero(mags >= top - GAUGE_TIE_TOL)[0])
    return c * np.exp(-1j * np.angle(c[star]))


def solve_bloch(potential, k, cutoff, n_max, *, k_exact=None):
    """Lowest ``n_max`` Bloch modes at wavevector ``k``.

    Modes are normalised (``sum |c|^2 = 1``) and gauge fixed so that the
    largest-modulus coefficient is real positive (ties broken by the
    lexicographically smallest ``eta``).  A mode whose eigenvalue lies within
    ``1e-8 * max(1, |omega|)`` of a neighbour is flagged ``degenerate`` and
    gets no group velocity.
    """
    if k_exact is None:
        k_exact = _exact_or_none(k if isinstance(k, (list, tuple)) else list(np.ravel(k)))
    k = _as_vector(k, potential.dim)
    H = build_planewave_operator(potential, k, cutoff)
    if n_max > H.shape[0]:
        raise ConfigError(f"requested {n_max} bands from a basis of size {H.shape[0]}")
    try:
        w, v = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Bloch eigensolver failed at k={k}: {exc}") from exc
    etas = basis_vectors(potential.dim, cutoff)
    modes = []
    for n in range(n_max):
        c = _gauge_fix(v[:, n])
        tol = DEGENERACY_RTOL * max(1.0, abs(w[n]))
        degenerate = (n > 0 and w[n] - w[n - 1] <= tol) or (n + 1 < w.size and w[n + 1] - w[n] <= tol)
        residual = float(np.linalg.norm(H @ c - w[n] * c))
        mode = BlochMode(n + 1, k.copy(), float(w[n]), c, cutoff, None, bool(degenerate), residual, k_exact)
        if not degenerate:
            mode.group_velocity = _hellmann_feynman(c, k, etas)
        modes.append(mode)
    return modes


def _hellmann_feynman(c, k, etas):
    return (2 * (k + etas) * (np.abs(c) ** 2)[:, None]).sum(axis=0)


def group_velocity(mode):
    """``grad omega_n(k) = sum_eta 2 (k + eta) |c_eta|^2`` for a simple eigenvalue."""
    if mode.degenerate:
        raise DegenerateModeError(f"band {mode.band} is degenerate at k={mode.k}; group velocity undefined")
    return _hellmann_feynman(mode.coeffs, mode.k, mode.etas)


def min_grid_points(cutoff, factor=2):
    """Smallest FFT-friendly grid size ``>= factor * (2 G + 1)``."""
    from scipy.fft import next_fast_len

    return next_fast_len(factor * (2 * cutoff + 1))


def evaluate_bloch_on_grid(mode, m):
    """Sample ``p(x) = sum_eta c_eta exp(i eta.x)`` on the ``m^d`` grid of ``[0, 2 pi)^d``.

    Uses a zero-padded inverse FFT; ``m`` must be at least ``2 (2G + 1)`` so
    that cubic products of such fields stay alias free.
    """
    if m < 2 * (2 * mode.cutoff + 1):
        raise ResolutionError(f"grid of {m} points too small for cutoff G={mode.cutoff}; need >= {2 * (2 * mode.cutoff + 1)}")
    spec = np.zeros((m,) * mode.dim, dtype=complex)
    idx = tuple((mode.etas % m).T)
    spec[idx] = mode.coeffs
    return np.fft.ifftn(spec) * m**mode.dim


def torus_grid(m, dim):
    """Points of the ``m^d`` grid of ``[0, 2 pi)^d`` as an array ``(m, ..., m, d)``."""
    x = 2 * np.pi * np.arange(m) / m
    return np.stack(np.meshgrid(*([x] * dim), indexing="ij"), axis=-1)


def band_structure(potential, kpoints, cutoff, n_max):
    """Eigenvalues ``omega_1..omega_nmax`` for each row of ``kpoints``."""
    kpoints = np.atleast_2d(np.asarray(kpoints, dtype=float))
    out = np.empty((kpoints.shape[0], n_max))
    for i, k in enumerate(kpoints):
        H = build_planewave_operator(potential, k, cutoff)
        out[i] = np.linalg.eigvalsh(H)[:n_max]
    return out
