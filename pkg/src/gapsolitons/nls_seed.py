"""Asymptotic seed near a band edge: effective NLS, radial ground state, CME ansatz.

Near a simple band edge ``Omega_*`` with definite Hessian ``H``, a standing
CME solution with ``Omega = Omega_* + eps^2 lam`` is approximated by
``B(X) ~ eps C(eps X) exp(i K0.X) eta`` where ``C`` solves

    lam C + 1/2 div(H grad C) + Gamma |C|^2 C = 0.

With ``H`` replaced by ``mu I`` (``mu`` the mean Hessian eigenvalue) radial
solutions obey ``lam C + (mu/2) (C'' + (d-1)/rho C') + Gamma C^3 = 0``.
Ground states exist only in the focusing regime ``lam mu < 0`` and
``Gamma mu > 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.special import kv

from .dispersion import symbol_batch
from .errors import ConfigError, NumericalError, ResolutionError
from .grid import UniformGrid, VectorField

LOGGER = logging.getLogger(__name__)


@dataclass
class NlsProblem:
    """Coefficients of ``lam C + 1/2 div(H grad C) + Gamma C^3 = 0``.

    ``hessian`` is ``D^2 Omega(K0)``.  Problems written directly in the
    isotropic form ``lam C + c Delta C + Gamma C^3 = 0`` use :meth:`isotropic`.
    """

    lam: float
    hessian: np.ndarray
    gamma: float
    dim: int
    gamma_imag: float = 0.0

    def __post_init__(self):
        self.hessian = np.atleast_2d(np.asarray(self.hessian, dtype=float))
        if self.hessian.shape != (self.dim, self.dim):
            raise ConfigError("Hessian shape does not match dimension")
        if not np.allclose(self.hessian, self.hessian.T, atol=1e-10):
            raise ConfigError("Hessian is not symmetric")
        self.hessian = 0.5 * (self.hessian + self.hessian.T)

    @classmethod
    def isotropic(cls, lam, coeff, gamma, dim):
        """Problem ``lam C + coeff Delta C + gamma C^3 = 0``."""
        return cls(float(lam), 2.0 * coeff * np.eye(dim), float(gamma), int(dim))

    @property
    def mu(self):
        """Mean eigenvalue of the Hessian (isotropic surrogate)."""
        return float(np.trace(self.hessian)) / self.dim

    @property
    def laplacian_coeff(self):
        """Coefficient of ``Delta`` in the isotropic equation, ``mu / 2``."""
        return 0.5 * self.mu

    @property
    def is_isotropic(self):
        off = self.hessian - self.mu * np.eye(self.dim)
        # finite-difference Hessians carry ~1e-8 noise; treat that as isotropic
        return bool(np.abs(off).max() <= 1e-6 * max(1.0, abs(self.mu)))

    @property
    def decay_rate(self):
        return float(np.sqrt(-self.lam / self.laplacian_coeff))

    def check_focusing(self):
        """Raise unless a localized ground state can exist."""
        mu = self.mu
        if mu == 0 or self.lam == 0 or self.gamma == 0:
            raise ConfigError("lam, mu and Gamma must be nonzero for a localized state")
        if not (self.lam * mu < 0 and self.gamma * mu > 0):
            raise ConfigError(
                f"non-focusing signs: lam={self.lam:g}, mu={mu:g}, Gamma={self.gamma:g} "
                "(need lam*mu < 0 and Gamma*mu > 0)"
            )


def effective_nls_coeffs(model, edge, lam=1.0):
    """Build the effective NLS at a band edge.

    ``Gamma = eta^H N(eta)`` with ``eta`` the (normalized) edge eigenvector.
    """
    if edge.definiteness not in ("positive-definite", "negative-definite"):
        raise NumericalError(f"edge Hessian is {edge.definiteness}; no NLS ground state")
    eta = np.asarray(edge.eigenvector, dtype=complex)
    eta = eta / np.linalg.norm(eta)
    G = complex(np.vdot(eta, model.nonlinearity_vector(eta)))
    if abs(G.imag) > 1e-9 * max(1.0, abs(G)):
        LOGGER.warning("Gamma has imaginary part %.3e", G.imag)
    return NlsProblem(float(lam), edge.hessian, G.real, edge.K0.size, gamma_imag=G.imag)


# ---------------------------------------------------------------------------
# radial shooting


@dataclass
class RadialProfile:
    rho: np.ndarray
    values: np.ndarray
    problem: NlsProblem | None = None

    @property
    def amplitude(self):
        return float(self.values[0])

    @property
    def rho_max(self):
        return float(self.rho[-1])

    def __call__(self, r):
        """Profile at radii ``r`` (zero beyond ``rho_max``)."""
        r = np.asarray(r, dtype=float)
        spline = self._spline()
        out = np.zeros(r.shape)
        inside = r <= self.rho_max
        out[inside] = spline(r[inside])
        return out

    def _spline(self):
        if getattr(self, "_cached", None) is None:
            # even extension keeps the spline smooth at the origin
            rr = np.r_[-self.rho[:0:-1], self.rho]
            vv = np.r_[self.values[:0:-1], self.values]
            self._cached = CubicSpline(rr, vv)
        return self._cached

    def e1_radius(self):
        """Radius where the profile drops to ``C(0)/e``."""
        idx = int(np.argmax(self.values < self.amplitude / np.e))
        return float(self.rho[idx])

    def check(self):
        v = self.values
        if np.any(v < 0):
            raise NumericalError("profile has a node (excited state)")
        if np.any(np.diff(v) > 1e-12 * v[0]):
            raise NumericalError("profile is not monotone decreasing")
        if v[-1] >= 1e-8 * v[0]:
            raise ResolutionError("profile has not decayed to 1e-8 at rho_max")


def _rhs(d, a, b):
    def f(r, y):
        C, dC = y
        return [dC, -(d - 1) / r * dC + a * C + b * C**3]

    return f


def _classify(problem, c0, rho0, rho_stop):
    """Integrate from the series start; return (+1 too large, -1 too small, 0 undecided), solution."""
    d = problem.dim
    a = -problem.lam / problem.laplacian_coeff
    b = -problem.gamma / problem.laplacian_coeff
    curv = (a * c0 + b * c0**3) / d
    y0 = [c0 + 0.5 * curv * rho0**2, curv * rho0]

    def crossed(r, y):
        return y[0]

    crossed.terminal = True
    crossed.direction = -1

    def turned(r, y):
        return y[1]

    turned.terminal = True
    turned.direction = 1

    sol = solve_ivp(_rhs(d, a, b), (rho0, rho_stop), y0, method="DOP853", rtol=1e-12, atol=1e-16 * c0,
                    events=(crossed, turned), dense_output=True)
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    return 0, sol


def shoot_radial(problem, rho_max=None, n_points=4001, rho0=1e-3, rtol=1e-12, max_bisect=200):
    """Nodeless radial ground state by shooting on ``C(0)``.

    The integration cannot follow the decaying solution indefinitely (the
    growing mode takes over), so beyond the point where the two bracketing
    trajectories separate the profile is continued by the linear decaying
    solution ``rho^(1-d/2) K_{d/2-1}(k rho)``, matched in value.
    """
    problem.check_focusing()
    d = problem.dim
    k = problem.decay_rate
    scale = np.sqrt(abs(problem.lam / problem.gamma))
    if rho_max is None:
        rho_max = 30.0 / k
    rho_stop = rho_max

    lo, hi = 0.0, 10 * scale
    s_hi, sol_hi = _classify(problem, hi, rho0, rho_stop)
    if s_hi != 1:
        raise NumericalError("no sign change in the shooting bracket (wrong sign regime?)")
    sol_lo = None
    it = 0
    while hi - lo > rtol * hi and it < max_bisect:
        mid = 0.5 * (lo + hi)
        s, sol = _classify(problem, mid, rho0, rho_stop)
        if s == 1:
            hi, sol_hi = mid, sol
        else:
            lo, sol_lo = mid, sol
        it += 1
    if sol_lo is None:
        raise NumericalError("bisection did not produce a lower bracket")
    c0 = 0.5 * (lo + hi)

    # where the bracketing trajectories agree the profile is trusted
    r_end = min(sol_lo.t[-1], sol_hi.t[-1])
    r = np.linspace(rho0, r_end, 20001)
    ylo = sol_lo.sol(r)[0]
    yhi = sol_hi.sol(r)[0]
    bad = np.abs(ylo - yhi) > 1e-9 * c0
    bad |= ylo <= 0
    i_m = int(np.argmax(bad)) if bad.any() else r.size - 1
    # step back so the match point sits safely in the trusted region
    i_m = max(1, int(0.9 * i_m))
    r_m = r[i_m]
    c_m = 0.5 * (ylo[i_m] + yhi[i_m])
    nu = d / 2 - 1

    def tail(x):
        return c_m * (x / r_m) ** (-nu) * kv(nu, k * x) / kv(nu, k * r_m)

    rho = np.linspace(0.0, rho_max, n_points)
    vals = np.empty_like(rho)
    near = rho < rho0
    a = -problem.lam / problem.laplacian_coeff
    b = -problem.gamma / problem.laplacian_coeff
    vals[near] = c0 + 0.5 * (a * c0 + b * c0**3) / d * rho[near] ** 2
    mid = (~near) & (rho <= r_m)
    vals[mid] = 0.5 * (sol_lo.sol(rho[mid])[0] + sol_hi.sol(rho[mid])[0])
    far = rho > r_m
    vals[far] = tail(rho[far])
    prof = RadialProfile(rho, vals, problem)
    prof.check()
    return prof


# ---------------------------------------------------------------------------
# anisotropy continuation


@dataclass
class ScalarField:
    values: np.ndarray
    grid: UniformGrid
    history: list = field(default_factory=list)

    def __call__(self, *coords):
        """Evaluate at arbitrary points by cubic interpolation (zero outside the box)."""
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator(self.grid.axes(), self.values, method="cubic",
                                         bounds_error=False, fill_value=0.0)
        pts = np.stack([np.asarray(c, dtype=float) for c in coords], axis=-1)
        return interp(pts)


def default_nls_grid(profile, points=256):
    """Box reaching ``C ~ e^-20 C0`` along the slowest-decaying direction."""
    pb = profile.problem
    d = pb.dim
    slowest = np.abs(np.linalg.eigvalsh(pb.hessian)).max() / 2
    half = 20.0 / np.sqrt(abs(pb.lam) / slowest)
    if d == 1:
        points = max(points, 1024)
    return UniformGrid.centered(half, points, d)


def _second_difference(n, h):
    main = -2.0 * np.ones(n)
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1]) / h**2


def _first_difference(n, h):
    off = np.ones(n - 1) / (2 * h)
    return sp.diags([-off, off], [-1, 1])


def _fd_operator(hessian, grid):
    """Sparse ``1/2 div(H grad)`` with homogeneous Dirichlet conditions (central differences)."""
    d = grid.dim
    eyes = [sp.identity(n, format="csr") for n in grid.shape]
    op = sp.csr_matrix((int(np.prod(grid.shape)),) * 2)

    def kron_at(mats):
        out = mats[0]
        for m in mats[1:]:
            out = sp.kron(out, m, format="csr")
        return out

    for i in range(d):
        for j in range(d):
            if hessian[i, j] == 0:
                continue
            mats = list(eyes)
            if i == j:
                mats[i] = _second_difference(grid.shape[i], grid.spacing[i])
            else:
                mats[i] = _first_difference(grid.shape[i], grid.spacing[i])
                mats[j] = _first_difference(grid.shape[j], grid.spacing[j])
            op = op + 0.5 * hessian[i, j] * kron_at(mats)
    return op.tocsc()


def nls_residual(C, problem, grid, hessian=None):
    H = problem.hessian if hessian is None else hessian
    A = _fd_operator(H, grid)
    c = C.ravel()
    return (problem.lam * c + A @ c + problem.gamma * c**3).reshape(C.shape)


def _reflect(a):
    """``a(-x)`` on a centered grid (nodes ``-L + i h``, origin at a node)."""
    return np.roll(np.flip(a), 1, axis=tuple(range(a.ndim)))


def continue_anisotropy(profile, problem=None, grid=None, steps=10, tol=1e-9, max_newton=30):
    """Deform the radial profile into a solution with the full Hessian.

    ``H_nu = mu_H I + nu (H - mu_H I)``, ``nu = 0 -> 1`` in ``steps`` steps;
    Newton on a central-difference discretization at every step.  For an
    isotropic Hessian the radial profile is returned unchanged.
    """
    problem = profile.problem if problem is None else problem
    grid = default_nls_grid(profile) if grid is None else grid
    r = np.sqrt(sum(x**2 for x in grid.mesh()))
    C = profile(r)
    if problem.is_isotropic:
        return ScalarField(C, grid)

    H = problem.hessian
    H0 = problem.mu * np.eye(problem.dim)
    history = []
    for nu in np.linspace(0, 1, steps + 1):
        Hn = H0 + nu * (H - H0)
        A = _fd_operator(Hn, grid)
        c = C.ravel().copy()
        for it in range(max_newton):
            F = problem.lam * c + A @ c + problem.gamma * c**3
            res = np.abs(F).max()
            if res < tol:
                break
            J = A + sp.diags(problem.lam + 3 * problem.gamma * c**2)
            step = spla.spsolve(J.tocsc(), F)
            # the ground state is even under x -> -x; symmetrizing removes the
            # near-null translation modes that otherwise swamp the step
            step = 0.5 * (step + _reflect(step.reshape(grid.shape)).ravel())
            if np.abs(step).max() <= 1e-12 * np.abs(c).max():
                # residual floor set by the one-node asymmetry of the Dirichlet box
                if res > 100 * tol:
                    raise NumericalError(f"Newton stagnated at nu={nu:.3f} (residual {res:.2e}); enlarge the box")
                break
            damp = 1.0
            for _ in range(7):
                trial = c - damp * step
                Ft = problem.lam * trial + A @ trial + problem.gamma * trial**3
                if np.abs(Ft).max() < res:
                    break
                damp *= 0.5
            c = trial
        else:
            raise NumericalError(f"Newton stalled at nu={nu:.3f} (residual {res:.2e})")
        history.append((float(nu), float(res), it))
        C = c.reshape(grid.shape)
    LOGGER.info("anisotropy continuation: %s", history)
    return ScalarField(C, grid, history)


# ---------------------------------------------------------------------------
# CME ansatz


def _envelope_on(C, grid, eps):
    X = grid.mesh()
    if isinstance(C, RadialProfile):
        return C(eps * np.sqrt(sum(x**2 for x in X)))
    return C(*[eps * x for x in X])


def build_cme_ansatz(C, edge, eps, grid, model=None, tracked=False, guard=1e-6):
    """Leading-order CME seed ``eps C(eps X) exp(i K0.X) eta``.

    ``C`` is a :class:`RadialProfile` or :class:`ScalarField`.  With
    ``tracked=True`` (``model`` required) each Fourier mode ``K`` carries the
    band eigenvector ``eta(K)`` instead of the fixed ``eta(K0)``, which removes
    the ``O(eps^2)`` transport residual of the fixed-vector form.
    """
    K0 = np.atleast_1d(np.asarray(edge.K0, dtype=float))
    eta0 = np.asarray(edge.eigenvector, dtype=complex)
    env = eps * _envelope_on(C, grid, eps)
    peak = np.abs(env).max()
    probe = VectorField(env[None], grid)
    if peak == 0 or probe.boundary_shell_max() > guard * peak:
        raise ResolutionError("envelope is not contained in the grid (boundary value too large)")
    X = grid.mesh()
    phase = np.exp(1j * sum(k * x for k, x in zip(K0, X)))
    scalar = env * phase
    if not tracked:
        return VectorField(eta0.reshape(-1, *([1] * grid.dim)) * scalar[None], grid)
    if model is None:
        raise ConfigError("tracked ansatz needs the CME model")
    Ks = np.stack(grid.wavenumber_mesh(), axis=-1)
    _, vecs = np.linalg.eigh(symbol_batch(model, Ks))
    eta = vecs[..., :, edge.band - 1]
    overlap = eta.conj() @ eta0
    eta = eta * np.exp(-1j * np.angle(overlap))[..., None]
    S = np.fft.fftn(scalar)
    B = np.fft.ifftn(np.moveaxis(eta, -1, 0) * S[None], axes=tuple(range(1, grid.dim + 1)))
    return VectorField(B, grid)
