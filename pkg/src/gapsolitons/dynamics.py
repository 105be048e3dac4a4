"""Time evolution of the CME system and of the Gross-Pitaevskii equation.

CME:  ``i dA/dT = L A - N(A)`` with ``L`` the linear CME operator.  The
linear part is integrated exactly per Fourier mode (matrix exponential of
the Hermitian symbol); the cubic part by classical RK4 in the interaction
picture (Lawson scheme).

GP:   ``i du/dt = -Delta u + (V + eps W) u + sigma |u|^2 u`` on a box that is a
whole number of periods, by Strang splitting: half step of the pointwise
phase ``exp(-i (V + eps W + sigma |u|^2) dt/2)``, full step of the Laplacian
in Fourier space.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigError, ResolutionError
from .grid import UniformGrid, VectorField, pad_spectrum
from .petviashvili import GridSymbol, dealiased_nonlinearity_hat

LOGGER = logging.getLogger(__name__)

TAIL_GUARD = 1e-6
COMMENSURATE_TOL = 1e-9


def spectral_tail(values, grid):
    """Fraction of Fourier energy in the top octave of any axis."""
    axes = tuple(range(values.ndim - grid.dim, values.ndim))
    E = np.abs(np.fft.fftn(values, axes=axes)) ** 2
    mask = np.zeros(grid.shape, dtype=bool)
    for i, (n, k) in enumerate(zip(grid.shape, grid.wavenumber_axes())):
        top = np.abs(k) >= 0.5 * np.abs(k).max()
        shape = [1] * grid.dim
        shape[i] = n
        mask |= top.reshape(shape)
    total = E.sum()
    return float(E[..., mask].sum() / total) if total > 0 else 0.0


@dataclass
class EnvelopeState:
    field: VectorField
    T: float
    model: object

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.field.values) ** 2) * self.field.grid.cell_volume))

    def tail(self):
        return spectral_tail(self.field.values, self.field.grid)


def _lawson_factors(symbol, h):
    lam, U = symbol.eigenvalues, symbol.eigenvectors

    def factor(tau):
        # U diag(exp(-i lam tau)) U^H, shape (*grid, N, N)
        return np.einsum("...ij,...j,...kj->...ik", U, np.exp(-1j * lam * tau), U.conj())

    return factor(h), factor(h / 2)


def _mat_apply(E, Ahat):
    return np.moveaxis(np.einsum("...ij,...j->...i", E, np.moveaxis(Ahat, 0, -1)), -1, 0)


def evolve_cme(state, dt, T_end, snapshot_times=None, check_tail=True):
    """Integrate the CME from ``state.T`` to ``T_end``.

    Returns the final :class:`EnvelopeState`, and a list of states at
    ``snapshot_times`` when given (times must lie on the step lattice).
    """
    model = state.model
    grid = state.field.grid
    if check_tail and state.tail() > TAIL_GUARD:
        raise ResolutionError(f"initial envelope spectral tail {state.tail():.2e} exceeds {TAIL_GUARD:g}")
    span = T_end - state.T
    if span < 0:
        raise ConfigError("T_end precedes the current time")
    n_steps = int(round(span / dt))
    if n_steps == 0:
        return (state, [state]) if snapshot_times is not None else state
    h = span / n_steps
    peak = np.abs(state.field.values).max()
    rate = 3 * sum(abs(v) for v in model.gamma.values()) * peak**2
    if rate * h > 0.5:
        raise ConfigError(f"dt={h:g} too large for nonlinearity of size {rate:.3g}")
    symbol = GridSymbol(model, grid)
    E, E2 = _lawson_factors(symbol, h)
    axes = tuple(range(1, grid.dim + 1))
    Ahat = np.fft.fftn(state.field.values, axes=axes)

    def f(a):
        return 1j * dealiased_nonlinearity_hat(model, a)

    wanted = {}
    if snapshot_times is not None:
        for t in snapshot_times:
            idx = int(round((t - state.T) / h))
            if abs(state.T + idx * h - t) > 1e-9 * max(1.0, abs(t)) or not 0 <= idx <= n_steps:
                raise ConfigError(f"snapshot time {t} is not on the step lattice")
            wanted.setdefault(idx, []).append(t)
    snaps = []

    def record(i):
        for t in wanted.get(i, []):
            # step 0 is the initial data itself, not its FFT round trip
            values = state.field.values.copy() if i == 0 else np.fft.ifftn(Ahat, axes=axes)
            snaps.append(EnvelopeState(VectorField(values, grid), t, model))

    record(0)
    for i in range(1, n_steps + 1):
        k1 = f(Ahat)
        k2 = f(_mat_apply(E2, Ahat + 0.5 * h * k1))
        k3 = f(_mat_apply(E2, Ahat) + 0.5 * h * k2)
        k4 = f(_mat_apply(E, Ahat) + h * _mat_apply(E2, k3))
        Ahat = _mat_apply(E, Ahat + h / 6 * k1) + h / 3 * _mat_apply(E2, k2 + k3) + h / 6 * k4
        record(i)
    out = EnvelopeState(VectorField(np.fft.ifftn(Ahat, axes=axes), grid), T_end, model)
    if check_tail and out.tail() > TAIL_GUARD:
        raise ResolutionError(f"envelope spectral tail {out.tail():.2e} exceeds {TAIL_GUARD:g}; use a larger grid")
    return (out, snaps) if snapshot_times is not None else out


# ---------------------------------------------------------------------------
# Gross-Pitaevskii


def periodic_box(cells, points_per_cell, dim=2, centered=True):
    """Grid covering ``cells`` periods ``2 pi`` per axis."""
    L = 2 * np.pi * cells
    lower = -L / 2 if centered else 0.0
    return UniformGrid((lower,) * dim, (L,) * dim, (cells * points_per_cell,) * dim)


def _cells(grid):
    cells = []
    for L in grid.length:
        c = L / (2 * np.pi)
        if abs(c - round(c)) > COMMENSURATE_TOL * max(1.0, c):
            raise ConfigError(f"box side {L} is not a multiple of 2 pi")
        cells.append(int(round(c)))
    return cells


def check_commensurate(grid, vectors, exact=None, what="wavevector"):
    """Every vector must be a multiple of the box's fundamental wavevector ``1 / cells``."""
    cells = _cells(grid)
    for idx, l in enumerate(vectors):
        for i, (li, c) in enumerate(zip(l, cells)):
            if exact is not None and exact[idx] is not None:
                ok = (Fraction(exact[idx][i]) * c).denominator == 1
            else:
                ok = abs(li * c - round(li * c)) <= COMMENSURATE_TOL
            if not ok:
                raise ConfigError(
                    f"{what} {tuple(float(x) for x in l)} does not fit a box of {c} cells; "
                    f"suggested side: {suggest_cells(vectors, c)} cells"
                )


def suggest_cells(vectors, cells):
    """Smallest multiple of the common denominator near ``cells``."""
    den = 1
    for l in vectors:
        for x in l:
            den = np.lcm(den, Fraction(float(x)).limit_denominator(1000).denominator)
    return int(max(den, den * round(cells / den)))


@dataclass
class GpState:
    u: np.ndarray
    grid: UniformGrid
    t: float
    eps: float
    V: object
    W: object | None = None
    sigma: object | None = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=complex)
        if self.u.shape != self.grid.shape:
            raise ConfigError("u does not match the grid")
        _cells(self.grid)
        if self.W is not None and len(self.W.amplitudes):
            check_commensurate(self.grid, self.W.vectors, self.W.exact_vectors, "perturbation wavevector")

    def mass(self):
        return float(np.sum(np.abs(self.u) ** 2) * self.grid.cell_volume)

    def potential(self):
        pts = np.stack(self.grid.mesh(), axis=-1)
        pot = self.V.evaluate(pts) if self.V is not None else np.zeros(self.grid.shape)
        if self.W is not None and len(self.W.amplitudes):
            pot = pot + self.eps * self.W.evaluate(pts)
        return pot

    def nonlinear_coefficient(self):
        if self.sigma is None:
            return np.zeros(self.grid.shape)
        return self.sigma.evaluate(np.stack(self.grid.mesh(), axis=-1))


def evolve_gp(state, dt, t_end, snapshot_times=None):
    """Strang split-step Fourier integration of the GP equation."""
    span = t_end - state.t
    if span < 0:
        raise ConfigError("t_end precedes the current time")
    n_steps = int(round(span / dt))
    h = span / n_steps if n_steps else dt
    pot = state.potential()
    sig = state.nonlinear_coefficient()
    ksq = sum(k**2 for k in state.grid.wavenumber_mesh())
    lin = np.exp(-1j * ksq * h)
    half_pot = np.exp(-0.5j * h * pot)
    u = state.u.copy()
    wanted = {}
    if snapshot_times is not None:
        for t in snapshot_times:
            idx = int(round((t - state.t) / h)) if n_steps else 0
            if abs(state.t + idx * h - t) > 1e-9 * max(1.0, abs(t)) or not 0 <= idx <= n_steps:
                raise ConfigError(f"snapshot time {t} is not on the step lattice")
            wanted.setdefault(idx, []).append(t)
    snaps = []

    def record(i):
        for t in wanted.get(i, []):
            snaps.append(GpState(u.copy(), state.grid, t, state.eps, state.V, state.W, state.sigma))

    record(0)
    for i in range(1, n_steps + 1):
        u = u * half_pot * np.exp(-0.5j * h * sig * np.abs(u) ** 2)
        u = np.fft.ifftn(lin * np.fft.fftn(u))
        u = u * half_pot * np.exp(-0.5j * h * sig * np.abs(u) ** 2)
        record(i)
    out = GpState(u, state.grid, t_end, state.eps, state.V, state.W, state.sigma)
    return (out, snaps) if snapshot_times is not None else out


# ---------------------------------------------------------------------------
# approximation


def bloch_on_box(mode, grid):
    """Sample ``p(x)`` on a box grid with a whole number of points per period.

    The coefficients are folded modulo the points per period, which samples
    the trigonometric polynomial exactly.
    """
    cells = _cells(grid)
    ppc = []
    for n, c in zip(grid.shape, cells):
        if n % c:
            raise ConfigError("grid must have a whole number of points per period")
        ppc.append(n // c)
    spec = np.zeros(ppc, dtype=complex)
    x0 = np.asarray(grid.lower, dtype=float)
    phase = np.exp(1j * mode.etas @ x0)
    np.add.at(spec, tuple((mode.etas % np.asarray(ppc)).T), mode.coeffs * phase)
    cell = np.fft.ifftn(spec) * np.prod(ppc)
    return np.tile(cell, cells)


def envelope_grid_for(fast_grid, eps, reduce=1):
    """Slow grid ``X = eps x`` matching ``fast_grid`` (optionally ``reduce`` times coarser)."""
    shape = tuple(n // reduce for n in fast_grid.shape)
    if any(n * reduce != m for n, m in zip(shape, fast_grid.shape)):
        raise ConfigError("reduce must divide the fast grid size")
    return UniformGrid(tuple(eps * lo for lo in fast_grid.lower), tuple(eps * L for L in fast_grid.length), shape)


def assemble_uapp(carriers, envelope, eps, fast_grid, t=0.0, omega0=None, guard=1e-5):
    """``eps^(1/2) sum_j A_j(eps x) p_j(x) exp(i (k_j.x - omega0 t))`` on ``fast_grid``.

    The envelope grid must be ``eps`` times the fast box with a point count
    dividing the fast one; ``A`` is Fourier-interpolated onto the fast grid.
    """
    eg = envelope.field.grid
    expect = envelope_grid_for(fast_grid, eps, 1)
    if not (np.allclose(eg.lower, expect.lower, rtol=1e-12, atol=1e-12)
            and np.allclose(eg.length, expect.length, rtol=1e-12)):
        raise ConfigError("envelope grid is not the eps-scaled fast box")
    A = envelope.field.values
    peak = np.abs(A).max()
    if peak > 0 and VectorField(A, eg).boundary_shell_max() > guard * peak:
        raise ResolutionError("envelope support exceeds the fast box")
    axes = tuple(range(1, eg.dim + 1))
    if eg.shape != fast_grid.shape:
        if any(m % n for n, m in zip(eg.shape, fast_grid.shape)):
            raise ConfigError("envelope point count must divide the fast one")
        hat = np.fft.fftn(A, axes=axes)
        ratio = np.prod(fast_grid.shape) / np.prod(eg.shape)
        A = np.fft.ifftn(pad_spectrum(hat, fast_grid.shape, axes) * ratio, axes=axes)
    omega0 = carriers.omega0 if omega0 is None else omega0
    check_commensurate(fast_grid, carriers.wavevectors, carriers.exact_wavevectors, "carrier wavevector")
    X = fast_grid.mesh()
    u = np.zeros(fast_grid.shape, dtype=complex)
    for j, mode in enumerate(carriers.modes):
        plane = np.exp(1j * sum(k * x for k, x in zip(mode.k, X)))
        u += A[j] * bloch_on_box(mode, fast_grid) * plane
    return np.sqrt(eps) * np.exp(-1j * omega0 * t) * u


@dataclass
class ScalingResult:
    epsilons: list
    errors: list
    slope: float
    times: list = field(default_factory=list)
    runs: list = field(default_factory=list)
    excluded: list = field(default_factory=list)

    def to_csv_rows(self):
        header = ["epsilon", "sup_error", "initial_error", "mass_drift", "tail"]
        rows = [[r["epsilon"], r["sup_error"], r["initial_error"], r["mass_drift"], r["tail"]] for r in self.runs]
        return header, rows


def fit_slope(epsilons, errors):
    x = np.log(np.asarray(epsilons, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def error_scaling_study(carriers, model, initial, epsilons, T0, V, W=None, sigma=None, cells=60,
                        points_per_cell=8, envelope_reduce=None, dt_gp=1e-3, dt_cme=1e-3, n_times=11,
                        mass_tol=1e-8):
    """Sup-norm error between GP and the CME approximation for several ``eps``.

    ``initial(X)`` returns the ``N`` envelope components on slow coordinates
    ``X`` (a list of arrays).  The envelope grid is the ``eps``-scaled fast
    box, by default the coarsest one that keeps the CME spectral tail guard.  For each ``eps`` the GP is started from
    ``u^app(., 0)`` and compared with ``u^app`` at ``n_times`` equispaced
    times in ``[0, T0 / eps]``.
    """
    if len(epsilons) < 3:
        raise ConfigError("need at least three epsilons")
    fast = periodic_box(cells, points_per_cell, carriers.dim)
    check_commensurate(fast, carriers.wavevectors, carriers.exact_wavevectors, "carrier wavevector")
    runs, excluded = [], []
    for eps in epsilons:
        t_end = T0 / eps
        times = list(np.linspace(0, t_end, n_times))
        # snap times onto the step lattices
        n_gp = int(round(t_end / dt_gp / (n_times - 1))) * (n_times - 1)
        h_gp = t_end / n_gp
        n_cme = int(round(T0 / dt_cme / (n_times - 1))) * (n_times - 1)
        # coarsest envelope grid first; the nonlinear chirp may force a finer one
        env_snaps, failure = None, None
        for reduce in ([envelope_reduce] if envelope_reduce else [8, 4, 2, 1]):
            if fast.shape[0] % reduce:
                continue
            slow = envelope_grid_for(fast, eps, reduce)
            A0 = VectorField(np.asarray(initial(slow.mesh()), dtype=complex), slow)
            if spectral_tail(A0.values, slow) >= 1e-3 * TAIL_GUARD and reduce > 1 and not envelope_reduce:
                continue
            env0 = EnvelopeState(A0, 0.0, model)
            try:
                _, env_snaps = evolve_cme(env0, T0 / n_cme, T0, snapshot_times=[eps * t for t in times])
                break
            except ResolutionError as exc:
                failure = exc
        if env_snaps is None:
            excluded.append({"epsilon": eps, "reason": str(failure)})
            continue
        u0 = assemble_uapp(carriers, env0, eps, fast, 0.0)
        gp0 = GpState(u0, fast, 0.0, eps, V, W, sigma)
        m0 = gp0.mass()
        _, gp_snaps = evolve_gp(gp0, h_gp, t_end, snapshot_times=times)
        errs = []
        for t, g, a in zip(times, gp_snaps, env_snaps):
            uapp = assemble_uapp(carriers, a, eps, fast, t)
            errs.append(float(np.abs(g.u - uapp).max()))
        drift = abs(gp_snaps[-1].mass() - m0) / m0
        tail = max(s.tail() for s in env_snaps)
        run = {"epsilon": eps, "sup_error": max(errs), "initial_error": errs[0], "errors": errs,
               "mass_drift": drift, "tail": tail, "times": times}
        if drift > mass_tol * max(1.0, t_end):
            excluded.append({"epsilon": eps, "reason": f"mass drift {drift:.2e}"})
            continue
        runs.append(run)
        LOGGER.info("eps=%g sup error %.4e", eps, run["sup_error"])
    eps_ok = [r["epsilon"] for r in runs]
    errs = [r["sup_error"] for r in runs]
    slope = fit_slope(eps_ok, errs) if len(runs) >= 2 else float("nan")
    return ScalingResult(eps_ok, errs, slope, runs=runs, excluded=excluded)
