"""Standing gap solitons of the stationary CME by Petviashvili iteration.

Standing waves ``A = exp(-i Omega T) B`` satisfy ``Omega B = L B - N(B)`` with
``L`` the linear CME operator (symbol ``diag(v.K) - kappa``), i.e.

    B = (L - Omega)^{-1} N(B).

The iteration ``B <- S^{3/2} (L - Omega)^{-1} N(B)`` with
``S = Re<(L - Omega) B, B> / Re<N(B), B>`` is run per Fourier mode on a
periodic grid.  ``N`` is evaluated pseudospectrally with 2x zero padding.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from .dispersion import symbol_batch
from .errors import ConfigError, NumericalError, SingularSymbolError
from .grid import UniformGrid, VectorField, pad_spectrum, truncate_spectrum

LOGGER = logging.getLogger(__name__)

DIST_MIN = 1e-3
PETVIASHVILI_EXPONENT = 1.5


def _spatial_axes(field):
    return tuple(range(1, field.ndim))


class GridSymbol:
    """Eigendecomposition of the CME symbol at every wavevector of a grid."""

    def __init__(self, model, grid):
        self.model = model
        self.grid = grid
        Ks = np.stack(grid.wavenumber_mesh(), axis=-1)
        self.K = Ks
        self.eigenvalues, self.eigenvectors = np.linalg.eigh(symbol_batch(model, Ks))

    def _apply(self, Bhat, f):
        # Bhat (N, *shape) -> (*shape, N)
        b = np.moveaxis(Bhat, 0, -1)
        coef = np.einsum("...ji,...j->...i", self.eigenvectors.conj(), b)
        coef = coef * f
        out = np.einsum("...ij,...j->...i", self.eigenvectors, coef)
        return np.moveaxis(out, -1, 0)

    def distance(self, omega):
        return np.abs(self.eigenvalues - omega).min(axis=-1)

    def check_invertible(self, omega, dist_min=DIST_MIN):
        dist = self.distance(omega)
        idx = np.unravel_index(np.argmin(dist), dist.shape)
        scale = np.abs(self.eigenvalues).max()
        if dist[idx] <= dist_min or scale / max(dist[idx], 1e-300) > 1e12:
            raise SingularSymbolError(
                f"Omega={omega:g} is within {dist[idx]:.2e} of the spectrum at K={self.K[idx]}"
            )

    def shifted(self, Bhat, omega):
        return self._apply(Bhat, self.eigenvalues - omega)

    def shifted_inverse(self, Bhat, omega, dist_min=DIST_MIN):
        self.check_invertible(omega, dist_min)
        return self._apply(Bhat, 1.0 / (self.eigenvalues - omega))


def apply_symbol(field, model):
    """``L B`` by direct multiplication with the symbol in Fourier space."""
    axes = _spatial_axes(field.values)
    Bhat = np.fft.fftn(field.values, axes=axes)
    Ks = field.grid.wavenumber_mesh()
    vK = sum(model.group_velocities[:, i].reshape(-1, *([1] * field.grid.dim)) * Ks[i]
             for i in range(field.grid.dim))
    out = vK * Bhat - np.einsum("jr,r...->j...", model.kappa, Bhat)
    return VectorField(np.fft.ifftn(out, axes=axes), field.grid)


def apply_symbol_inverse(field, omega, model, dist_min=DIST_MIN, symbol=None):
    """``(L - Omega)^{-1} B`` by a Hermitian solve per Fourier mode."""
    symbol = GridSymbol(model, field.grid) if symbol is None else symbol
    axes = _spatial_axes(field.values)
    Bhat = np.fft.fftn(field.values, axes=axes)
    return VectorField(np.fft.ifftn(symbol.shifted_inverse(Bhat, omega, dist_min), axes=axes), field.grid)


def dealiased_nonlinearity_hat(model, Bhat):
    """Spectrum of ``N(B)`` computed on a 2x padded grid."""
    axes = _spatial_axes(Bhat)
    shape = Bhat.shape[1:]
    big = tuple(2 * n for n in shape)
    scale = np.prod(big) / np.prod(shape)
    Bbig = np.fft.ifftn(pad_spectrum(Bhat, big, axes), axes=axes) * scale
    Nbig = np.fft.fftn(model.nonlinearity(Bbig), axes=axes) / scale
    return truncate_spectrum(Nbig, shape, axes)


def stationary_residual(model, omega, field):
    """Sup norm of ``Omega B - L B + N(B)`` with ``N`` evaluated pointwise on the grid."""
    R = omega * field.values - apply_symbol(field, model).values + model.nonlinearity(field.values)
    return float(np.abs(R).max())


# ---------------------------------------------------------------------------
# diagnostics


def angular_asymmetry(field, component=0, radius=None, n_angles=720):
    """Standard deviation of ``|B_c|`` on a centred ring, relative to the peak.

    The ring is centred at the centroid of ``|B_c|^2``; its default radius is
    where the angular mean of ``|B_c|`` first drops to half the peak.
    """
    grid = field.grid
    if grid.dim != 2:
        raise ConfigError("angular asymmetry is defined for d = 2")
    a = np.abs(field.values[component])
    w = a**2
    X = grid.mesh()
    centre = [float((w * x).sum() / w.sum()) for x in X]
    h = grid.spacing
    peak = a.max()

    def ring(r):
        t = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
        px = (centre[0] + r * np.cos(t) - grid.lower[0]) / h[0]
        py = (centre[1] + r * np.sin(t) - grid.lower[1]) / h[1]
        return map_coordinates(a, [px, py], order=3, mode="grid-wrap")

    if radius is None:
        rs = np.linspace(0, 0.5 * min(grid.length), 400)[1:]
        means = np.array([ring(r).mean() for r in rs])
        below = np.flatnonzero(means < 0.5 * peak)
        radius = float(rs[below[0]]) if below.size else float(rs[-1])
    vals = ring(radius)
    return float(vals.std() / peak), radius


def symmetry_diagnostics(field):
    B = field.values
    peak = np.abs(B).max()
    out = {}
    if B.shape[0] >= 2:
        out["B2_conj_B1"] = float(np.abs(B[1] - B[0].conj()).max() / peak)
    if B.shape[0] >= 4:
        out["B4_conj_B3"] = float(np.abs(B[3] - B[2].conj()).max() / peak)
        out["ansatz_pattern"] = float(
            max(np.abs(B[0] - B[1]).max(), np.abs(B[0] + B[2]).max(), np.abs(B[0] + B[3]).max()) / peak
        )
    return out


@dataclass
class SolitonSolution:
    omega: float
    field: VectorField
    residual: float
    iterations: int
    s_factor: float
    history: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def peak(self):
        return self.field.sup()

    @property
    def localized(self):
        return self.diagnostics.get("boundary_shell", np.inf) <= 1e-6

    def summary(self):
        out = {
            "omega": self.omega,
            "residual": self.residual,
            "iterations": self.iterations,
            "s_factor": float(self.s_factor),
            "peak": self.peak,
            "half_width": 0.5 * self.field.grid.length[0],
            "points": self.field.grid.shape[0],
        }
        out.update(self.diagnostics)
        return out

    def to_text(self):
        return "".join(f"{k} = {v!r}\n" for k, v in self.summary().items())


def _diagnose(field):
    peak = field.sup()
    d = {
        "boundary_shell": field.boundary_shell_max() / peak,
        "highest_mode": float(field.highest_mode_fraction()),
    }
    d.update(symmetry_diagnostics(field))
    return d


def petviashvili_solve(model, omega, initial, tol_update=1e-10, tol_residual=1e-8, tol_s=1e-6,
                       max_iter=1000, dist_min=DIST_MIN, symbol=None):
    """Petviashvili iteration for ``B = (L - Omega)^{-1} N(B)``."""
    if initial.n_components != model.n_modes:
        raise ConfigError("initial guess has the wrong number of components")
    if not np.any(initial.values):
        raise ConfigError("initial guess is zero")
    grid = initial.grid
    symbol = GridSymbol(model, grid) if symbol is None else symbol
    symbol.check_invertible(omega, dist_min)
    axes = _spatial_axes(initial.values)
    Bhat = np.fft.fftn(initial.values, axes=axes)
    norm0 = np.linalg.norm(Bhat)
    history = []
    for it in range(1, max_iter + 1):
        Nhat = dealiased_nonlinearity_hat(model, Bhat)
        LB = symbol.shifted(Bhat, omega)
        num = np.vdot(Bhat, LB)
        den = np.vdot(Bhat, Nhat)
        if abs(num.imag) > 1e-6 * abs(num) or abs(den.imag) > 1e-6 * abs(den):
            LOGGER.warning("stabilizing factor has complex residue (%.2e, %.2e)", num.imag, den.imag)
        if den.real == 0:
            raise NumericalError("<N(B), B> vanished")
        S = num.real / den.real
        if S <= 0:
            raise NumericalError(f"stabilizing factor S = {S:.3e} <= 0 at iteration {it}")
        new = S**PETVIASHVILI_EXPONENT * symbol.shifted_inverse(Nhat, omega, dist_min=0.0)
        nn = np.linalg.norm(new)
        if not np.isfinite(nn) or nn > 1e6 * norm0:
            raise NumericalError(f"Petviashvili iteration diverged at iteration {it}")
        update = np.linalg.norm(new - Bhat) / nn
        Bhat = new
        history.append((update, S))
        if update < tol_update and abs(S - 1) < tol_s:
            break
    else:
        raise NumericalError(f"no convergence in {max_iter} iterations; last update {update:.2e}, S={S:.8f}")
    B = VectorField(np.fft.ifftn(Bhat, axes=axes), grid)
    res = stationary_residual(model, omega, B)
    # S is re-evaluated at the final iterate
    S = np.vdot(Bhat, symbol.shifted(Bhat, omega)).real / np.vdot(Bhat, dealiased_nonlinearity_hat(model, Bhat)).real
    if res > tol_residual:
        raise NumericalError(f"converged iterate has residual {res:.2e} > {tol_residual:.0e}")
    sol = SolitonSolution(float(omega), B, res, it, float(S), history, _diagnose(B))
    if not sol.localized and np.isfinite(tol_residual):
        LOGGER.warning("solution at Omega=%g touches the box (shell %.2e)", omega, sol.diagnostics["boundary_shell"])
    return sol


# ---------------------------------------------------------------------------
# continuation


@dataclass
class SolitonBranch:
    members: list
    steps: list = field(default_factory=list)
    completed: bool = True
    message: str = ""
    final: SolitonSolution | None = None

    @property
    def omegas(self):
        return [m["omega"] for m in self.members]

    def to_csv_rows(self):
        keys = sorted({k for m in self.members for k in m})
        keys.remove("omega")
        keys = ["omega"] + keys
        return keys, [[m.get(k, "") for k in keys] for m in self.members]


def crop_refine(field):
    """Crop to the central half of the box and refine back to the same point count.

    The grid spacing halves.  Only sensible when the field is negligible
    outside the central half (see :func:`crop_shell`).
    """
    grid = field.grid
    axes = _spatial_axes(field.values)
    sl = tuple(slice(n // 4, n // 4 + n // 2) for n in grid.shape)
    cropped = field.values[(slice(None),) + sl]
    lower = tuple(lo + (n // 4) * h for lo, n, h in zip(grid.lower, grid.shape, grid.spacing))
    length = tuple(l / 2 for l in grid.length)
    small = UniformGrid(lower, length, tuple(n // 2 for n in grid.shape))
    return refine(VectorField(cropped, small), grid.shape)


def refine(field, shape=None):
    """Fourier interpolation onto a finer grid (default: twice the points) of the same box."""
    grid = field.grid
    shape = tuple(2 * n for n in grid.shape) if shape is None else tuple(shape)
    axes = _spatial_axes(field.values)
    hat = np.fft.fftn(field.values, axes=axes)
    hat = pad_spectrum(hat, shape, axes) * (np.prod(shape) / np.prod(grid.shape))
    return VectorField(np.fft.ifftn(hat, axes=axes), UniformGrid(grid.lower, grid.length, shape))


def crop_shell(field):
    """Relative boundary value the field would have after cropping to the central half."""
    a = np.abs(field.values).max(axis=0)
    sl = tuple(slice(n // 4, n // 4 + n // 2) for n in field.grid.shape)
    inner = VectorField(a[sl][None], UniformGrid((0.0,) * a.ndim, (1.0,) * a.ndim, a[sl].shape))
    return inner.boundary_shell_max() / a.max()


def solve_resolved(model, omega, seed, tol_residual=1e-8, max_points=1024, shell_tol=1e-7, **solver_opts):
    """Petviashvili solve that adapts the grid until the residual tolerance is met.

    An under-resolved result is cropped to half the box when it is negligible
    (``shell_tol``) outside the central half, otherwise the point count is
    doubled up to ``max_points``.  Returns the solution and the list of grids tried.
    """
    field_ = seed
    tried = []
    while True:
        sol = petviashvili_solve(model, omega, field_, tol_residual=np.inf, **solver_opts)
        tried.append((0.5 * sol.field.grid.length[0], sol.field.grid.shape[0], sol.residual))
        if sol.residual <= tol_residual:
            if sol.diagnostics["boundary_shell"] > 1e-6:
                raise NumericalError(
                    f"solution at Omega={omega:g} is not localized in the box "
                    f"(shell {sol.diagnostics['boundary_shell']:.1e})"
                )
            return sol, tried
        # under-resolved iterates carry an aliasing floor, so the shell test is deferred
        if crop_shell(sol.field) <= shell_tol:
            field_ = crop_refine(sol.field)
        elif 2 * sol.field.grid.shape[0] <= max_points:
            field_ = refine(sol.field)
        else:
            raise NumericalError(
                f"residual {sol.residual:.2e} > {tol_residual:.0e} at Omega={omega:g} with the finest allowed grid"
            )
        LOGGER.info("Omega=%g: residual %.2e, regridding to half width %g, %d points", omega, sol.residual,
                    0.5 * field_.grid.length[0], field_.grid.shape[0])


def continue_in_omega(model, start, omega_target, d_omega=0.01, d_omega_min=1e-4, adapt_grid=True,
                      max_points=1024, tol_residual=1e-8, **solver_opts):
    """Follow a soliton branch from ``start.omega`` to ``omega_target``.

    Each step is seeded with the previous solution; a failed step halves
    ``d_omega`` down to ``d_omega_min``, after which the partial branch is
    returned with ``completed = False``.  With ``adapt_grid`` every step goes
    through :func:`solve_resolved`, and seeds that are negligible outside the
    central half of the box are cropped first.
    """
    branch = SolitonBranch([start.summary()], final=start)
    omega = start.omega
    if omega_target == omega:
        return branch
    direction = np.sign(omega_target - omega)
    step = abs(d_omega)
    current = start
    while direction * (omega_target - omega) > 1e-14:
        nxt = omega + direction * min(step, abs(omega_target - omega))
        seed = current.field
        if adapt_grid and crop_shell(seed) <= 1e-9:
            seed = crop_refine(seed)
        try:
            if adapt_grid:
                sol, tried = solve_resolved(model, nxt, seed, tol_residual, max_points, **solver_opts)
            else:
                sol = petviashvili_solve(model, nxt, seed, tol_residual=tol_residual, **solver_opts)
                tried = []
        except NumericalError as exc:
            step /= 2
            branch.steps.append({"omega": float(nxt), "accepted": False, "reason": str(exc)})
            LOGGER.info("step to %g failed (%s); halving to %g", nxt, exc, step)
            if step < d_omega_min:
                branch.completed = False
                branch.message = f"continuation stalled near Omega={omega:g}: {exc}"
                LOGGER.error(branch.message)
                branch.final = current
                return branch
            continue
        branch.steps.append({"omega": float(nxt), "accepted": True, "iterations": sol.iterations, "grids": tried})
        branch.members.append(sol.summary())
        LOGGER.info("accepted Omega=%g (residual %.2e)", nxt, sol.residual)
        current = sol
        omega = nxt
        step = min(abs(d_omega), 2 * step)
    branch.final = current
    return branch
