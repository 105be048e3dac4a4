"""Dispersion relation of the CME linear part, gap detection and band-edge analysis.

The symbol of ``L_CME(grad) = diag(-i v_j . grad) - kappa`` at ``grad -> iK``
is the Hermitian matrix ``diag(v_j . K) - kappa``; its sorted eigenvalues
``Omega_1(K) <= ... <= Omega_N(K)`` form the dispersion relation.

Gap detection is sampling based.  Sorted eigenvalues are continuous in
``K``, so between two neighbouring grid samples each band attains every
value between its two sampled values.  The union of these intervals is a
certified *subset* of the spectrum; its complement in the requested window,
shrunk by ``h_omega`` at each end, is reported as a gap.  A coarse sweep at
``|K| = R_K`` and ``2 R_K`` then checks that nothing from outside the
scanned box falls into a reported gap.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cme import CmeModel
from .errors import ConfigError, DegenerateModeError, NumericalError

LOGGER = logging.getLogger(__name__)

DEGENERACY_RTOL = 1e-8


def cme_symbol(model, K):
    """``diag(v_j . K) - kappa`` (Hermitian)."""
    K = np.asarray(K, dtype=float)
    return np.diag(model.group_velocities @ K).astype(complex) - model.kappa


def symbol_batch(model, Ks):
    """Symbols for an array of wavevectors ``(..., d)`` -> ``(..., N, N)``."""
    Ks = np.asarray(Ks, dtype=float)
    diag = Ks @ model.group_velocities.T
    S = np.broadcast_to(-model.kappa, Ks.shape[:-1] + model.kappa.shape).copy()
    idx = np.arange(model.n_modes)
    S[..., idx, idx] += diag
    return S


def _gauge_columns(vecs):
    """Make the largest-modulus entry of each eigenvector column real positive."""
    mags = np.abs(vecs)
    top = mags.max(axis=-2, keepdims=True)
    star = np.argmax(mags >= top - 1e-12, axis=-2)
    pivot = np.take_along_axis(vecs, star[..., None, :], axis=-2)
    return vecs * np.exp(-1j * np.angle(pivot))


@dataclass
class SymbolSample:
    K: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns

    def eigenvector(self, j):
        """Eigenvector of the ``j``-th band (1-based)."""
        return self.eigenvectors[:, j - 1]


def dispersion_eigen(model, K):
    """Sorted eigenpairs of the symbol at ``K`` with gauge-fixed eigenvectors."""
    K = np.asarray(K, dtype=float)
    w, v = np.linalg.eigh(cme_symbol(model, K))
    return SymbolSample(K, w, _gauge_columns(v))


# ---------------------------------------------------------------------------
# interval bookkeeping


def _merge(lo, hi):
    """Union of closed intervals as two sorted arrays."""
    if lo.size == 0:
        return lo, hi
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    run_hi = np.maximum.accumulate(hi)
    starts = np.ones(lo.size, dtype=bool)
    starts[1:] = lo[1:] > run_hi[:-1]
    start_idx = np.flatnonzero(starts)
    end_idx = np.r_[start_idx[1:] - 1, lo.size - 1]
    return lo[start_idx], run_hi[end_idx]


def _neighbour_intervals(values, n_axes):
    """Intervals between grid neighbours along each of the leading ``n_axes`` axes."""
    los, his = [], []
    for ax in range(n_axes):
        n = values.shape[ax]
        if n < 2:
            continue
        a = np.take(values, np.arange(n - 1), axis=ax)
        b = np.take(values, np.arange(1, n), axis=ax)
        los.append(np.minimum(a, b).ravel())
        his.append(np.maximum(a, b).ravel())
    if not los:
        flat = values.ravel()
        return flat, flat.copy()
    return np.concatenate(los), np.concatenate(his)


@dataclass
class GapReport:
    """Result of a gap scan.

    ``spectrum`` lists the covered intervals inside the window, ``gaps`` the
    open intervals reported as gaps.
    """

    window: tuple
    radius: float
    h_K: float
    h_omega: float
    spectrum: list
    gaps: list
    asymptotic_cover_checked: bool
    velocity: np.ndarray | None = None
    far_field_intrusions: list = field(default_factory=list)

    @property
    def has_gap(self):
        return bool(self.gaps)

    def gap_containing(self, omega, slack=None):
        """Gap containing ``omega``; reported gaps are shrunk by ``h_omega``, which is the default slack."""
        slack = self.h_omega if slack is None else slack
        for lo, hi in self.gaps:
            if lo - slack < omega < hi + slack:
                return (lo, hi)
        return None

    def to_text(self):
        lines = [
            f"window = {self.window[0]!r}, {self.window[1]!r}",
            f"R_K = {self.radius!r}",
            f"h_K = {self.h_K!r}",
            f"h_Omega = {self.h_omega!r}",
            f"asymptotic_cover_checked = {str(self.asymptotic_cover_checked).lower()}",
        ]
        if self.velocity is not None:
            lines.append("velocity = " + ", ".join(repr(float(x)) for x in self.velocity))
        lines.append(f"n_gaps = {len(self.gaps)}")
        for lo, hi in self.gaps:
            lines.append(f"gap = {lo!r}, {hi!r}")
        return "\n".join(lines) + "\n"


def _k_axis(radius, h):
    n = int(round(2 * radius / h))
    return np.linspace(-radius, radius, n + 1)


def _far_field_points(dim, radius, n_dirs):
    if dim == 1:
        return np.array([[-radius], [radius]])
    if dim == 2:
        t = np.linspace(0, 2 * np.pi, n_dirs, endpoint=False)
        return radius * np.stack([np.cos(t), np.sin(t)], axis=-1)
    # quasi-uniform directions on the sphere
    i = np.arange(n_dirs) + 0.5
    phi = np.arccos(1 - 2 * i / n_dirs)
    theta = np.pi * (1 + 5**0.5) * i
    dirs = np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=-1)
    return radius * dirs


def _band_values(model, Ks, velocity):
    w = np.linalg.eigvalsh(symbol_batch(model, Ks))
    if velocity is not None:
        w = w - (Ks @ velocity)[..., None]
    return w


def _scan(model, window, radius, h_K, h_omega, velocity, max_points=5e6, chunk_points=200_000):
    lo_w, hi_w = (float(window[0]), float(window[1]))
    if not hi_w > lo_w:
        raise ConfigError(f"empty Omega window {window}")
    if radius <= 0 or h_K <= 0 or h_omega <= 0:
        raise ConfigError("R_K, h_K and h_Omega must be positive")
    d = model.dim
    axis = _k_axis(radius, h_K)
    total = axis.size**d
    if total > max_points:
        raise ConfigError(f"scan grid has {total:.3g} points; increase h_K or reduce R_K")
    v = None if velocity is None else np.asarray(velocity, dtype=float)

    rows_per_chunk = max(2, int(chunk_points // max(1, axis.size ** (d - 1))))
    cover_lo, cover_hi = [], []
    pad = h_omega
    start = 0
    while True:
        stop = min(axis.size, start + rows_per_chunk)
        sub = [axis[start:stop]] + [axis] * (d - 1)
        Ks = np.stack(np.meshgrid(*sub, indexing="ij"), axis=-1)
        w = _band_values(model, Ks, v)
        lo, hi = _neighbour_intervals(w, d)
        keep = (hi >= lo_w - pad) & (lo <= hi_w + pad)
        lo, hi = _merge(lo[keep], hi[keep])
        cover_lo.append(lo)
        cover_hi.append(hi)
        if stop >= axis.size:
            break
        start = stop - 1  # overlap one row so that neighbours across chunks are paired
    lo, hi = _merge(np.concatenate(cover_lo), np.concatenate(cover_hi))

    gaps = _complement(lo, hi, lo_w, hi_w, h_omega)

    # far-field cover check
    intrusions = []
    for r in (radius, 2 * radius):
        pts = _far_field_points(d, r, 1440 if d == 2 else 2000)
        w = _band_values(model, pts, v)
        if d == 2:
            ring = np.concatenate([w, w[:1]], axis=0)
            flo, fhi = _neighbour_intervals(ring, 1)
        else:
            flo, fhi = w.ravel(), w.ravel()
        for a, b in zip(flo, fhi):
            for g0, g1 in gaps:
                if b > g0 and a < g1:
                    intrusions.append((float(a), float(b)))
    checked = not intrusions
    if intrusions:
        LOGGER.warning("far-field samples enter %d candidate gap(s); gaps reduced", len(gaps))
        ilo, ihi = _merge(np.array([i[0] for i in intrusions]), np.array([i[1] for i in intrusions]))
        lo, hi = _merge(np.r_[lo, ilo], np.r_[hi, ihi])
        gaps = _complement(lo, hi, lo_w, hi_w, h_omega)

    inside = (hi >= lo_w) & (lo <= hi_w)
    spectrum = [(max(float(a), lo_w), min(float(b), hi_w)) for a, b in zip(lo[inside], hi[inside])]
    return GapReport((lo_w, hi_w), float(radius), float(h_K), float(h_omega), spectrum, gaps, checked,
                     None if v is None else v, intrusions)


def _complement(lo, hi, lo_w, hi_w, h_omega):
    gaps = []
    cursor = lo_w
    cursor_is_spectrum = False
    for a, b in zip(lo, hi):
        if b < lo_w:
            continue
        if a > hi_w:
            break
        if a > cursor:
            g0 = cursor + (h_omega if cursor_is_spectrum else 0.0)
            g1 = a - h_omega
            if g1 > g0:
                gaps.append((float(g0), float(g1)))
        if b > cursor:
            cursor = b
            cursor_is_spectrum = True
    if cursor < hi_w:
        g0 = cursor + (h_omega if cursor_is_spectrum else 0.0)
        if hi_w > g0:
            gaps.append((float(g0), float(hi_w)))
    return gaps


def scan_gap(model, window, radius=40.0, h_K=0.05, h_omega=1e-2):
    """Sampled spectral gaps of the CME symbol inside ``window``."""
    return _scan(model, window, radius, h_K, h_omega, None)


def moving_frame_scan(model, velocity, window, radius=40.0, h_K=0.05, h_omega=1e-2):
    """Gap scan for the moving-frame dispersion ``Omega_j(K) - v . K``."""
    velocity = np.asarray(velocity, dtype=float)
    if velocity.size != model.dim:
        raise ConfigError("frame velocity has wrong dimension")
    if not np.any(velocity):
        return scan_gap(model, window, radius, h_K, h_omega)
    return _scan(model, window, radius, h_K, h_omega, velocity)


# ---------------------------------------------------------------------------
# closed forms


def n2_gap_closed_form(v1, v2, kappa, tol=1e-9):
    """Spectral gap of a two-mode system, or ``None`` when there is none.

    A gap exists exactly when ``v1 = -alpha v2`` with ``alpha > 0``; it is
    centred at ``-(k22 |v1| + k11 |v2|) / (|v1| + |v2|)`` with half width
    ``2 |k12| sqrt(|v1||v2|) / (|v1| + |v2|)``.
    """
    v1 = np.atleast_1d(np.asarray(v1, dtype=float))
    v2 = np.atleast_1d(np.asarray(v2, dtype=float))
    kappa = np.asarray(kappa, dtype=complex)
    n1, n2 = np.linalg.norm(v1), np.linalg.norm(v2)
    if n1 == 0 or n2 == 0:
        return None
    if abs(v1 @ v2 + n1 * n2) > tol * n1 * n2:
        return None
    k11, k22 = kappa[0, 0].real, kappa[1, 1].real
    centre = -(k22 * n1 + k11 * n2) / (n1 + n2)
    half = 2 * abs(kappa[0, 1]) * np.sqrt(n1 * n2) / (n1 + n2)
    if half == 0:
        return None
    return (float(centre - half), float(centre + half))


def n4_gap_condition(alpha1, alpha2, alpha3):
    """Sufficient condition ``|a1|^2 > 2 (|a2|^2 + |a3|^2)`` for a gap around 0."""
    return abs(alpha1) ** 2 > 2 * (abs(alpha2) ** 2 + abs(alpha3) ** 2)


def n4_quartic_coefficients(alpha1, alpha2, alpha3, k_xi, k_eta):
    """Coefficients (highest first) of the symmetric four-mode dispersion quartic in ``Omega``."""
    a1, a2, a3 = complex(alpha1), complex(alpha2), complex(alpha3)
    A1, A2, A3 = abs(a1) ** 2, abs(a2) ** 2, abs(a3) ** 2
    r2 = k_xi**2 + k_eta**2
    c2 = -(r2 + 2 * (A1 + A2 + A3))
    c1 = 4 * ((np.conj(a1) * a2 * a3).real + (a1 * np.conj(a2) * a3).real)
    c0 = (k_xi * k_eta + A2 - A3) ** 2 + A1 * (r2 + A1) - 2 * (A1 * a3**2 + a2**2 * np.conj(a1) ** 2).real
    return np.stack(np.broadcast_arrays(1.0, 0.0, c2, c1, c0))


def real_rooted_roots(c):
    """All roots of a polynomial known to have only real roots (highest coefficient first).

    Roots are isolated between consecutive roots of the derivative (which is
    again real-rooted) and refined by Brent's method; a critical point where
    the polynomial vanishes to rounding is a multiple root.  This keeps
    double roots as accurate as simple ones.
    """
    from scipy.optimize import brentq

    c = np.trim_zeros(np.asarray(c, dtype=float), "f")
    n = c.size - 1
    if n < 1:
        return np.array([])
    if n == 1:
        return np.array([-c[1] / c[0]])
    crit = real_rooted_roots(np.polyder(c))
    bound = 1.0 + np.abs(c[1:] / c[0]).max()
    absc = np.abs(c)

    def p(x):
        return np.polyval(c, x)

    def is_zero(x):
        return abs(p(x)) <= 64 * np.finfo(float).eps * np.polyval(absc, abs(x))

    roots = []
    i = 0
    while i < crit.size:
        # cluster of coincident critical points = multiple root of c'
        j = i
        while j + 1 < crit.size and crit[j + 1] - crit[i] <= 1e-12 * max(1.0, abs(crit[i])):
            j += 1
        if is_zero(crit[i]):
            roots += [float(np.mean(crit[i : j + 1]))] * (j - i + 2)
        i = j + 1
    pts = np.concatenate([[-bound], crit, [bound]])
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a and not (is_zero(a) or is_zero(b)) and p(a) * p(b) < 0:
            roots.append(brentq(p, a, b, xtol=1e-15 * max(1.0, abs(a), abs(b)), rtol=4 * np.finfo(float).eps))
    roots = np.sort(np.array(roots))
    if roots.size != n:
        # clustered roots closer than rounding allows; merge of double counts
        roots = np.sort(np.roots(c).real)
    return roots


def n4_quartic_roots(alpha1, alpha2, alpha3, k_xi, k_eta):
    """Roots (sorted) of the four-mode quartic; all four are real."""
    return real_rooted_roots(n4_quartic_coefficients(alpha1, alpha2, alpha3, k_xi, k_eta))


def transform_to_unit_axes(model, tol=1e-9):
    """Change variables ``(X1, X2) -> (xi, eta)`` that turns velocities ``(v, -v, w, -w)``
    into ``(e1, -e1, e2, -e2)``; ``kappa`` and ``gamma`` are unchanged."""
    V = model.group_velocities
    if model.n_modes != 4 or model.dim != 2:
        raise ConfigError("axis transform needs N = 4 and d = 2")
    v, w = V[0], V[2]
    if not (np.allclose(V[1], -v, atol=tol) and np.allclose(V[3], -w, atol=tol)):
        raise ConfigError("velocities are not of the form (v, -v, w, -w)")
    det = v[0] * w[1] - w[0] * v[1]
    if abs(det) <= tol:
        raise ConfigError("v and w are linearly dependent")
    e = np.eye(2)
    return CmeModel(np.array([e[0], -e[0], e[1], -e[1]]), model.kappa, model.gamma, model.wavevectors)


def asymptotic_direction_angles(alpha1, alpha2, alpha3, omega, r):
    """Angles ``theta`` at which ``Omega`` solves the four-mode dispersion at ``|K| = r``.

    Uses ``sin(2 theta) = (2 / r^2) (|a3|^2 - |a2|^2 +- sqrt(r^2 (Omega^2 - |a1|^2) - psi))``.
    Returns an empty list when no real direction exists.
    """
    a1, a2, a3 = complex(alpha1), complex(alpha2), complex(alpha3)
    A1, A2, A3 = abs(a1) ** 2, abs(a2) ** 2, abs(a3) ** 2
    psi = (
        omega**4
        - 2 * omega**2 * (A1 + A2 + A3)
        + 4 * omega * (np.conj(a1) * a2 * a3 + a1 * np.conj(a2) * a3).real
        + A1**2
        - 2 * A1 * (a3**2).real
        - 2 * (np.conj(a1) ** 2 * a2**2).real
    )
    disc = r**2 * (omega**2 - A1) - psi
    if disc < 0:
        return []
    out = []
    for sign in (1, -1):
        s = 2 / r**2 * (A3 - A2 + sign * np.sqrt(disc))
        if abs(s) <= 1:
            base = 0.5 * np.arcsin(s)
            # sin(2 theta) = s has the solutions base, pi/2 - base (mod pi)
            for t in (base, np.pi / 2 - base, base - np.pi, -np.pi / 2 - base):
                out.append(float(np.angle(np.exp(1j * t))))
    return sorted(set(round(t, 15) for t in out))


def radial_determinant_polynomial(model, omega, direction):
    """``rho -> det(symbol(rho * direction) - omega)`` as a real polynomial (highest first)."""
    direction = np.asarray(direction, dtype=float)
    n = model.n_modes
    rho = np.cos(np.pi * (np.arange(n + 1) + 0.5) / (n + 1)) * 2
    vals = [np.linalg.det(cme_symbol(model, r * direction) - omega * np.eye(n)).real for r in rho]
    return np.polyfit(rho, vals, n)


# ---------------------------------------------------------------------------
# band edges


@dataclass
class EdgeData:
    band: int  # 1-based
    K0: np.ndarray
    omega_star: float
    gradient: np.ndarray
    hessian: np.ndarray
    hessian_coarse: np.ndarray
    definiteness: str
    simplicity_margin: float
    eigenvector: np.ndarray

    def is_critical(self, tol=1e-6):
        return float(np.linalg.norm(self.gradient)) <= tol

    @property
    def hessian_step_change(self):
        return float(np.abs(self.hessian_coarse - self.hessian).max())


def _tracked_value(model, K, ref_vec):
    w, v = np.linalg.eigh(cme_symbol(model, K))
    overlaps = np.abs(v.conj().T @ ref_vec)
    order = np.argsort(overlaps)[::-1]
    if len(order) > 1 and overlaps[order[0]] - overlaps[order[1]] < 1e-3:
        raise NumericalError(f"eigenvalue tracking ambiguous at K={K}")
    return w[order[0]]


def _fd_derivatives(model, K0, ref_vec, h):
    d = K0.size
    f0 = _tracked_value(model, K0, ref_vec)
    grad = np.zeros(d)
    hess = np.zeros((d, d))
    e = np.eye(d) * h
    for i in range(d):
        fp = _tracked_value(model, K0 + e[i], ref_vec)
        fm = _tracked_value(model, K0 - e[i], ref_vec)
        grad[i] = (fp - fm) / (2 * h)
        hess[i, i] = (fp - 2 * f0 + fm) / h**2
        for j in range(i):
            fpp = _tracked_value(model, K0 + e[i] + e[j], ref_vec)
            fpm = _tracked_value(model, K0 + e[i] - e[j], ref_vec)
            fmp = _tracked_value(model, K0 - e[i] + e[j], ref_vec)
            fmm = _tracked_value(model, K0 - e[i] - e[j], ref_vec)
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4 * h * h)
    return grad, hess


def classify_definiteness(hessian, tol=1e-6):
    ev = np.linalg.eigvalsh(0.5 * (hessian + hessian.T))
    if np.all(ev > tol):
        return "positive-definite"
    if np.all(ev < -tol):
        return "negative-definite"
    if np.any(np.abs(ev) <= tol):
        return "degenerate"
    return "indefinite"


def band_edge(model, band, K0, h=1e-3):
    """Gradient, Hessian (Richardson refined) and definiteness of band ``band`` (1-based) at ``K0``.

    Eigenvalues on the finite-difference stencil are matched to the edge
    eigenvector by maximal overlap, not by sort position.
    """
    K0 = np.atleast_1d(np.asarray(K0, dtype=float))
    sample = dispersion_eigen(model, K0)
    w = sample.eigenvalues
    j = band - 1
    if not 0 <= j < w.size:
        raise ConfigError(f"band {band} out of range 1..{w.size}")
    others = np.delete(w, j)
    margin = float(np.abs(others - w[j]).min()) if others.size else np.inf
    if margin <= DEGENERACY_RTOL * max(1.0, abs(w[j])):
        raise DegenerateModeError(f"Omega_{band}(K0) = {w[j]:.12g} is not simple (margin {margin:.2e})")
    ref = sample.eigenvector(band)
    g1, h1 = _fd_derivatives(model, K0, ref, h)
    g2, h2 = _fd_derivatives(model, K0, ref, h / 2)
    grad = (4 * g2 - g1) / 3
    hess = (4 * h2 - h1) / 3
    hess = 0.5 * (hess + hess.T)
    return EdgeData(band, K0, float(w[j]), grad, hess, 0.5 * (h1 + h1.T), classify_definiteness(hess), margin, ref)


def locate_band_edge(model, gap, side="lower", radius=10.0, h_K=0.05):
    """Find the band and wavevector attaining the edge of ``gap``.

    The sampled extremum (largest eigenvalue below the gap for the lower
    edge, smallest above it for the upper edge) is refined by a local
    Nelder-Mead search.  Returns ``(band (1-based), K0, Omega_*)``.
    """
    from scipy.optimize import minimize

    if side not in ("lower", "upper"):
        raise ConfigError("side must be 'lower' or 'upper'")
    lower = side == "lower"
    target = gap[0] if lower else gap[1]
    d = model.dim
    axis = _k_axis(radius, h_K)
    best = (-np.inf, None, None)
    rows = max(1, int(200_000 // max(1, axis.size ** (d - 1))))
    for start in range(0, axis.size, rows):
        sub = [axis[start:start + rows]] + [axis] * (d - 1)
        Ks = np.stack(np.meshgrid(*sub, indexing="ij"), axis=-1).reshape(-1, d)
        w = np.linalg.eigvalsh(symbol_batch(model, Ks))
        score = np.where(w <= target, w, -np.inf) if lower else np.where(w >= target, -w, -np.inf)
        idx = np.unravel_index(np.argmax(score), score.shape)
        if score[idx] > best[0]:
            best = (score[idx], idx[1], Ks[idx[0]])
    if best[1] is None:
        raise NumericalError(f"no band found on the {side} side of the gap")
    j = int(best[1])
    sign = -1.0 if lower else 1.0

    def f(K):
        return sign * np.linalg.eigvalsh(cme_symbol(model, K))[j]

    res = minimize(f, best[2], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    K0 = np.where(np.abs(res.x) < 1e-8, 0.0, res.x)
    return j + 1, K0, float(sign * f(K0))


def gap_report_to_dict(report):
    return {
        "window": list(report.window),
        "radius": report.radius,
        "h_K": report.h_K,
        "h_omega": report.h_omega,
        "gaps": [list(g) for g in report.gaps],
        "spectrum": [list(s) for s in report.spectrum],
        "asymptotic_cover_checked": report.asymptotic_cover_checked,
        "velocity": None if report.velocity is None else [float(x) for x in report.velocity],
    }


def gap_report_from_dict(d):
    v = d.get("velocity")
    return GapReport(tuple(d["window"]), d["radius"], d["h_K"], d["h_omega"],
                     [tuple(s) for s in d.get("spectrum", [])], [tuple(g) for g in d["gaps"]],
                     bool(d["asymptotic_cover_checked"]), None if v is None else np.asarray(v))


def edge_to_dict(edge):
    return {
        "band": edge.band,
        "K0": [float(x) for x in edge.K0],
        "omega_star": edge.omega_star,
        "gradient": [float(x) for x in edge.gradient],
        "hessian": edge.hessian.tolist(),
        "hessian_coarse": edge.hessian_coarse.tolist(),
        "definiteness": edge.definiteness,
        "simplicity_margin": edge.simplicity_margin,
        "eigenvector": [[float(z.real), float(z.imag)] for z in edge.eigenvector],
    }


def edge_from_dict(d):
    return EdgeData(int(d["band"]), np.asarray(d["K0"], dtype=float), float(d["omega_star"]),
                    np.asarray(d["gradient"]), np.asarray(d["hessian"]), np.asarray(d["hessian_coarse"]),
                    d["definiteness"], float(d["simplicity_margin"]),
                    np.array([complex(a, b) for a, b in d["eigenvector"]]))
