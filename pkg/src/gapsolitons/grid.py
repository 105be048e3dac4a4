"""Uniform periodic grids and multi-component fields living on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class UniformGrid:
    """Periodic tensor grid ``lower + i * length / shape`` in each axis."""

    lower: tuple[float, ...]
    length: tuple[float, ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.lower) == len(self.length) == len(self.shape)):
            raise ValueError("lower, length and shape must have equal dimension")
        if any(n < 1 for n in self.shape) or any(l <= 0 for l in self.length):
            raise ValueError("grid needs positive lengths and point counts")

    @classmethod
    def centered(cls, half_width, points, dim=2):
        """Grid on ``[-half_width, half_width)^dim``."""
        return cls((-float(half_width),) * dim, (2.0 * half_width,) * dim, (int(points),) * dim)

    @property
    def dim(self):
        return len(self.shape)

    @property
    def spacing(self):
        return tuple(l / n for l, n in zip(self.length, self.shape))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def axes(self):
        return [lo + np.arange(n) * h for lo, n, h in zip(self.lower, self.shape, self.spacing)]

    def mesh(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def wavenumber_axes(self):
        return [2 * np.pi * np.fft.fftfreq(n, d=h) for n, h in zip(self.shape, self.spacing)]

    def wavenumber_mesh(self):
        return np.meshgrid(*self.wavenumber_axes(), indexing="ij")

    def refined(self, factor=2):
        return UniformGrid(self.lower, self.length, tuple(factor * n for n in self.shape))


@dataclass
class VectorField:
    """``N`` complex components sampled on a :class:`UniformGrid`.

    ``values`` has shape ``(N, *grid.shape)``.
    """

    values: np.ndarray
    grid: UniformGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape[1:] != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape[1:]} does not match grid {self.grid.shape}"
            )

    @property
    def n_components(self):
        return self.values.shape[0]

    def fourier(self):
        return np.fft.fftn(self.values, axes=self._axes)

    @property
    def _axes(self):
        return tuple(range(1, self.values.ndim))

    def copy(self):
        return VectorField(self.values.copy(), self.grid)

    def sup(self):
        return float(np.abs(self.values).max())

    def boundary_shell_max(self, width=1):
        """Largest modulus within ``width`` points of the box boundary."""
        a = np.abs(self.values).max(axis=0)
        mask = np.zeros(a.shape, dtype=bool)
        for ax in range(a.ndim):
            sl = [slice(None)] * a.ndim
            sl[ax] = slice(0, width)
            mask[tuple(sl)] = True
            sl[ax] = slice(a.shape[ax] - width, None)
            mask[tuple(sl)] = True
        return float(a[mask].max())

    def highest_mode_fraction(self):
        """Largest Fourier amplitude on the Nyquist planes relative to the peak amplitude."""
        F = np.abs(self.fourier())
        peak = F.max()
        worst = 0.0
        for ax, n in enumerate(self.grid.shape):
            if n % 2 == 0:
                worst = max(worst, float(np.take(F, n // 2, axis=ax + 1).max()))
        return worst / peak if peak > 0 else 0.0


def inner(a, b):
    """Grid inner product ``sum conj(b) * a`` with pairwise (numpy) summation."""
    return np.vdot(b.ravel(), a.ravel())


def pad_spectrum(coeffs, new_shape, axes):
    """Zero-pad an FFT-ordered spectrum to ``new_shape`` along ``axes``.

    For even lengths the Nyquist coefficient is kept on the negative side.
    """
    out = coeffs
    for ax, m in zip(axes, new_shape):
        n = out.shape[ax]
        if m == n:
            continue
        lo = (n + 1) // 2
        hi = n - lo
        shape = list(out.shape)
        shape[ax] = m
        padded = np.zeros(shape, dtype=out.dtype)
        src = [slice(None)] * out.ndim
        dst = [slice(None)] * out.ndim
        src[ax], dst[ax] = slice(0, lo), slice(0, lo)
        padded[tuple(dst)] = out[tuple(src)]
        if hi:
            src[ax], dst[ax] = slice(n - hi, n), slice(m - hi, m)
            padded[tuple(dst)] = out[tuple(src)]
        out = padded
    return out


def truncate_spectrum(coeffs, new_shape, axes):
    """Inverse of :func:`pad_spectrum`."""
    out = coeffs
    for ax, n in zip(axes, new_shape):
        m = out.shape[ax]
        if m == n:
            continue
        lo = (n + 1) // 2
        hi = n - lo
        keep = np.r_[0:lo, m - hi:m]
        out = np.take(out, keep, axis=ax)
    return out
