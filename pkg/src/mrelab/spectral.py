"""
Fourier field algebra on the periodic torus [-pi, pi)^d.

Fields are plain numpy arrays of Fourier coefficients in full FFT layout:

- scalar: complex array of shape ``grid.shape``
- vector: complex array of shape ``(grid.dim, *grid.shape)``

Coefficients are normalized so that a physical field is
``f(x) = sum_k fhat(k) exp(i k.x)``; hence ``cos(x1)`` has value 1/2 at
``k = (+-1, 0, ...)`` and the constant 1 has value 1 at ``k = 0``.

Physical samples live on ``x_j = 2 pi j / n`` wrapped into [-pi, pi), i.e.
stored in FFT order. The origin is always index 0.

L2 inner products use Parseval, ``<f, g> = (2 pi)^d sum_k conj(fhat) ghat``,
which is exact for band-limited fields.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from mrelab.errors import DomainError, GridMismatchError, ShapeError

# relative tolerance for "divergence-free" and "zero-mean" checks
DIV_TOL = 1e-12
MEAN_TOL = 1e-12


def _workers():
    value = os.environ.get("MRELAB_THREADS")
    if not value:
        return None
    try:
        return max(1, int(value))
    except ValueError:
        return None


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [-pi, pi)^dim with ``n[j]`` points on axis ``j``."""

    dim: int
    n: tuple

    def __post_init__(self):
        n = self.n
        if isinstance(n, (int, np.integer)):
            n = (int(n),) * self.dim
        n = tuple(int(v) for v in n)
        object.__setattr__(self, "n", n)
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if len(n) != self.dim:
            raise ValueError(f"need {self.dim} resolutions, got {len(n)}")
        for v in n:
            if v < 8 or v % 2:
                raise ValueError(f"every resolution must be even and >= 8, got {v}")

    @property
    def shape(self):
        return self.n

    @property
    def size(self):
        return int(np.prod(self.n))

    @property
    def axes(self):
        return tuple(range(-self.dim, 0))

    @property
    def volume(self):
        return (2 * np.pi) ** self.dim

    @property
    def spacing(self):
        """Smallest grid spacing over all axes."""
        return 2 * np.pi / max(self.n)

    def _bcast(self, arr, axis):
        shape = [1] * self.dim
        shape[axis] = arr.size
        return arr.reshape(shape)

    @cached_property
    def k(self):
        """Integer wavenumbers per axis, broadcastable, FFT order."""
        return tuple(
            self._bcast(np.fft.fftfreq(n, 1.0 / n), j) for j, n in enumerate(self.n)
        )

    @cached_property
    def kd(self):
        """Wavenumbers for odd derivatives: Nyquist entries set to zero."""
        out = []
        for j, n in enumerate(self.n):
            kj = np.fft.fftfreq(n, 1.0 / n)
            kj[n // 2] = 0.0
            out.append(self._bcast(kj, j))
        return tuple(out)

    @cached_property
    def k2(self):
        """|k|^2 on the full grid."""
        return sum(kj**2 for kj in self.k) * np.ones(self.shape)

    @cached_property
    def dealias_mask(self):
        mask = np.ones(self.shape, dtype=bool)
        for kj, n in zip(self.k, self.n):
            mask = mask & (3 * np.abs(kj) <= n)
        return mask

    @cached_property
    def nyquist_mask(self):
        """True on every mode with some |k_j| = n_j / 2."""
        mask = np.zeros(self.shape, dtype=bool)
        for kj, n in zip(self.k, self.n):
            mask = mask | (np.abs(kj) == n // 2)
        return mask

    def coords(self):
        """Physical coordinates as dense arrays, one per axis, in [-pi, pi)."""
        lins = []
        for n in self.n:
            x = 2 * np.pi * np.arange(n) / n
            lins.append(np.where(x >= np.pi, x - 2 * np.pi, x))
        return np.meshgrid(*lins, indexing="ij")

    def index_of(self, kvec):
        """Array index of wavevector ``kvec``."""
        return tuple(int(kj) % n for kj, n in zip(kvec, self.n))

    def zeros(self, vector=False):
        shape = (self.dim, *self.shape) if vector else self.shape
        return np.zeros(shape, dtype=complex)

    def embed(self, dim3_n):
        """The 3D grid whose first two axes match this 2D grid."""
        if self.dim != 2:
            raise ValueError("embed expects a 2D grid")
        return Grid(3, (*self.n, dim3_n))


def check_scalar(grid, s):
    if np.shape(s) != grid.shape:
        raise ShapeError(f"scalar field shape {np.shape(s)} does not match grid {grid.shape}")


def check_vector(grid, v, ncomp=None):
    ncomp = grid.dim if ncomp is None else ncomp
    if np.shape(v) != (ncomp, *grid.shape):
        raise ShapeError(
            f"vector field shape {np.shape(v)} does not match {(ncomp, *grid.shape)}"
        )


def check_same_grid(*arrays):
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) > 1:
        raise GridMismatchError(f"fields live on different grids: {sorted(shapes)}")


def _spatial_shape_ok(grid, arr):
    shape = np.shape(arr)
    return shape[-grid.dim :] == grid.shape and len(shape) in (grid.dim, grid.dim + 1)


def to_spectral(grid, phys):
    """Physical samples (scalar or stacked components) to Fourier coefficients."""
    if not _spatial_shape_ok(grid, phys):
        raise ShapeError(f"sample array shape {np.shape(phys)} does not match grid {grid.shape}")
    return scipy.fft.fftn(phys, axes=grid.axes, workers=_workers()) / grid.size


def to_physical(grid, coeffs):
    """Inverse of :func:`to_spectral`; returns real samples."""
    if not _spatial_shape_ok(grid, coeffs):
        raise ShapeError(f"coefficient array shape {np.shape(coeffs)} does not match grid {grid.shape}")
    out = scipy.fft.ifftn(coeffs, axes=grid.axes, workers=_workers())
    return out.real * grid.size


def derivative(grid, s, axis):
    """d/dx_axis of a scalar (or of every component when ``s`` is stacked)."""
    if not 0 <= axis < grid.dim:
        raise ValueError(f"axis {axis} out of range for dim {grid.dim}")
    if not _spatial_shape_ok(grid, s):
        raise ShapeError(f"field shape {np.shape(s)} does not match grid {grid.shape}")
    return 1j * grid.kd[axis] * s


def gradient(grid, s):
    check_scalar(grid, s)
    return np.stack([derivative(grid, s, j) for j in range(grid.dim)])


def divergence(grid, v):
    check_vector(grid, v)
    return sum(1j * grid.kd[j] * v[j] for j in range(grid.dim))


def laplacian(grid, s):
    return -grid.k2 * s


def perp_gradient(grid, phi):
    """2D skew gradient (-d2 phi, d1 phi)."""
    if grid.dim != 2:
        raise ValueError("perp_gradient is defined in 2D")
    check_scalar(grid, phi)
    return np.stack([-derivative(grid, phi, 1), derivative(grid, phi, 0)])


def leray_project(grid, v):
    """Project onto divergence-free fields: (I - k k^T / |k|^2) per mode.

    The k = 0 mode passes through unchanged. Nyquist modes are dropped, since
    a real divergence-free field cannot be represented there consistently.
    """
    check_vector(grid, v)
    k = grid.kd
    k2 = sum(kj**2 for kj in k)
    safe = np.where(k2 == 0, 1.0, k2)
    kdotv = sum(k[j] * v[j] for j in range(grid.dim)) / safe
    out = np.stack([v[j] - k[j] * kdotv for j in range(grid.dim)])
    out[:, grid.nyquist_mask] = 0.0
    return out


def zero_mean_violation(grid, s):
    """|coeff(0)| relative to the largest coefficient magnitude."""
    arr = np.asarray(s)
    if arr.ndim == grid.dim:
        arr = arr[None]
    scale = np.max(np.abs(arr))
    if scale == 0:
        return 0.0
    origin = (slice(None),) + (0,) * grid.dim
    return float(np.max(np.abs(arr[origin])) / scale)


def inv_fractional_laplacian(grid, s, gamma):
    """Apply (-Delta)^(-gamma) to a zero-mean scalar or vector field."""
    if gamma < 0:
        raise DomainError(f"gamma must be >= 0, got {gamma}")
    if not _spatial_shape_ok(grid, s):
        raise ShapeError(f"field shape {np.shape(s)} does not match grid {grid.shape}")
    if zero_mean_violation(grid, s) > MEAN_TOL:
        raise DomainError("inverse fractional Laplacian needs a zero-mean field")
    if gamma == 0:
        out = np.array(s, dtype=complex, copy=True)
    else:
        k2 = np.where(grid.k2 == 0, 1.0, grid.k2)
        out = s * k2 ** (-gamma)
    origin = (Ellipsis,) + (0,) * grid.dim
    out[origin] = 0.0
    return out


def curl(grid, v):
    """Curl of a vector field; a scalar d1 v2 - d2 v1 in 2D."""
    check_vector(grid, v)
    d = lambda comp, axis: derivative(grid, v[comp], axis)  # noqa: E731
    if grid.dim == 2:
        return d(1, 0) - d(0, 1)
    return np.stack([d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)])


def vector_potential(grid, B):
    """Zero-mean vector potential A = (-Delta)^(-1) curl B of a 3D field."""
    if grid.dim != 3:
        raise ValueError("vector_potential is defined in 3D")
    check_vector(grid, B)
    if zero_mean_violation(grid, B) > MEAN_TOL:
        raise DomainError("vector potential needs a zero-mean field")
    return inv_fractional_laplacian(grid, curl(grid, B), 1.0)


def dealias(grid, s):
    """Zero every mode with some |k_j| > n_j / 3 (two-thirds rule)."""
    if not _spatial_shape_ok(grid, s):
        raise ShapeError(f"field shape {np.shape(s)} does not match grid {grid.shape}")
    return s * grid.dealias_mask


def divergence_residual(grid, v):
    """max_k |k . v(k)| relative to the largest coefficient magnitude."""
    scale = np.max(np.abs(v))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(divergence(grid, v))) / scale)


def is_divergence_free(grid, v, tol=DIV_TOL):
    return divergence_residual(grid, v) <= tol


def inner(grid, f, g):
    """L2 inner product of two real fields (scalar or vector)."""
    check_same_grid(f, g)
    return float(grid.volume * np.sum((np.conj(f) * g).real))


def l2_norm(grid, f):
    return float(np.sqrt(grid.volume * np.sum(np.abs(f) ** 2)))


def mean(grid, s):
    """Spatial mean(s): the k = 0 coefficient(s), as real numbers."""
    origin = (Ellipsis,) + (0,) * grid.dim
    return np.asarray(s)[origin].real.copy()


def evaluate(grid, s, point):
    """Spectral interpolation of a scalar field at an arbitrary point."""
    check_scalar(grid, s)
    phase = sum(kj * float(xj) for kj, xj in zip(grid.k, point))
    return float(np.sum(s * np.exp(1j * phase)).real)


def resample(grid, s, new_grid):
    """Zero-pad or truncate coefficients onto another grid of the same dim."""
    if new_grid.dim != grid.dim:
        raise ValueError("resample keeps the dimension")
    lead = np.shape(s)[: np.ndim(s) - grid.dim]
    out = np.zeros((*lead, *new_grid.shape), dtype=complex)
    src = []
    dst = []
    for n_old, n_new in zip(grid.n, new_grid.n):
        m = min(n_old, n_new) // 2
        # keep |k| < m on both sides; the shared Nyquist is dropped
        src.append(np.r_[0:m, n_old - m + 1 : n_old])
        dst.append(np.r_[0:m, n_new - m + 1 : n_new])
    idx_src = np.ix_(*src)
    idx_dst = np.ix_(*dst)
    out[(Ellipsis, *idx_dst)] = np.asarray(s)[(Ellipsis, *idx_src)]
    return out
