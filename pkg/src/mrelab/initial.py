"""Reproducible initial data."""

from __future__ import annotations

import numpy as np

from mrelab import spectral as sp


def random_solenoidal(grid, seed, norm=1.0, kmax=None, kmin=1.0, ncomp=None):
    """Seeded band-limited divergence-free field with zero mean.

    Coefficients are complex Gaussians on ``kmin <= |k| <= kmax`` (default
    ``kmax = min(n) / 8``), made Hermitian through a real physical round trip,
    Leray-projected and rescaled to L2 norm ``norm``.
    """
    kmax = min(grid.n) / 8 if kmax is None else kmax
    rng = np.random.default_rng(seed)
    d = grid.dim if ncomp is None else ncomp
    shape = (d, *grid.shape)
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    kabs = np.sqrt(grid.k2)
    coeffs *= (kabs <= kmax) & (kabs >= kmin)
    coeffs = sp.to_spectral(grid, sp.to_physical(grid, coeffs))
    if d == grid.dim:
        coeffs = sp.leray_project(grid, coeffs)
    coeffs[(Ellipsis,) + (0,) * grid.dim] = 0.0
    size = sp.l2_norm(grid, coeffs)
    if size == 0:
        return coeffs
    return coeffs * (norm / size)


def random_scalar(grid, seed, norm=1.0, kmax=None, kmin=1.0):
    """Seeded band-limited real scalar with zero mean."""
    return random_solenoidal(grid, seed, norm=norm, kmax=kmax, kmin=kmin, ncomp=1)[0]


def constant_field(grid, vec):
    out = grid.zeros(vector=True)
    out[(slice(None),) + (0,) * grid.dim] = np.asarray(vec, dtype=float)
    return out


def abc_field(grid, A=1.0, B=1.0, C=1.0):
    """Arnold-Beltrami-Childress field, a curl eigenfield with eigenvalue 1."""
    if grid.dim != 3:
        raise ValueError("the ABC field is three-dimensional")
    x1, x2, x3 = grid.coords()
    phys = np.stack(
        [
            A * np.sin(x3) + C * np.cos(x2),
            B * np.sin(x1) + A * np.cos(x3),
            C * np.sin(x2) + B * np.cos(x1),
        ]
    )
    return sp.to_spectral(grid, phys)


def cellular_flow(grid):
    """Skew gradient of sin(x1) sin(x2): (-sin x1 cos x2, cos x1 sin x2)."""
    x1, x2 = grid.coords()[:2]
    phys = np.stack([-np.sin(x1) * np.cos(x2), np.cos(x1) * np.sin(x2)])
    return sp.to_spectral(grid, phys)
