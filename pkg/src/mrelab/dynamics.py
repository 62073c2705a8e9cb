"""
Magnetic relaxation dynamics on the torus.

    dB/dt + u.grad B = B.grad u
    u = (-Delta)^(-gamma) P div(B (x) B)
    div u = div B = 0

Time integration is classical RK4 on the Fourier coefficients of B, with
every quadratic product dealiased by the two-thirds rule and B re-projected
onto divergence-free fields after each step.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from mrelab import spectral as sp
from mrelab.errors import BlowUpError, CheckpointFormatError, GridMismatchError
from mrelab.spectral import Grid

CHECKPOINT_MAGIC = b"MRE1"
OVERFLOW = 1e150
TAIL_WARN = 1e-3


class ResolutionWarning(UserWarning):
    """Spectral tail energy exceeds the resolution threshold."""


@dataclass
class MREState:
    grid: Grid
    B: np.ndarray
    t: float = 0.0
    gamma: float = 0.0
    steps: int = 0

    def __post_init__(self):
        sp.check_vector(self.grid, self.B)
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")

    def copy(self):
        return replace(self, B=self.B.copy())


@dataclass
class IntegratorConfig:
    dt: float | str = "auto"
    t_end: float = 1.0
    cfl: float = 0.4
    reproject_every: int = 1

    def __post_init__(self):
        if isinstance(self.dt, str):
            if self.dt != "auto":
                raise ValueError(f"dt must be a positive number or 'auto', got {self.dt!r}")
        elif not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must be in (0, 1], got {self.cfl}")
        if int(self.reproject_every) != self.reproject_every or self.reproject_every < 1:
            raise ValueError(f"reproject_every must be an integer >= 1, got {self.reproject_every}")


def _products_div(grid, Bp):
    """Dealiased spectral div(B (x) B) from physical components."""
    d = grid.dim
    out = grid.zeros(vector=True)
    for i in range(d):
        for j in range(i, d):
            bij = sp.dealias(grid, sp.to_spectral(grid, Bp[i] * Bp[j]))
            out[i] += sp.derivative(grid, bij, j)
            if j != i:
                out[j] += sp.derivative(grid, bij, i)
    return out


def _velocity_from_physical(grid, Bp, gamma):
    force = sp.leray_project(grid, _products_div(grid, Bp))
    # k = 0 of a divergence is zero up to rounding
    force[(slice(None),) + (0,) * grid.dim] = 0.0
    return sp.inv_fractional_laplacian(grid, force, gamma)


def constitutive_velocity(grid, B, gamma):
    """u = (-Delta)^(-gamma) P div(B (x) B), zero mean and divergence-free."""
    sp.check_vector(grid, B)
    return _velocity_from_physical(grid, sp.to_physical(grid, B), gamma)


def _curl_of_cross(grid, up, Bp):
    if grid.dim == 2:
        e = sp.dealias(grid, sp.to_spectral(grid, up[0] * Bp[1] - up[1] * Bp[0]))
        return np.stack([sp.derivative(grid, e, 1), -sp.derivative(grid, e, 0)])
    cross = np.stack(
        [
            up[1] * Bp[2] - up[2] * Bp[1],
            up[2] * Bp[0] - up[0] * Bp[2],
            up[0] * Bp[1] - up[1] * Bp[0],
        ]
    )
    return sp.curl(grid, sp.dealias(grid, sp.to_spectral(grid, cross)))


def induction_rhs(grid, B, u):
    """B.grad u - u.grad B for divergence-free B and u.

    Evaluated as curl(u x B), which equals the transport form when both
    fields are solenoidal; the product is dealiased and the result is exactly
    divergence-free and mean-free.
    """
    sp.check_vector(grid, B)
    sp.check_vector(grid, u)
    if np.shape(B) != np.shape(u):
        raise GridMismatchError("B and u live on different grids")
    return _curl_of_cross(grid, sp.to_physical(grid, u), sp.to_physical(grid, B))


def _rhs(grid, B, gamma):
    Bp = sp.to_physical(grid, B)
    u = _velocity_from_physical(grid, Bp, gamma)
    up = sp.to_physical(grid, u)
    dB = _curl_of_cross(grid, up, Bp)
    return dB, float(np.max(np.abs(up))), float(np.max(np.sum(Bp**2, axis=0)))


def mre_rhs(grid, B, gamma):
    """Full right-hand side dB/dt of the relaxation system."""
    return _rhs(grid, B, gamma)[0]


def auto_dt(grid, gamma, cfl, u_max, b2_max):
    """CFL step; adds the h^2 cap of the degenerate diffusion when gamma = 0."""
    h = grid.spacing
    dt = cfl * h / max(1.0, u_max)
    if gamma == 0:
        dt = min(dt, cfl * h * h / (2.0 * max(1.0, b2_max)))
    return dt


def rk4_step(rhs, y, dt, k1=None):
    """One classical RK4 step of dy/dt = rhs(y)."""
    if k1 is None:
        k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _finite(B):
    return bool(np.all(np.isfinite(B))) and float(np.max(np.abs(B))) < OVERFLOW


def step(state, cfg, dt=None, noise_floor=0.0):
    """Advance one RK4 step; returns a new state.

    ``dt`` overrides the configured step. Otherwise a fixed ``cfg.dt`` is used,
    or the CFL rule when ``cfg.dt == "auto"``; either is clipped at ``cfg.t_end``.
    A positive ``noise_floor`` zeroes coefficients smaller than that fraction
    of the largest one (Krasny filter), which keeps round-off out of the
    high modes when high Sobolev norms are monitored.
    """
    grid, gamma = state.grid, state.gamma
    f = lambda y: _rhs(grid, y, gamma)[0]  # noqa: E731
    k1, u_max, b2_max = _rhs(grid, state.B, gamma)
    if dt is None:
        if cfg.dt == "auto":
            dt = auto_dt(grid, gamma, cfg.cfl, u_max, b2_max)
        else:
            dt = float(cfg.dt)
        remaining = cfg.t_end - state.t
        if remaining > 0:
            dt = min(dt, remaining)
    B = rk4_step(f, state.B, dt, k1=k1)
    steps = state.steps + 1
    if steps % int(cfg.reproject_every) == 0:
        B = sp.leray_project(grid, B)
    if noise_floor > 0:
        B = np.where(np.abs(B) < noise_floor * np.max(np.abs(B)), 0.0, B)
    if not _finite(B):
        raise BlowUpError(f"non-finite coefficients at t = {state.t + dt:.6g}", state=state)
    return MREState(grid, B, state.t + dt, gamma, steps)


def run(
    state0,
    cfg,
    sample_every=10,
    hs=(1.0, 2.0),
    checkpoint_path=None,
    checkpoint_every=None,
    on_sample=None,
    noise_floor=0.0,
):
    """Integrate to ``cfg.t_end`` collecting diagnostics every ``sample_every`` steps.

    Returns ``(final_state, records)``. The first record is taken at the
    initial time and the last at the final time. A :class:`BlowUpError`
    carries the records gathered so far.
    """
    from mrelab.diagnostics import record

    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    state = state0
    records = [record(state, hs=hs)]
    _check_resolution(records[-1])
    if on_sample is not None:
        on_sample(state, records[-1])

    fixed_dt = None
    if cfg.dt != "auto" and cfg.t_end > state.t:
        nsteps = math.ceil((cfg.t_end - state.t) / float(cfg.dt) - 1e-9)
        fixed_dt = (cfg.t_end - state.t) / nsteps

    count = 0
    try:
        while cfg.t_end - state.t > 1e-12 * max(1.0, abs(cfg.t_end)):
            if fixed_dt is not None:
                dt = min(fixed_dt, cfg.t_end - state.t)
                state = step(state, cfg, dt=dt, noise_floor=noise_floor)
            else:
                state = step(state, cfg, noise_floor=noise_floor)
            count += 1
            last = cfg.t_end - state.t <= 1e-12 * max(1.0, abs(cfg.t_end))
            if count % sample_every == 0 or last:
                records.append(record(state, hs=hs))
                _check_resolution(records[-1])
                if on_sample is not None:
                    on_sample(state, records[-1])
            if checkpoint_path is not None and checkpoint_every and count % checkpoint_every == 0:
                write_checkpoint(checkpoint_path, state)
    except BlowUpError as exc:
        exc.records = records
        raise
    if checkpoint_path is not None:
        write_checkpoint(checkpoint_path, state)
    return state, records


def _check_resolution(rec):
    if rec.tail_fraction > TAIL_WARN:
        warnings.warn(
            f"tail fraction {rec.tail_fraction:.3g} exceeds {TAIL_WARN:g} at t = {rec.t:.6g}",
            ResolutionWarning,
            stacklevel=3,
        )


# --- checkpoint file -------------------------------------------------------


def write_checkpoint(path, state):
    """Binary checkpoint: magic, u32 dim, u32 n per axis, f64 gamma, f64 t, coefficients."""
    grid = state.grid
    header = CHECKPOINT_MAGIC + struct.pack(f"<I{grid.dim}Idd", grid.dim, *grid.n, state.gamma, state.t)
    payload = np.ascontiguousarray(state.B, dtype="<c16").tobytes(order="C")
    Path(path).write_bytes(header + payload)


def read_checkpoint(path):
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic bytes {data[:4]!r}")
    pos = 4
    try:
        (dim,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if dim not in (2, 3):
            raise CheckpointFormatError(f"{path}: unsupported dimension {dim}")
        n = struct.unpack_from(f"<{dim}I", data, pos)
        pos += 4 * dim
        gamma, t = struct.unpack_from("<dd", data, pos)
        pos += 16
    except struct.error as exc:
        raise CheckpointFormatError(f"{path}: truncated header") from exc
    try:
        grid = Grid(dim, tuple(n))
    except ValueError as exc:
        raise CheckpointFormatError(f"{path}: {exc}") from exc
    expected = 16 * dim * grid.size
    if len(data) - pos != expected:
        raise CheckpointFormatError(
            f"{path}: expected {expected} coefficient bytes, found {len(data) - pos}"
        )
    B = np.frombuffer(data, dtype="<c16", offset=pos).reshape((dim, *grid.shape)).astype(complex)
    return MREState(grid, B, t, gamma)
