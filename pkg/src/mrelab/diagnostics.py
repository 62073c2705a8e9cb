"""Scalar functionals of an MRE state and the diagnostics CSV."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from mrelab import spectral as sp
from mrelab.dynamics import constitutive_velocity
from mrelab.errors import DomainError

CSV_BASE = [
    "t",
    "energy",
    "dissipation",
    "helicity",
    "cross_helicity",
    "u_lip",
    "b_lip",
    "criterion",
    "current_l2",
    "tail_fraction",
]


@dataclass
class DiagnosticsRecord:
    t: float
    energy: float
    dissipation: float
    helicity: float | None
    cross_helicity: float
    u_lip: float
    b_lip: float
    criterion: float
    current_l2: float
    tail_fraction: float
    hs_norms: dict = field(default_factory=dict)

    def row(self, hs):
        values = [
            self.t,
            self.energy,
            self.dissipation,
            self.helicity,
            self.cross_helicity,
            self.u_lip,
            self.b_lip,
            self.criterion,
            self.current_l2,
            self.tail_fraction,
        ]
        values += [self.hs_norms.get(float(s)) for s in hs]
        return [fmt(v) for v in values]


def fmt(value):
    """17 significant digits; empty for absent values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    return f"{float(value):.17g}"


def _origin(grid):
    return (Ellipsis,) + (0,) * grid.dim


def energy(grid, B):
    """Half the squared L2 norm."""
    return 0.5 * grid.volume * float(np.sum(np.abs(B) ** 2))


def dissipation(grid, u, gamma):
    """Squared homogeneous H^gamma norm of a zero-mean field."""
    if sp.zero_mean_violation(grid, u) > sp.MEAN_TOL:
        raise DomainError("dissipation needs a zero-mean velocity")
    return sobolev_norm(grid, u, gamma) ** 2


def sobolev_norm(grid, f, s):
    """Homogeneous H^s norm; the mean is excluded."""
    if s < 0:
        raise ValueError(f"s must be >= 0, got {s}")
    weight = grid.k2**s
    weight[(0,) * grid.dim] = 0.0
    return math.sqrt(grid.volume * float(np.sum(weight * np.abs(f) ** 2)))


def hs_norm(grid, f, s):
    """Inhomogeneous H^s norm taken as mean part plus homogeneous part."""
    mean_sq = grid.volume * float(np.sum(np.abs(np.asarray(f)[_origin(grid)]) ** 2))
    return math.sqrt(mean_sq + sobolev_norm(grid, f, s) ** 2)


def lp_norm(grid, f, p):
    """L^p norm by grid quadrature; ``p = inf`` gives the collocation max."""
    phys = sp.to_physical(grid, f)
    mag = np.sqrt(np.sum(phys**2, axis=0)) if phys.ndim > grid.dim else np.abs(phys)
    if math.isinf(p):
        return float(np.max(mag))
    cell = grid.volume / mag.size
    return float((cell * np.sum(mag**p)) ** (1.0 / p))


def helicity(grid, B):
    """Magnetic helicity: integral of A.B with A the zero-mean vector potential."""
    if grid.dim != 3:
        raise ValueError("helicity is defined in 3D")
    A = sp.vector_potential(grid, B)
    return sp.inner(grid, A, B)


def cross_helicity(grid, u, B):
    return sp.inner(grid, u, B)


def linf_gradient(grid, f):
    """Max over the collocation grid of the Frobenius norm of the gradient."""
    arr = np.asarray(f)
    comps = arr[None] if arr.ndim == grid.dim else arr
    total = np.zeros(grid.shape)
    for c in comps:
        for j in range(grid.dim):
            total += sp.to_physical(grid, sp.derivative(grid, c, j)) ** 2
    return float(np.sqrt(np.max(total)))


def current_l2(grid, B):
    return sp.l2_norm(grid, sp.curl(grid, B))


def tail_fraction(grid, f):
    """Share of fluctuation energy in the top third of the dealiased band."""
    arr = np.asarray(f)
    comps = arr[None] if arr.ndim == grid.dim else arr
    power = np.sum(np.abs(comps) ** 2, axis=0)
    power[(0,) * grid.dim] = 0.0
    total = float(np.sum(power))
    if total == 0:
        return 0.0
    tail = np.zeros(grid.shape, dtype=bool)
    for kj, n in zip(grid.k, grid.n):
        tail = tail | (9 * np.abs(kj) > 2 * n)
    return min(1.0, float(np.sum(power[tail])) / total)


def record(state, hs=(1.0, 2.0), u=None):
    """Assemble every functional for one state."""
    grid, B = state.grid, state.B
    if u is None:
        u = constitutive_velocity(grid, B, state.gamma)
    H = None
    if grid.dim == 3 and sp.zero_mean_violation(grid, B) <= sp.MEAN_TOL:
        H = helicity(grid, B)
    u_lip = linf_gradient(grid, u)
    b_lip = linf_gradient(grid, B)
    return DiagnosticsRecord(
        t=float(state.t),
        energy=energy(grid, B),
        dissipation=dissipation(grid, u, state.gamma),
        helicity=H,
        cross_helicity=cross_helicity(grid, u, B),
        u_lip=u_lip,
        b_lip=b_lip,
        criterion=u_lip + b_lip**2,
        current_l2=current_l2(grid, B),
        tail_fraction=tail_fraction(grid, B),
        hs_norms={float(s): sobolev_norm(grid, B, s) for s in hs},
    )


def csv_header(hs):
    return CSV_BASE + [f"hs_{float(s):g}" for s in hs]


def write_diagnostics_csv(path, records, hs=(1.0, 2.0)):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(hs))
        for rec in records:
            writer.writerow(rec.row(hs))


# --- trajectory checks -----------------------------------------------------


def fd_weights(nodes, x0):
    """First-derivative weights at ``x0`` for arbitrary nodes (Fornberg)."""
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    c = np.zeros((n, 2))
    c1 = 1.0
    c4 = nodes[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, 1)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for m in range(mn, 0, -1):
                    c[i, m] = c1 * (m * c[i - 1, m - 1] - c5 * c[i - 1, m]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for m in range(mn, 0, -1):
                c[j, m] = (c4 * c[j, m] - m * c[j, m - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, 1]


def time_derivative(times, values, order=4):
    """Fourth-order (five-point) derivative of sampled values at every sample."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    width = order + 1
    if times.size < width:
        raise ValueError(f"need at least {width} samples, got {times.size}")
    out = np.empty_like(values)
    half = width // 2
    for i in range(times.size):
        lo = min(max(0, i - half), times.size - width)
        idx = slice(lo, lo + width)
        out[i] = fd_weights(times[idx], times[i]) @ values[idx]
    return out


def energy_identity_residuals(records):
    """|dE/dt + dissipation| at every sample, E = half the squared L2 norm."""
    t = [r.t for r in records]
    dEdt = time_derivative(t, [r.energy for r in records])
    return np.abs(dEdt + np.array([r.dissipation for r in records]))


def fit_blowup_constant(records, s):
    """Smallest C with |B(t)|^2_{H^s} <= |B0|^2_{H^s} exp(C int criterion).

    Returns 0 when the norm never grows.
    """
    t = np.array([r.t for r in records])
    crit = np.array([r.criterion for r in records])
    norms = np.array([r.hs_norms[float(s)] for r in records])
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (crit[1:] + crit[:-1]) * np.diff(t))])
    growth = 2.0 * np.log(norms / norms[0])
    mask = (integral > 0) & (growth > 0)
    if not np.any(mask):
        return 0.0
    return float(np.max(growth[mask] / integral[mask]))
