"""
Two-and-a-half-dimensional exact solutions at gamma = 0.

For a steady 2D Euler field v(x1, x2) and a scalar g(x1, x2, t),

    B = (v, g),    u = (0, 0, v.grad g)

solve the 3D system provided g obeys the rank-one diffusion equation
dg/dt = (v.grad)^2 g. Shear flows v = (V(x2), 0) give closed-form solutions
whose current grows like t^(1/4); the cellular flow grad-perp(sin x1 sin x2)
gives exponential growth of d1 g at the hyperbolic point.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from mrelab import dynamics, spectral as sp
from mrelab.diagnostics import fmt, tail_fraction
from mrelab.dynamics import ResolutionWarning, rk4_step
from mrelab.errors import DomainError, PrecisionError
from mrelab.initial import cellular_flow

C1 = (2 * math.pi**3) ** 0.25
C2 = (2 * math.pi**2 / math.e) ** 0.5
EIGEN_TOL = 1e-10
EULER_TOL = 1e-10

GROWTH_CSV = ["t", "norm_l2", "ratio1", "norm_l2linf", "ratio2"]
HYPERBOLIC_CSV = ["t", "d1g_origin", "ratio_exp", "grad_linf", "tail_fraction"]


def _mul(grid, x, y):
    return sp.dealias(grid, sp.to_spectral(grid, sp.to_physical(grid, x) * sp.to_physical(grid, y)))


def _along(grid, v, g):
    """(v . grad) g, dealiased."""
    return sum(_mul(grid, v[j], sp.derivative(grid, g, j)) for j in range(2))


def euler_residual(grid, v):
    """L2 size of P(v.grad v) relative to |v|^2_{L2}; zero for a steady 2D Euler state."""
    adv = np.stack([_along(grid, v, v[i]) for i in range(2)])
    scale = sp.l2_norm(grid, v) ** 2
    if scale == 0:
        return 0.0
    return sp.l2_norm(grid, sp.leray_project(grid, adv)) / scale


@dataclass
class Rank1Problem:
    """A steady 2D Euler field ``v`` and initial scalar ``g0`` on a 2D grid.

    ``flavor`` is ``"shear"`` (then ``V`` is the x2-profile and ``lam`` the
    x1-eigenvalue), ``"hyperbolic"`` or ``"generic"``.
    """

    grid: sp.Grid
    v: np.ndarray
    g0: np.ndarray
    flavor: str = "generic"
    V: np.ndarray | None = None
    lam: float | None = None

    def validate(self):
        if self.grid.dim != 2:
            raise DomainError("rank-one problems live on a 2D grid")
        if not sp.is_divergence_free(self.grid, self.v, 1e-12):
            raise DomainError("v must be divergence-free")
        if euler_residual(self.grid, self.v) > EULER_TOL:
            raise DomainError("v is not a steady 2D Euler state")
        if self.flavor == "shear":
            eigen_residual(self.grid, self.g0, self.lam, check=True)
        return self


def eigen_residual(grid, g0, lam, check=False):
    """max |-d11 g0 - lam^2 (g0 - P0 g0)| relative to max |g0 - P0 g0|."""
    fluct = np.array(g0, copy=True)
    fluct[0, :] = 0.0
    resid = -sp.derivative(grid, sp.derivative(grid, g0, 0), 0) - lam**2 * fluct
    scale = max(np.max(np.abs(fluct)), 1e-300)
    value = float(np.max(np.abs(resid)) / scale)
    if check and value > EIGEN_TOL:
        raise DomainError(f"g0 is not an x1-eigenfunction with lambda = {lam} (residual {value:.3g})")
    return value


def shear_problem(grid, eps=0.1):
    """Growth example: V = eps sin x2, g0 = 1 + eps cos x1, lambda = 1."""
    x1, x2 = grid.coords()
    V = sp.to_spectral(grid, eps * np.sin(x2))
    v = np.stack([V, np.zeros_like(V)])
    g0 = sp.to_spectral(grid, 1 + eps * np.cos(x1))
    return Rank1Problem(grid, v, g0, "shear", V=V, lam=1.0)


def hyperbolic_problem(grid, g0):
    return Rank1Problem(grid, cellular_flow(grid), g0, "hyperbolic")


def rank1_rhs(grid, g, v):
    """(v.grad)^2 g with dealiased products."""
    sp.check_scalar(grid, g)
    sp.check_vector(grid, v)
    return _along(grid, v, _along(grid, v, g))


def hyperbolic_rhs_expanded(grid, g):
    """Expanded coefficient form of the cellular-flow equation, for cross-checks."""
    x1, x2 = grid.coords()
    d = lambda s, *ax: _chain(grid, s, ax)  # noqa: E731
    terms = [
        (np.sin(x1) ** 2 * np.cos(x2) ** 2, d(g, 0, 0)),
        (np.cos(x1) ** 2 * np.sin(x2) ** 2, d(g, 1, 1)),
        (-0.5 * np.sin(2 * x1) * np.sin(2 * x2), d(g, 0, 1)),
        (0.5 * np.sin(2 * x1), d(g, 0)),
        (0.5 * np.sin(2 * x2), d(g, 1)),
    ]
    phys = sum(c * sp.to_physical(grid, t) for c, t in terms)
    return sp.dealias(grid, sp.to_spectral(grid, phys))


def _chain(grid, s, axes):
    for ax in axes:
        s = sp.derivative(grid, s, ax)
    return s


def shear_closed_form(grid, V, g0, lam, t, check=True):
    """g = P0 g0 + exp(-lam^2 V^2 t) (g0 - P0 g0), evaluated on the grid."""
    if check:
        eigen_residual(grid, g0, lam, check=True)
    mean_part = np.zeros_like(g0)
    mean_part[0, :] = g0[0, :]
    Vp = sp.to_physical(grid, V)
    phys = sp.to_physical(grid, mean_part) + np.exp(-(lam**2) * Vp**2 * t) * sp.to_physical(grid, g0 - mean_part)
    return sp.to_spectral(grid, phys)


def assemble_state(grid, v, g, n3=8):
    """Embed (v, g) into x3-independent 3D fields B = (v, g), u = (0, 0, v.grad g)."""
    grid3 = grid.embed(n3)
    B = grid3.zeros(vector=True)
    u = grid3.zeros(vector=True)
    B[0, :, :, 0] = v[0]
    B[1, :, :, 0] = v[1]
    B[2, :, :, 0] = g
    u[2, :, :, 0] = _along(grid, v, g)
    return grid3, B, u


def integrate_rank1(grid, g0, v, t_end, cfl=0.4, dt=None, on_step=None):
    """RK4 for dg/dt = (v.grad)^2 g with the h^2 diffusion cap."""
    if dt is None:
        vmax2 = float(np.max(np.sum(sp.to_physical(grid, v) ** 2, axis=0)))
        dt = cfl * grid.spacing**2 / (2.0 * max(1.0, vmax2))
    nsteps = max(1, math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    h = t_end / nsteps if nsteps else 0.0
    g = np.array(g0, dtype=complex, copy=True)
    vp = sp.to_physical(grid, v)
    mask = grid.dealias_mask

    def along(y):
        phys = sum(vp[j] * sp.to_physical(grid, sp.derivative(grid, y, j)) for j in range(2))
        return sp.to_spectral(grid, phys) * mask

    f = lambda y: along(along(y))  # noqa: E731
    for i in range(1, nsteps + 1):
        g = rk4_step(f, g, h)
        if on_step is not None:
            on_step(i * h, g)
    return g


# --- algebraic growth of the current -----------------------------------------


@dataclass
class GrowthReport:
    eps: float
    t: np.ndarray
    norm_l2: np.ndarray
    ratio1: np.ndarray
    norm_l2linf: np.ndarray
    ratio2: np.ndarray

    def rows(self):
        return [
            [fmt(x) for x in row]
            for row in zip(self.t, self.norm_l2, self.ratio1, self.norm_l2linf, self.ratio2)
        ]


def _x1_factor():
    # squared L2 norm of cos(x1) on the circle via Parseval: 2 pi (1/4 + 1/4)
    return 2 * math.pi * (0.5**2 + 0.5**2)


def _profile_l2sq(s, rtol=1e-12):
    """Integral over the circle of sin^2 cos^2 exp(-2 s sin^2)."""
    if s == 0:
        return math.pi / 4
    width = 1.0 / math.sqrt(max(s, 1.0))
    pts = [p for p in (width, 3 * width, 10 * width) if p < math.pi / 2]
    fn = lambda x: (math.sin(x) * math.cos(x)) ** 2 * math.exp(-2 * s * math.sin(x) ** 2)  # noqa: E731
    val, err = integrate.quad(fn, 0.0, math.pi / 2, points=pts, epsabs=0.0, epsrel=rtol, limit=400)
    if not err <= 1e3 * rtol * abs(val) + 1e-300:
        raise PrecisionError(f"quadrature did not converge at s = {s}: error {err:.3g} for {val:.3g}")
    # integrand is even and pi-periodic
    return 4.0 * val


def _profile_sup(s):
    """max over x2 of |sin x2 cos x2| exp(-s sin^2 x2)."""
    if s == 0:
        return 0.5
    fn = lambda x: -math.sin(x) * math.cos(x) * math.exp(-s * math.sin(x) ** 2)  # noqa: E731
    # the maximizer sits near sin^2 = 1 / (2 s) for large s
    guess = math.asin(min(1.0, math.sqrt(1.0 / (2.0 * s)))) if s > 0.5 else math.pi / 4
    hi = min(math.pi / 2, 4 * guess + 1e-3)
    res = optimize.minimize_scalar(fn, bounds=(0.0, hi), method="bounded", options={"xatol": 1e-14})
    if not res.success:
        raise PrecisionError(f"maximization failed at s = {s}")
    return -res.fun


def current_norms(eps, t):
    """(L2, L2_x1 Linf_x2) norms of d2 B3 = -2 t eps^3 sin x2 cos x2 cos x1 exp(-eps^2 t sin^2 x2)."""
    if t == 0:
        return 0.0, 0.0
    s = eps**2 * t
    amp = 2.0 * t * eps**3
    l2 = amp * math.sqrt(_x1_factor() * _profile_l2sq(s))
    l2linf = amp * math.sqrt(_x1_factor()) * _profile_sup(s)
    return l2, l2linf


def growth_report(eps, t_samples):
    if not 0 < eps < 1:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    t = np.asarray(t_samples, dtype=float)
    n1 = np.empty_like(t)
    n2 = np.empty_like(t)
    for i, ti in enumerate(t):
        n1[i], n2[i] = current_norms(eps, ti)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(t > 0, n1 / (C1 * eps**1.5 * t**0.25), np.nan)
        r2 = np.where(t > 0, n2 / (C2 * eps**2 * t**0.5), np.nan)
    return GrowthReport(eps, t, n1, r1, n2, r2)


def growth_slope(eps, s_lo=10.0, s_hi=100.0, npts=41):
    """Least-squares slope of log|d2 B3|_{L2} against log t for eps^2 t in [s_lo, s_hi]."""
    t = np.geomspace(s_lo, s_hi, npts) / eps**2
    rep = growth_report(eps, t)
    return float(np.polyfit(np.log(t), np.log(rep.norm_l2), 1)[0])


# --- limiting states and current sheets ------------------------------------------


def _circle_mean(fn, n=1024):
    x = -math.pi + 2 * math.pi * np.arange(n) / n
    return float(np.mean(fn(x)))


def limiting_state(V, g0):
    """Pointwise t -> infinity limit of the shear solution, as a physical sampler.

    ``V`` and ``g0`` are callables of x2 and x1. The returned function maps
    (x1, x2) to the stacked components (V, 0, mean g0) where V != 0 and
    (V, 0, g0) where V == 0.
    """
    gbar = _circle_mean(g0)

    def sampler(x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        Vx = np.asarray(V(x2), dtype=float) * np.ones_like(x2)
        b3 = np.where(Vx != 0, gbar, np.asarray(g0(x1), dtype=float) * np.ones_like(x1))
        return np.stack([Vx, np.zeros_like(Vx), b3])

    sampler.mean_g0 = gbar
    return sampler


def shear_closed_form_pointwise(V, g0, lam, t):
    """Closed-form shear solution as a physical sampler (third component of B)."""
    gbar = _circle_mean(g0)

    def sampler(x1, x2):
        return gbar + np.exp(-(lam**2) * np.asarray(V(x2)) ** 2 * t) * (np.asarray(g0(x1)) - gbar)

    return sampler


@dataclass
class CurrentSheet:
    x2: float
    x1: np.ndarray
    jump: np.ndarray  # [B] across the plane, side x2+ minus side x2-
    current: np.ndarray  # surface current e2 x [B], shape (3, len(x1))


@dataclass
class SheetReport:
    sheets: list = field(default_factory=list)
    limit: object = None

    @property
    def planes(self):
        return [s.x2 for s in self.sheets]

    def bounded_current(self, x1, x2, h=1e-4):
        """Curl of the limiting field away from the sheets (fourth-order differences)."""
        lim = self.limit

        def d(axis):
            def at(step):
                return lim(x1 + step, x2) if axis == 0 else lim(x1, x2 + step)

            return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h)

        dB1 = d(0)
        dB2 = d(1)
        return np.stack([dB2[2], -dB1[2], dB1[1] - dB2[0]])

    def rows(self):
        out = []
        for s in self.sheets:
            for i, x1 in enumerate(s.x1):
                out.append([fmt(v) for v in (s.x2, x1, s.jump[2, i], *s.current[:, i])])
        return out


SHEET_CSV = ["x2_plane", "x1", "jump_b3", "current_1", "current_2", "current_3"]


def _wrap(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


def current_sheet_report(V, g0, n_x2=4096, n_x1=64, side=1e-9):
    """Locate planes x2 = const where the limiting field jumps, and the jump amplitude.

    A plane is reported where the limit switches between the V != 0 and
    V == 0 cases over intervals on both sides; isolated zeros of V between
    samples are measure-zero and carry no jump.
    """
    lim = limiting_state(V, g0)
    x2 = -math.pi + 2 * math.pi * (np.arange(n_x2) + 0.5) / n_x2
    nonzero = np.asarray(V(x2), dtype=float) != 0
    x1 = -math.pi + 2 * math.pi * np.arange(n_x1) / n_x1
    sheets = []
    for i in range(n_x2):
        j = (i + 1) % n_x2
        if nonzero[i] == nonzero[j]:
            continue
        lo, hi = x2[i], x2[j] + (2 * math.pi if j == 0 else 0.0)
        state_lo = nonzero[i]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if (float(V(_wrap(mid))) != 0) == state_lo:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        plane = _wrap(0.5 * (lo + hi))
        below = lim(x1, np.full_like(x1, _wrap(lo - side)))
        above = lim(x1, np.full_like(x1, _wrap(hi + side)))
        jump = above - below
        if np.max(np.abs(jump)) == 0:
            continue
        # e2 x (j1, j2, j3) = (j3, 0, -j1)
        current = np.stack([jump[2], np.zeros_like(jump[2]), -jump[0]])
        sheets.append(CurrentSheet(plane, x1, jump, current))
    sheets.sort(key=lambda s: s.x2)
    return SheetReport(sheets, lim)


def sheet_example_data():
    """V = 1_{|x2| <= pi/2} cos^2 x2 and g0 = sin x1."""

    def V(x2):
        x2 = np.asarray(x2, dtype=float)
        return np.where(np.abs(x2) <= math.pi / 2, np.cos(x2) ** 2, 0.0)

    return V, np.sin


# --- exponential growth at the hyperbolic point ---------------------------------------


@dataclass
class HyperbolicReport:
    t: np.ndarray
    d1g_origin: np.ndarray
    ratio_exp: np.ndarray
    grad_linf: np.ndarray
    tail_fraction: np.ndarray
    l2_energy: np.ndarray
    rate: float
    lower_bound_ok: bool
    certified_until: float
    upper_constant: float
    warnings: list = field(default_factory=list)

    def rows(self):
        return [
            [fmt(x) for x in row]
            for row in zip(self.t, self.d1g_origin, self.ratio_exp, self.grad_linf, self.tail_fraction)
        ]


def _grad_b_linf(grid, v, g):
    """Lipschitz norm of B = (v, g): max Frobenius norm of the 3x3 gradient."""
    total = np.zeros(grid.shape)
    for comp in (v[0], v[1], g):
        for j in range(2):
            total += sp.to_physical(grid, sp.derivative(grid, comp, j)) ** 2
    return float(np.sqrt(np.max(total)))


def hyperbolic_experiment(grid, g0, t_end=2.0, samples=41, cfl=0.4, tail_tol=dynamics.TAIL_WARN):
    """Evolve g under the cellular flow and track d1 g at the origin against e^t."""
    problem = hyperbolic_problem(grid, g0)
    v = problem.v
    origin = (0, 0)
    d1g0 = sp.evaluate(grid, sp.derivative(grid, g0, 0), origin)
    grad0 = abs(d1g0) ** 2 + sp.evaluate(grid, sp.derivative(grid, g0, 1), origin) ** 2
    grad0 = math.sqrt(grad0)
    b0_norm = math.sqrt(sum(sp.l2_norm(grid, c) ** 2 + sum(sp.l2_norm(grid, sp.derivative(grid, c, j)) ** 2 for j in range(2)) for c in (v[0], v[1], g0)))

    sample_t = np.linspace(0.0, t_end, samples)
    out = {k: [] for k in ("t", "d1", "grad", "tail", "energy")}
    msgs = []

    def take(t, g):
        out["t"].append(t)
        out["d1"].append(sp.evaluate(grid, sp.derivative(grid, g, 0), origin))
        out["grad"].append(_grad_b_linf(grid, v, g))
        tf = tail_fraction(grid, g)
        out["tail"].append(tf)
        out["energy"].append(0.5 * sp.l2_norm(grid, g) ** 2)
        if tf > tail_tol:
            msg = f"tail fraction {tf:.3g} exceeds {tail_tol:g} at t = {t:.6g}"
            msgs.append(msg)
            warnings.warn(msg, ResolutionWarning, stacklevel=3)

    take(0.0, g0)
    g = np.array(g0, dtype=complex, copy=True)
    for t0, t1 in zip(sample_t[:-1], sample_t[1:]):
        g = integrate_rank1(grid, g, v, t1 - t0, cfl=cfl)
        take(float(t1), g)

    t = np.array(out["t"])
    d1 = np.array(out["d1"])
    grad = np.array(out["grad"])
    tail = np.array(out["tail"])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = d1 / (np.exp(t) * d1g0) if d1g0 != 0 else np.full_like(t, np.nan)
    rate = float(np.polyfit(t, np.log(np.abs(d1)), 1)[0]) if d1g0 != 0 else float("nan")
    resolved = tail <= tail_tol
    certified = float(t[np.argmin(resolved)] if not resolved.all() else t[-1])
    if not resolved[0]:
        certified = 0.0
    with np.errstate(divide="ignore"):
        upper = float(np.max(np.log(np.maximum(grad, 1e-300) / max(b0_norm, 1e-300)) / np.maximum(t, 1e-300)))
    return HyperbolicReport(
        t=t,
        d1g_origin=d1,
        ratio_exp=ratio,
        grad_linf=grad,
        tail_fraction=tail,
        l2_energy=np.array(out["energy"]),
        rate=rate,
        lower_bound_ok=bool(np.all(grad0 * np.exp(t) <= grad * (1 + 1e-12))),
        certified_until=certified,
        upper_constant=upper,
        warnings=msgs,
    )
