"""
Perturbations of the 2D steady state B = e1, u = 0 at gamma = 0.

Writing B = e1 + b, the perturbation splits into an x1-averaged shear part
``a = P0 b1`` (a function of x2 only) and an oscillating part ``f = Pperp b``.
The velocity is u = d1 b + v with ``w = Pperp v``. This module evaluates the
linear operator, pressures and nonlinear terms of the (a, f) system, runs the
frozen-coefficient linear semigroup, and checks the nonlinear decay bounds
along full relaxation runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from mrelab import dynamics, spectral as sp
from mrelab.diagnostics import hs_norm, sobolev_norm
from mrelab.dynamics import IntegratorConfig, MREState
from mrelab.initial import constant_field

BOUND_CSV = ["t", "f_hk", "bound_f", "a_hk2", "bound_a", "b_hm", "bound_b", "ok"]


@dataclass
class PerturbationDecomposition:
    a: np.ndarray
    f: np.ndarray
    w: np.ndarray | None = None
    residual: float = 0.0


@dataclass
class StabilityParams:
    k: int = 4
    m: int = 13
    delta: float = 0.5
    eps: float = 1e-2

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 4:
            raise ValueError(f"k must be an integer >= 4, got {self.k}")
        if int(self.m) != self.m or self.m < self.k + 9:
            raise ValueError(f"m must be an integer >= k + 9, got {self.m}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")


def p0(s):
    """Average over x1: keep only the k1 = 0 modes (works on stacked fields)."""
    out = np.zeros_like(s)
    out[..., 0, :] = s[..., 0, :]
    return out


def pperp(s):
    out = np.array(s, copy=True)
    out[..., 0, :] = 0.0
    return out


def _check2d(grid):
    if grid.dim != 2:
        raise ValueError("the perturbation system is two-dimensional")


def _mul(grid, x, y):
    """Dealiased product of two spectral scalars."""
    return sp.dealias(grid, sp.to_spectral(grid, sp.to_physical(grid, x) * sp.to_physical(grid, y)))


def _advect(grid, f, g):
    """(f . grad) g for a vector f and a scalar g."""
    return sum(_mul(grid, f[j], sp.derivative(grid, g, j)) for j in range(grid.dim))


def _advect_vec(grid, f, g):
    return np.stack([_advect(grid, f, g[i]) for i in range(grid.dim)])


def _d(grid, s, *axes):
    for ax in axes:
        s = sp.derivative(grid, s, ax)
    return s


def _inv_neg_lap(grid, s):
    s = np.array(s, copy=True)
    s[0, 0] = 0.0
    return sp.inv_fractional_laplacian(grid, s, 1.0)


def decompose(grid, b):
    """Split a 2D perturbation into (a, f); ``residual`` is the L2 size of P0 b2."""
    _check2d(grid)
    sp.check_vector(grid, b)
    a = p0(b[0])
    f = pperp(b)
    return PerturbationDecomposition(a=a, f=f, residual=sp.l2_norm(grid, p0(b[1])))


def pressure_linear(grid, a, f):
    """p_L = 2 (-Delta)^-1 (d2 a d1 f2), zero mean."""
    _check2d(grid)
    return 2.0 * _inv_neg_lap(grid, _mul(grid, _d(grid, a, 1), _d(grid, f[1], 0)))


def pressure_nonlinear(grid, f):
    """p_N = 2 (-Delta)^-1 ((d1 f1)^2 + d1 f2 d2 f1), zero mean."""
    _check2d(grid)
    d1f1 = _d(grid, f[0], 0)
    src = _mul(grid, d1f1, d1f1) + _mul(grid, _d(grid, f[1], 0), _d(grid, f[0], 1))
    return 2.0 * _inv_neg_lap(grid, src)


def _one_plus(a):
    out = np.array(a, dtype=complex, copy=True)
    out[0, 0] += 1.0
    return out


def linear_operator(grid, a, f, pL=None):
    """L(f) = (1+a)^2 d1^2 f + (1+a) grad d1 p_L - d2 a d2 p_L e1."""
    _check2d(grid)
    if pL is None:
        pL = pressure_linear(grid, a, f)
    one_a = _one_plus(a)
    coef = _mul(grid, one_a, one_a)
    d1pL = _d(grid, pL, 0)
    out = np.stack(
        [
            _mul(grid, coef, _d(grid, f[i], 0, 0)) + _mul(grid, one_a, _d(grid, d1pL, i))
            for i in range(2)
        ]
    )
    out[0] -= _mul(grid, _d(grid, a, 1), _d(grid, pL, 1))
    return out


def w_velocity(grid, a, f):
    """w = a d1 f + grad p_L + d2 a f2 e1 + Pperp(f.grad f + grad p_N)."""
    _check2d(grid)
    pL = pressure_linear(grid, a, f)
    pN = pressure_nonlinear(grid, f)
    ff = _advect_vec(grid, f, f) + sp.gradient(grid, pN)
    out = np.stack([_mul(grid, a, _d(grid, f[i], 0)) + _d(grid, pL, i) for i in range(2)])
    out[0] += _mul(grid, _d(grid, a, 1), f[1])
    return out + pperp(ff)


def nonlinear_term(grid, a, f, w):
    """The nonlinearity N(f, w) of the f equation, all terms dealiased."""
    _check2d(grid)
    pN = pressure_nonlinear(grid, f)
    q = p0(_mul(grid, f[0], f[1]))
    ff_pN = pperp(_advect_vec(grid, f, f) + sp.gradient(grid, pN))
    out = np.stack([_mul(grid, a, _d(grid, ff_pN[i], 0)) for i in range(2)])
    out += pperp(_advect_vec(grid, f, w) - _advect_vec(grid, w, f))
    d2q = _d(grid, q, 1)
    out -= np.stack([_mul(grid, d2q, _d(grid, f[i], 0)) for i in range(2)])
    out += 2.0 * pperp(np.stack([_advect(grid, f, _d(grid, f[i], 0)) for i in range(2)]))
    out += pperp(sp.gradient(grid, _d(grid, pN, 0)))
    out[0] += _mul(grid, _d(grid, q, 1, 1), f[1])
    out[0] -= _mul(grid, _d(grid, a, 1), pperp(_advect(grid, f, f[1]) + _d(grid, pN, 1)))
    return out


def a_rhs(grid, f, w):
    """N'(f, w) = d2 P0(2 f2 d1 f1 + f2 w1 - w2 f1); a does not enter."""
    _check2d(grid)
    src = 2.0 * _mul(grid, f[1], _d(grid, f[0], 0)) + _mul(grid, f[1], w[0]) - _mul(grid, w[1], f[0])
    return _d(grid, p0(src), 1)


def full_velocity_from_parts(grid, f, w):
    """Reassemble v from (f, w): v1 = w1 + d2 P0(f1 f2), v2 = w2."""
    v = np.array(w, copy=True)
    v[0] += _d(grid, p0(_mul(grid, f[0], f[1])), 1)
    return v


# --- frozen-coefficient linear semigroup -----------------------------------


@dataclass
class DecayReport:
    times: np.ndarray
    norms: np.ndarray
    rate: float
    step_rate: float
    delta: float
    k: int
    ok: bool

    def rows(self):
        return [(float(t), float(n)) for t, n in zip(self.times, self.norms)]


def _lawson_rk4(rhs, f, dt, lam):
    """One integrating-factor RK4 step of df/dt = lam * f + rhs(f).

    Exact when ``rhs`` vanishes.
    """
    e_half = np.exp(0.5 * dt * lam)
    e_full = e_half * e_half
    k1 = rhs(f)
    k2 = rhs(e_half * (f + 0.5 * dt * k1))
    k3 = rhs(e_half * f + 0.5 * dt * k2)
    k4 = rhs(e_full * f + dt * e_half * k3)
    return e_full * f + (dt / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)


def linear_semigroup_run(grid, a, f0, t_end, dt, k=4, delta=0.5, sample_every=1):
    """Integrate df/dt = L(f) with ``a`` frozen; fit the decay rate of |f|_{H^k dot}.

    The constant-coefficient part d1^2 is integrated exactly; the a-dependent
    remainder is treated by RK4 in the integrating-factor frame.
    """
    _check2d(grid)
    lam = -(grid.k[0] ** 2) * np.ones(grid.shape)
    a = np.asarray(a)

    def remainder(f):
        return linear_operator(grid, a, f) - _d(grid, f, 0, 0)

    nsteps = max(1, math.ceil(t_end / dt - 1e-9))
    h = t_end / nsteps
    f = np.array(f0, dtype=complex, copy=True)
    times = [0.0]
    norms = [sobolev_norm(grid, f, k)]
    for i in range(1, nsteps + 1):
        f = _lawson_rk4(remainder, f, h, lam)
        if i % sample_every == 0 or i == nsteps:
            times.append(i * h)
            norms.append(sobolev_norm(grid, f, k))
    times = np.array(times)
    norms = np.array(norms)
    if norms[0] == 0:
        rate = step_rate = -math.inf
    else:
        rate = float(np.polyfit(times, np.log(norms), 1)[0])
        step_rate = float(math.log(norms[1] / norms[0]) / (times[1] - times[0]))
    return DecayReport(times, norms, rate, step_rate, delta, k, ok=rate <= -(1.0 - delta))


# --- nonlinear bootstrap experiment -----------------------------------------


def stability_datum(grid, eps, m):
    """eps * skew-grad(sin x1 sin x2) normalized to H^m norm eps.

    Coefficients are set directly so no transform round-off reaches the
    high modes, where the H^m weight would amplify it.
    """
    _check2d(grid)
    phi = grid.zeros()
    for k, c in (((1, 1), -0.25), ((-1, -1), -0.25), ((1, -1), 0.25), ((-1, 1), 0.25)):
        phi[grid.index_of(k)] = c
    b = sp.perp_gradient(grid, phi)
    return eps * b / hs_norm(grid, b, m)


@dataclass
class BoundSample:
    t: float
    f_hk: float
    bound_f: float
    a_hk2: float
    bound_a: float
    b_hm: float
    bound_b: float
    b_l2: float
    p0b2: float
    u_hk1: float
    ok: bool

    def row(self):
        from mrelab.diagnostics import fmt

        return [fmt(v) for v in (self.t, self.f_hk, self.bound_f, self.a_hk2, self.bound_a, self.b_hm, self.bound_b, self.ok)]


@dataclass
class BoundReport:
    params: StabilityParams
    samples: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self):
        return all(s.ok for s in self.samples)

    @property
    def p0b2_max(self):
        return max((s.p0b2 for s in self.samples), default=0.0)

    def relaxation_ok(self, const=None):
        """u decays like eps * exp(-(1 - delta) t / 2) times a constant fixed at t = 0."""
        if not self.samples:
            return True
        first = self.samples[0]
        eps, delta = self.params.eps, self.params.delta
        if const is None:
            const = max(first.u_hk1, 1e-300) / eps
        return all(s.u_hk1 <= const * eps * math.exp(-(1 - delta) * s.t / 2) * (1 + 1e-9) + 1e-300 for s in self.samples)


def bound_sample(grid, B, t, params):
    k, m, eps, delta = params.k, params.m, params.eps, params.delta
    b = B - constant_field(grid, (1.0, 0.0))
    parts = decompose(grid, b)
    f_hk = sobolev_norm(grid, parts.f, k)
    a_hk2 = hs_norm(grid, parts.a, k + 2)
    b_hm = sobolev_norm(grid, b, m) ** 2
    b_l2 = sp.l2_norm(grid, b)
    bound_f = 4 * eps * math.exp(-(1 - delta) * t)
    bound_a = 4 * eps
    bound_b = 4 * eps * math.exp(eps * t)
    u = dynamics.constitutive_velocity(grid, B, 0.0)
    ok = f_hk <= bound_f and a_hk2 <= bound_a and b_hm <= bound_b and b_l2 <= eps
    return BoundSample(t, f_hk, bound_f, a_hk2, bound_a, b_hm, bound_b, b_l2, parts.residual, hs_norm(grid, u, k - 1), ok)


def nonlinear_stability_experiment(grid, params, b0, t_end=5.0, cfg=None, sample_every=200, noise_floor=1e-13):
    """Run the full gamma = 0 system from e1 + b0 and check the decay bounds.

    ``noise_floor`` is passed to the integrator; without it FFT round-off
    near the grid scale dominates the H^m norm for large m.
    """
    import warnings

    _check2d(grid)
    cfg = cfg or IntegratorConfig(dt="auto", t_end=t_end)
    B0 = constant_field(grid, (1.0, 0.0)) + b0
    report = BoundReport(params)
    state = MREState(grid, B0, 0.0, 0.0)

    def on_sample(st, rec):
        report.samples.append(bound_sample(grid, st.B, st.t, params))

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", dynamics.ResolutionWarning)
        dynamics.run(state, cfg, sample_every=sample_every, hs=(), on_sample=on_sample, noise_floor=noise_floor)
    report.warnings = [str(w.message) for w in caught if issubclass(w.category, dynamics.ResolutionWarning)]
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    return report
