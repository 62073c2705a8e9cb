"""
Experiment registry: each experiment turns a validated config into CSV files,
an optional checkpoint and a list of asserted checks. ``run_experiment`` adds
the manifest and maps the outcome to an exit status.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mrelab import __version__, diagnostics as dg, dynamics as dy, exact25d as ex, spectral as sp
from mrelab import stability2d as st
from mrelab.config import ExperimentConfig
from mrelab.errors import BlowUpError, CheckpointFormatError
from mrelab.initial import abc_field, constant_field, random_scalar, random_solenoidal

EXIT_OK = 0
EXIT_BOUND = 1
EXIT_INPUT = 2
EXIT_BLOWUP = 3

CHECKPOINT_NAME = "checkpoint.mre"
MANIFEST_NAME = "manifest.json"


@dataclass
class Check:
    name: str
    ok: bool
    value: float | None = None
    bound: float | None = None
    note: str = ""

    def to_dict(self):
        out = {"ok": bool(self.ok)}
        if self.value is not None:
            out["value"] = float(self.value)
        if self.bound is not None:
            out["bound"] = float(self.bound)
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class Outcome:
    files: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    blowup: str | None = None

    def check(self, name, ok, value=None, bound=None, note=""):
        self.checks.append(Check(name, bool(ok), value, bound, note))

    @property
    def ok(self):
        return self.blowup is None and all(c.ok for c in self.checks)


@dataclass
class RunManifest:
    data: dict
    path: Path

    @property
    def ok(self):
        return self.data["ok"]

    @property
    def exit_status(self):
        return self.data["exit_status"]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# --- initial data ----------------------------------------------------------


def initial_field(cfg):
    """Seeded initial B for free-run and energy-audit configs."""
    grid = cfg.grid
    p = cfg.params
    kmax = p["kmax"] or None
    if p["init"] == "abc":
        base = abc_field(grid)
        pert = random_solenoidal(grid, p["seed"], norm=p["norm"] * sp.l2_norm(grid, base), kmax=kmax)
        B = base + pert
    else:
        B = random_solenoidal(grid, p["seed"], norm=p["norm"], kmax=kmax)
    if p["background"]:
        B = B + constant_field(grid, p["background"])
    return B


def hyperbolic_datum(grid, kind, seed=0):
    x1, x2 = grid.coords()
    if kind == "sin":
        return sp.to_spectral(grid, np.sin(x1))
    if kind == "cos":
        return sp.to_spectral(grid, np.cos(x1))
    return random_scalar(grid, seed, norm=1.0, kmax=4)


def linear_datum(grid, seed, band):
    """Generic admissible f0: divergence-free with P0 f = 0, unit H^0 norm."""
    f = st.pperp(random_solenoidal(grid, seed, norm=1.0, kmax=band))
    return f / sp.l2_norm(grid, f)


# --- experiments -----------------------------------------------------------


def _dynamics_run(cfg, out, outcome, state0):
    hs = tuple(cfg.params["hs"])
    every = cfg.params["checkpoint_every"] or None
    ckpt = out / CHECKPOINT_NAME
    try:
        state, records = dy.run(
            state0, cfg.integrator, sample_every=cfg.sample_every, hs=hs, checkpoint_path=ckpt, checkpoint_every=every
        )
    except BlowUpError as exc:
        outcome.blowup = str(exc)
        records = exc.records
        state = exc.state
        if state is not None:
            dy.write_checkpoint(ckpt, state)
    path = out / "diagnostics.csv"
    dg.write_diagnostics_csv(path, records, hs)
    outcome.files.append(path)
    if ckpt.exists():
        outcome.files.append(ckpt)
    return state, records


def _common_checks(cfg, outcome, state0, state, records):
    grid = cfg.grid
    e = np.array([r.energy for r in records])
    scale = max(2.0 * e[0], 1e-300)
    # |B| non-increasing up to 1e-8
    norms = np.sqrt(2.0 * e)
    worst = float(np.max(norms[1:] - np.minimum.accumulate(norms)[:-1])) if len(norms) > 1 else -math.inf
    outcome.check("energy_monotone", worst <= 1e-8, worst, 1e-8)
    if state is not None:
        drift = float(np.max(np.abs(sp.mean(grid, state.B) - sp.mean(grid, state0.B))))
        outcome.check("mean_conserved", drift <= 1e-12, drift, 1e-12)
    outcome.summary["energy_initial"] = float(e[0])
    outcome.summary["energy_final"] = float(e[-1])
    outcome.summary["samples"] = len(records)
    outcome.summary["max_tail_fraction"] = float(max(r.tail_fraction for r in records))
    fits = {}
    for s in cfg.params["hs"]:
        if len(records) > 1 and all(r.hs_norms.get(float(s), 0) > 0 for r in records):
            fits[f"{float(s):g}"] = dg.fit_blowup_constant(records, s)
    # reported only; the constant is not specified, so nothing is asserted
    outcome.summary["blowup_constant_fit"] = fits
    if state is not None:
        # monitored only; no bound is asserted for p > 2
        outcome.summary["b_lp"] = {
            name: [dg.lp_norm(grid, state0.B, p), dg.lp_norm(grid, state.B, p)] for name, p in (("4", 4.0), ("inf", math.inf))
        }
    return scale


def run_free(cfg, out):
    outcome = Outcome()
    state0 = dy.MREState(cfg.grid, initial_field(cfg), 0.0, cfg.gamma)
    state, records = _dynamics_run(cfg, out, outcome, state0)
    _common_checks(cfg, outcome, state0, state, records)
    return outcome


def run_energy_audit(cfg, out):
    outcome = Outcome()
    state0 = dy.MREState(cfg.grid, initial_field(cfg), 0.0, cfg.gamma)
    state, records = _dynamics_run(cfg, out, outcome, state0)
    scale = _common_checks(cfg, outcome, state0, state, records)
    if len(records) >= 5:
        res = float(np.max(dg.energy_identity_residuals(records)))
        outcome.check("energy_identity", res <= 1e-6 * scale, res / scale, 1e-6, "relative to |B0|^2")
    else:
        outcome.check("energy_identity", False, note="fewer than 5 samples")
    H = [r.helicity for r in records]
    if all(h is not None for h in H):
        H = np.array(H)
        h0 = abs(H[0])
        if h0 > 0:
            drift = float(np.max(np.abs(H - H[0])) / h0)
            outcome.check("helicity_drift", drift <= 1e-8, drift, 1e-8)
        gap = float(np.min(2.0 * np.array([r.energy for r in records]) - h0))
        outcome.check("arnold_inequality", gap >= -1e-8, gap, -1e-8, "min |B|^2 - |H(0)|")
    return outcome


def run_stability_linear(cfg, out):
    outcome = Outcome()
    p = cfg.params
    grid = cfg.grid
    x1, x2 = grid.coords()
    a = sp.to_spectral(grid, p["a_amp"] * np.sin(x2))
    f0 = linear_datum(grid, p["seed"], p["f_band"])
    dt = 0.01 if cfg.integrator.dt == "auto" else float(cfg.integrator.dt)
    every = max(1, cfg.sample_every)
    rep = st.linear_semigroup_run(grid, a, f0, cfg.integrator.t_end, dt, k=p["k"], delta=p["delta"], sample_every=every)
    path = out / "decay.csv"
    _write_csv(path, ["t", "f_hk"], [[dg.fmt(t), dg.fmt(n)] for t, n in rep.rows()])
    outcome.files.append(path)
    bound = -(1.0 - p["delta"])
    outcome.check("decay_rate", rep.ok, rep.rate, bound)
    # single-mode control with a = 0: rate -k1^2 on every mode
    zero = grid.zeros()
    for k1 in (1, 2):
        mode = grid.zeros(vector=True)
        mode[1][grid.index_of((k1, 0))] = 0.5
        mode[1][grid.index_of((-k1, 0))] = 0.5
        ctl = st.linear_semigroup_run(grid, zero, mode, dt, dt, k=p["k"], delta=p["delta"])
        err = abs(ctl.step_rate + k1 * k1)
        outcome.check(f"single_mode_rate_k{k1}", err <= 1e-10 * k1 * k1, err, 1e-10 * k1 * k1)
    outcome.summary["rate"] = rep.rate
    return outcome


def run_stability_nonlinear(cfg, out):
    outcome = Outcome()
    p = cfg.params
    grid = cfg.grid
    params = st.StabilityParams(k=p["k"], m=p["m"], delta=p["delta"], eps=p["eps"])
    b0 = st.stability_datum(grid, params.eps, params.m)
    try:
        rep = st.nonlinear_stability_experiment(
            grid, params, b0, t_end=cfg.integrator.t_end, cfg=cfg.integrator, sample_every=cfg.sample_every
        )
    except BlowUpError as exc:
        outcome.blowup = str(exc)
        return outcome
    path = out / "bounds.csv"
    _write_csv(path, st.BOUND_CSV, [s.row() for s in rep.samples])
    outcome.files.append(path)
    outcome.check("bootstrap_bounds", rep.ok, note="f, a, b bounds and |b|_L2 <= eps at every sample")
    outcome.check("p0_b2_zero", rep.p0b2_max <= 1e-9, rep.p0b2_max, 1e-9)
    outcome.summary["relaxation_ok"] = rep.relaxation_ok()
    outcome.summary["samples"] = len(rep.samples)
    outcome.summary["resolution_warnings"] = len(rep.warnings)
    return outcome


def run_shear_growth(cfg, out):
    outcome = Outcome()
    p = cfg.params
    eps = p["eps"]
    rep = ex.growth_report(eps, p["t_samples"])
    path = out / "growth.csv"
    _write_csv(path, ex.GROWTH_CSV, rep.rows())
    outcome.files.append(path)

    lo, hi = p["slope_range"]
    slope = ex.growth_slope(eps, lo, hi)
    outcome.check("growth_slope", abs(slope - 0.25) <= 0.02, slope, 0.02, "|slope - 1/4|")
    at = ex.growth_report(eps, [p["check_s"] / eps**2])
    tol = p["ratio_tol"]
    r1, r2 = float(at.ratio1[0]), float(at.ratio2[0])
    outcome.check("ratio1", abs(r1 - 1) <= tol, r1, tol, f"at eps^2 t = {p['check_s']:g}")
    outcome.check("ratio2", abs(r2 - 1) <= tol, r2, tol, f"at eps^2 t = {p['check_s']:g}")

    # time-stepped rank-one equation against the closed form
    grid = cfg.grid
    prob = ex.shear_problem(grid, eps)
    prob.lam = p["lam"]
    prob.validate()
    t_end = cfg.integrator.t_end
    g_num = ex.integrate_rank1(grid, prob.g0, prob.v, t_end, cfl=cfg.integrator.cfl)
    g_cf = ex.shear_closed_form(grid, prob.V, prob.g0, prob.lam, t_end)
    err = float(np.max(np.abs(sp.to_physical(grid, g_num - g_cf))))
    outcome.check("closed_form_agreement", err <= 1e-6, err, 1e-6, f"max error at t = {t_end:g}")
    outcome.summary["slope"] = slope
    return outcome


def run_hyperbolic(cfg, out):
    outcome = Outcome()
    p = cfg.params
    grid = cfg.grid
    g0 = hyperbolic_datum(grid, p["g0"], p["seed"])
    rep = ex.hyperbolic_experiment(grid, g0, cfg.integrator.t_end, samples=p["samples"], cfl=cfg.integrator.cfl)
    path = out / "hyperbolic.csv"
    _write_csv(path, ex.HYPERBOLIC_CSV, rep.rows())
    outcome.files.append(path)
    if np.all(np.isfinite(rep.ratio_exp)):
        dev = float(np.max(np.abs(rep.ratio_exp - 1)))
        outcome.check("ratio_exp", dev <= 0.01, dev, 0.01, "max |d1g(0,0,t) / (e^t d1g0(0,0)) - 1|")
        outcome.check("rate", abs(rep.rate - 1) <= 0.02, rep.rate, 0.02, "|rate - 1|")
        outcome.check("gradient_lower_bound", rep.lower_bound_ok)
    rise = float(np.max(np.diff(rep.l2_energy))) if len(rep.l2_energy) > 1 else 0.0
    outcome.check("energy_nonincreasing", rise <= 1e-12 * rep.l2_energy[0], rise, 1e-12 * rep.l2_energy[0])
    outcome.summary.update(
        rate=rep.rate,
        certified_until=rep.certified_until,
        upper_constant_fit=rep.upper_constant,
        resolution_warnings=len(rep.warnings),
    )
    return outcome


def run_current_sheet(cfg, out):
    outcome = Outcome()
    V, g0 = ex.sheet_example_data()
    rep = ex.current_sheet_report(V, g0, n_x1=cfg.params["n_x1"])
    path = out / "sheets.csv"
    _write_csv(path, ex.SHEET_CSV, rep.rows())
    outcome.files.append(path)
    planes = rep.planes
    expect = [-math.pi / 2, math.pi / 2]
    plane_err = max(abs(a - b) for a, b in zip(planes, expect)) if len(planes) == 2 else math.inf
    outcome.check("sheet_planes", plane_err <= 1e-12, plane_err if math.isfinite(plane_err) else None, 1e-12)
    jump_err = math.inf
    if len(planes) == 2:
        jump_err = max(float(np.max(np.abs(np.abs(s.jump[2]) - np.abs(np.sin(s.x1))))) for s in rep.sheets)
    outcome.check("jump_amplitude", jump_err <= 1e-6, jump_err if math.isfinite(jump_err) else None, 1e-6)
    outcome.summary["planes"] = planes
    return outcome


REGISTRY = {
    "free-run": run_free,
    "energy-audit": run_energy_audit,
    "stability2d-linear": run_stability_linear,
    "stability2d-nonlinear": run_stability_nonlinear,
    "shear-growth": run_shear_growth,
    "hyperbolic-growth": run_hyperbolic,
    "current-sheet": run_current_sheet,
}


def exit_status(outcome):
    if outcome.blowup is not None:
        return EXIT_BLOWUP
    return EXIT_OK if outcome.ok else EXIT_BOUND


def run_experiment(cfg: ExperimentConfig, runner=None, extra=None):
    """Execute ``cfg`` and write outputs plus ``manifest.json`` into ``cfg.out_dir``."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runner = runner or REGISTRY[cfg.experiment]
    started = time.time()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", dy.ResolutionWarning)
        outcome = runner(cfg, out)
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    wall = time.time() - started
    status = exit_status(outcome)
    data = {
        "experiment": cfg.experiment,
        "version": __version__,
        "config": cfg.to_dict(),
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
        "wall_clock_s": wall,
        "files": {p.name: {"sha256": _sha256(p), "bytes": p.stat().st_size} for p in outcome.files},
        "checks": {c.name: c.to_dict() for c in outcome.checks},
        "summary": outcome.summary,
        "warnings": [str(w.message) for w in caught if issubclass(w.category, dy.ResolutionWarning)],
        "blowup": outcome.blowup,
        "ok": status == EXIT_OK,
        "exit_status": status,
    }
    if extra:
        data.update(extra)
    path = out / MANIFEST_NAME
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return RunManifest(data, path)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def resume(checkpoint, cfg, t_end=None, out_dir=None):
    """Continue a free-run or energy-audit from ``checkpoint`` to ``t_end``."""
    state = dy.read_checkpoint(checkpoint)
    if (state.grid.dim, state.grid.n) != (cfg.dim, cfg.grid.n):
        raise CheckpointFormatError(f"{checkpoint}: grid {state.grid.n} does not match config grid {cfg.grid.n}")
    if state.gamma != cfg.gamma:
        raise CheckpointFormatError(f"{checkpoint}: gamma {state.gamma} does not match config gamma {cfg.gamma}")
    target = cfg.integrator.t_end if t_end is None else float(t_end)
    if target < state.t:
        raise ValueError(f"t_end {target} is before the checkpoint time {state.t}")
    out = Path(out_dir) if out_dir is not None else Path(checkpoint).resolve().parent / "resumed"
    run_cfg = cfg.with_overrides(out_dir=out, t_end=target)

    def runner(c, o):
        outcome = Outcome()
        final, records = _dynamics_run(c, o, outcome, state)
        _common_checks(c, outcome, state, final, records)
        return outcome

    return run_experiment(run_cfg, runner, extra={"resumed_from": {"path": str(checkpoint), "t": state.t}})
