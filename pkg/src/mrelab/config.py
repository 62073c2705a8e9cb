"""
Experiment configuration files.

The grammar is TOML restricted to the keys below. Strings are quoted,
numbers are decimal, lists use brackets::

    experiment = "energy-audit"
    gamma = 0.0
    out_dir = "runs/audit"

    [grid]
    dim = 2
    n = 64

    [integrator]
    dt = "auto"
    t_end = 1.0
    cfl = 0.4
    reproject_every = 1
    sample_every = 10

    [params]
    seed = 7
    norm = 0.1
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field

import tomli
import tomli_w

from mrelab.dynamics import IntegratorConfig
from mrelab.errors import ConfigError
from mrelab.spectral import Grid

EXPERIMENTS = (
    "free-run",
    "energy-audit",
    "stability2d-linear",
    "stability2d-nonlinear",
    "shear-growth",
    "hyperbolic-growth",
    "current-sheet",
)

# experiments whose dynamics need an explicit grid in the file
NEEDS_GRID = {"free-run", "energy-audit"}
TWO_D_ONLY = {"stability2d-linear", "stability2d-nonlinear", "shear-growth", "hyperbolic-growth"}

DEFAULT_N = {
    "stability2d-linear": 64,
    "stability2d-nonlinear": 128,
    "shear-growth": 64,
    "hyperbolic-growth": 128,
    "current-sheet": 64,
}
DEFAULT_T_END = {
    "stability2d-linear": 3.0,
    "stability2d-nonlinear": 5.0,
    "shear-growth": 1.0,
    "hyperbolic-growth": 2.0,
    "current-sheet": 0.0,
}

# experiment -> {param: (type, default)}; default None means required
PARAMS = {
    "free-run": {
        "seed": (int, None),
        "init": (str, "random"),
        "norm": (float, 1.0),
        "kmax": (float, 0.0),
        "background": (list, []),
        "hs": (list, [1.0, 2.0]),
        "checkpoint_every": (int, 0),
    },
    "energy-audit": {
        "seed": (int, None),
        "init": (str, "random"),
        "norm": (float, 0.1),
        "kmax": (float, 0.0),
        "background": (list, []),
        "hs": (list, [1.0, 2.0]),
        "checkpoint_every": (int, 0),
    },
    "stability2d-linear": {
        "seed": (int, 0),
        "k": (int, 4),
        "delta": (float, 0.5),
        "a_amp": (float, 0.01),
        "f_band": (float, 6.0),
    },
    "stability2d-nonlinear": {
        "eps": (float, 1e-2),
        "delta": (float, 0.5),
        "k": (int, 4),
        "m": (int, 13),
    },
    "shear-growth": {
        "eps": (float, None),
        "t_samples": (list, None),
        "lam": (float, 1.0),
        "slope_range": (list, [10.0, 100.0]),
        "check_s": (float, 100.0),
        "ratio_tol": (float, 0.05),
    },
    "hyperbolic-growth": {
        "g0": (str, "sin"),
        "seed": (int, 0),
        "samples": (int, 41),
    },
    "current-sheet": {
        "n_x1": (int, 64),
    },
}

INIT_KINDS = ("random", "abc")
G0_KINDS = ("sin", "cos", "random")

TOP_KEYS = {"experiment", "gamma", "out_dir", "grid", "integrator", "params"}
GRID_KEYS = {"dim", "n"}
INTEGRATOR_KEYS = {"dt", "t_end", "cfl", "reproject_every", "sample_every"}


@dataclass
class ExperimentConfig:
    experiment: str
    dim: int = 2
    n: int | tuple = 64
    gamma: float = 0.0
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    sample_every: int = 10
    params: dict = field(default_factory=dict)
    out_dir: str = "out"

    @property
    def grid(self):
        return Grid(self.dim, self.n)

    @property
    def seed(self):
        return self.params.get("seed")

    def with_overrides(self, out_dir=None, seed=None, t_end=None):
        params = dict(self.params)
        if seed is not None:
            if "seed" not in PARAMS[self.experiment]:
                raise ConfigError("invalid-value", f"experiment {self.experiment} takes no seed", field="params.seed")
            params["seed"] = int(seed)
        integ = self.integrator
        if t_end is not None:
            integ = IntegratorConfig(integ.dt, float(t_end), integ.cfl, integ.reproject_every)
        return ExperimentConfig(
            self.experiment,
            self.dim,
            self.n,
            self.gamma,
            integ,
            self.sample_every,
            params,
            self.out_dir if out_dir is None else str(out_dir),
        )

    def to_dict(self):
        integ = asdict(self.integrator)
        integ["sample_every"] = self.sample_every
        return {
            "experiment": self.experiment,
            "gamma": self.gamma,
            "out_dir": self.out_dir,
            "grid": {"dim": self.dim, "n": list(self.n) if isinstance(self.n, tuple) else self.n},
            "integrator": integ,
            "params": dict(self.params),
        }


def _line_of(text, key, section=None):
    """Best-effort 1-based line number of ``key`` (inside ``section`` if given)."""
    current = None
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_-]+)\s*\]", stripped)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*=", stripped):
            return i
    return None


def _invalid(msg, fld, text, section=None, key=None):
    return ConfigError("invalid-value", msg, field=fld, line=_line_of(text, key, section) if text else None)


def _number(value, fld, text, section, key, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _invalid(f"{fld} must be a number, got {value!r}", fld, text, section, key)
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise _invalid(f"{fld} must be an integer, got {value!r}", fld, text, section, key)
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise _invalid(f"{fld} must be finite", fld, text, section, key)
    return value


def from_dict(data, text=""):
    """Validate a parsed mapping into an :class:`ExperimentConfig`."""
    for key in data:
        if key not in TOP_KEYS:
            raise ConfigError("unknown-key", f"unknown top-level key {key!r}", field=key, line=_line_of(text, key))
    if "experiment" not in data:
        raise ConfigError("missing-key", "missing required key 'experiment'", field="experiment")
    exp = data["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError(
            "unknown-experiment",
            f"unknown experiment {exp!r}; expected one of {', '.join(EXPERIMENTS)}",
            field="experiment",
            line=_line_of(text, "experiment"),
        )

    gamma = _number(data.get("gamma", 0.0), "gamma", text, None, "gamma")
    if gamma < 0:
        raise _invalid("gamma must be ≥ 0", "gamma", text, None, "gamma")
    if exp in TWO_D_ONLY and gamma != 0:
        raise _invalid(f"{exp} is defined at gamma = 0", "gamma", text, None, "gamma")
    out_dir = data.get("out_dir", f"runs/{exp}")
    if not isinstance(out_dir, str) or not out_dir:
        raise _invalid("out_dir must be a non-empty string", "out_dir", text, None, "out_dir")

    grid_tbl = data.get("grid")
    if grid_tbl is None:
        if exp in NEEDS_GRID:
            raise ConfigError("missing-key", f"{exp} needs a [grid] section", field="grid")
        grid_tbl = {}
    if not isinstance(grid_tbl, dict):
        raise _invalid("grid must be a table", "grid", text, None, "grid")
    for key in grid_tbl:
        if key not in GRID_KEYS:
            raise ConfigError("unknown-key", f"unknown key grid.{key}", field=f"grid.{key}", line=_line_of(text, key, "grid"))
    if exp in NEEDS_GRID:
        for key in ("dim", "n"):
            if key not in grid_tbl:
                raise ConfigError("missing-key", f"missing required key grid.{key}", field=f"grid.{key}", line=_line_of(text, None, "grid"))
    dim = _number(grid_tbl.get("dim", 2), "grid.dim", text, "grid", "dim", int)
    if exp in TWO_D_ONLY and dim != 2:
        raise _invalid(f"{exp} is two-dimensional", "grid.dim", text, "grid", "dim")
    n_raw = grid_tbl.get("n", DEFAULT_N.get(exp, 64))
    if isinstance(n_raw, list):
        n = tuple(_number(v, "grid.n", text, "grid", "n", int) for v in n_raw)
    else:
        n = _number(n_raw, "grid.n", text, "grid", "n", int)
    try:
        Grid(dim, n)
    except ValueError as exc:
        raise _invalid(str(exc), "grid", text, "grid", "n") from None

    integ_tbl = data.get("integrator", {})
    if not isinstance(integ_tbl, dict):
        raise _invalid("integrator must be a table", "integrator", text, None, "integrator")
    for key in integ_tbl:
        if key not in INTEGRATOR_KEYS:
            raise ConfigError(
                "unknown-key", f"unknown key integrator.{key}", field=f"integrator.{key}", line=_line_of(text, key, "integrator")
            )
    if exp in NEEDS_GRID and "t_end" not in integ_tbl:
        raise ConfigError(
            "missing-key", "missing required key integrator.t_end", field="integrator.t_end", line=_line_of(text, None, "integrator")
        )
    dt = integ_tbl.get("dt", "auto")
    if not isinstance(dt, str):
        dt = _number(dt, "integrator.dt", text, "integrator", "dt")
    kwargs = {
        "dt": dt,
        "t_end": _number(integ_tbl.get("t_end", DEFAULT_T_END.get(exp, 1.0)), "integrator.t_end", text, "integrator", "t_end"),
        "cfl": _number(integ_tbl.get("cfl", 0.4), "integrator.cfl", text, "integrator", "cfl"),
        "reproject_every": _number(
            integ_tbl.get("reproject_every", 1), "integrator.reproject_every", text, "integrator", "reproject_every", int
        ),
    }
    try:
        integ = IntegratorConfig(**kwargs)
    except ValueError as exc:
        key = str(exc).split()[0]
        raise _invalid(str(exc), f"integrator.{key}", text, "integrator", key) from None
    sample_every = _number(integ_tbl.get("sample_every", 10), "integrator.sample_every", text, "integrator", "sample_every", int)
    if sample_every < 1:
        raise _invalid("sample_every must be >= 1", "integrator.sample_every", text, "integrator", "sample_every")

    params = _params(exp, data.get("params", {}), text)
    if exp in NEEDS_GRID and params["init"] == "abc" and dim != 3:
        raise _invalid("the abc datum needs dim = 3", "params.init", text, "params", "init")
    if exp in NEEDS_GRID and params["background"] and len(params["background"]) != dim:
        raise _invalid(f"background must have {dim} entries", "params.background", text, "params", "background")
    return ExperimentConfig(exp, dim, n, gamma, integ, sample_every, params, out_dir)


def _params(exp, tbl, text):
    if not isinstance(tbl, dict):
        raise _invalid("params must be a table", "params", text, None, "params")
    table = PARAMS[exp]
    for key in tbl:
        if key not in table:
            raise ConfigError(
                "unknown-key", f"{exp} does not take params.{key}", field=f"params.{key}", line=_line_of(text, key, "params")
            )
    out = {}
    for key, (kind, default) in table.items():
        fld = f"params.{key}"
        if key not in tbl:
            if default is None:
                raise ConfigError("missing-key", f"{exp} needs {fld}", field=fld, line=_line_of(text, None, "params"))
            out[key] = list(default) if isinstance(default, list) else default
            continue
        value = tbl[key]
        if kind is str:
            if not isinstance(value, str):
                raise _invalid(f"{fld} must be a string", fld, text, "params", key)
        elif kind is list:
            if not isinstance(value, list):
                raise _invalid(f"{fld} must be a list of numbers", fld, text, "params", key)
            value = [_number(v, fld, text, "params", key) for v in value]
        else:
            value = _number(value, fld, text, "params", key, kind)
        out[key] = value
    _check_params(exp, out, text)
    return out


def _check_params(exp, p, text):
    def bad(key, msg):
        return _invalid(msg, f"params.{key}", text, "params", key)

    if "seed" in p and p["seed"] < 0:
        raise bad("seed", "seed must be a non-negative integer")
    if "init" in p and p["init"] not in INIT_KINDS:
        raise bad("init", f"init must be one of {', '.join(INIT_KINDS)}")
    if "norm" in p and p["norm"] < 0:
        raise bad("norm", "norm must be >= 0")
    if "kmax" in p and p["kmax"] < 0:
        raise bad("kmax", "kmax must be >= 0 (0 selects n/8)")
    if "checkpoint_every" in p and p["checkpoint_every"] < 0:
        raise bad("checkpoint_every", "checkpoint_every must be >= 0")
    if "hs" in p and any(s < 0 for s in p["hs"]):
        raise bad("hs", "Sobolev indices must be >= 0")
    if "eps" in p and not 0 < p["eps"] < 1:
        raise bad("eps", "eps must lie in (0, 1)")
    if "delta" in p and not 0 < p["delta"] < 1:
        raise bad("delta", "delta must lie in (0, 1)")
    if "k" in p and p["k"] < 1:
        raise bad("k", "k must be >= 1")
    if "m" in p and p["m"] < p.get("k", 0) + 2:
        raise bad("m", "m must be at least k + 2")
    if "t_samples" in p and (not p["t_samples"] or any(t < 0 for t in p["t_samples"])):
        raise bad("t_samples", "t_samples must be a non-empty list of times >= 0")
    if "lam" in p and p["lam"] <= 0:
        raise bad("lam", "lam must be > 0")
    if "slope_range" in p:
        sr = p["slope_range"]
        if len(sr) != 2 or not 0 < sr[0] < sr[1]:
            raise bad("slope_range", "slope_range must be [lo, hi] with 0 < lo < hi")
    if "g0" in p and p["g0"] not in G0_KINDS:
        raise bad("g0", f"g0 must be one of {', '.join(G0_KINDS)}")
    if "samples" in p and p["samples"] < 5:
        raise bad("samples", "samples must be >= 5")
    if "n_x1" in p and p["n_x1"] < 2:
        raise bad("n_x1", "n_x1 must be >= 2")
    if "f_band" in p and p["f_band"] < 1:
        raise bad("f_band", "f_band must be >= 1")


def parse_config(text):
    """Parse and validate configuration text."""
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError("syntax", str(exc), line=int(m.group(1)) if m else None) from None
    return from_dict(data, text)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def serialize(cfg):
    return tomli_w.dumps(cfg.to_dict())
