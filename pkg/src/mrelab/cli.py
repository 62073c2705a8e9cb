"""Command-line front end: ``mrelab run | resume | validate``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from mrelab import __version__
from mrelab.config import from_dict, load_config, serialize
from mrelab.errors import CheckpointFormatError, ConfigError
from mrelab.experiments import EXIT_INPUT, MANIFEST_NAME, resume, run_experiment


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in an unsigned 64-bit integer, got {text}")
    return value


def build_parser():
    ap = argparse.ArgumentParser(prog="mrelab", description="Magnetic relaxation experiments")
    ap.add_argument("--version", action="version", version=f"mrelab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config", type=Path)
    run.add_argument("--out", type=Path, help="output directory (overrides out_dir)")
    run.add_argument("--seed", type=_u64, help="seed for random initial data (overrides params.seed)")

    res = sub.add_parser("resume", help="continue a free-run or energy-audit from a checkpoint")
    res.add_argument("checkpoint", type=Path)
    res.add_argument("--t-end", type=float, help="new final time")
    res.add_argument("--config", type=Path, help="config file; defaults to the manifest beside the checkpoint")
    res.add_argument("--out", type=Path, help="output directory (default: <checkpoint dir>/resumed)")

    val = sub.add_parser("validate", help="check a config file and print the normalized form")
    val.add_argument("config", type=Path)
    return ap


def _config_for_checkpoint(args):
    if args.config is not None:
        return load_config(args.config)
    manifest = args.checkpoint.resolve().parent / MANIFEST_NAME
    if not manifest.exists():
        raise ConfigError("missing-key", f"no --config given and no {MANIFEST_NAME} beside {args.checkpoint}")
    data = json.loads(manifest.read_text())
    return from_dict(data["config"])


def _report(manifest):
    data = manifest.data
    for name, chk in data["checks"].items():
        status = "ok" if chk["ok"] else "FAIL"
        value = f" value={chk['value']:.6g}" if "value" in chk else ""
        print(f"  {status:4s} {name}{value}")
    if data.get("blowup"):
        print(f"  blow-up: {data['blowup']}")
    print(f"{data['experiment']}: {'ok' if data['ok'] else 'FAILED'} -> {manifest.path}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            sys.stdout.write(serialize(cfg))
            return 0
        if args.command == "run":
            cfg = load_config(args.config).with_overrides(out_dir=args.out, seed=args.seed)
            manifest = run_experiment(cfg)
        else:
            cfg = _config_for_checkpoint(args)
            if cfg.experiment not in ("free-run", "energy-audit"):
                raise ConfigError("invalid-value", f"cannot resume a {cfg.experiment} run", field="experiment")
            manifest = resume(args.checkpoint, cfg, t_end=args.t_end, out_dir=args.out)
    except ConfigError as exc:
        print(f"mrelab: config error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CheckpointFormatError, OSError, ValueError) as exc:
        print(f"mrelab: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _report(manifest)
    return manifest.exit_status


if __name__ == "__main__":
    sys.exit(main())
