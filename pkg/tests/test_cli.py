import hashlib
import json

import numpy as np
import pytest

from mrelab import __version__, dynamics as dy
from mrelab.cli import main
from mrelab.config import load_config

FREE = """
experiment = "free-run"
gamma = 1.0

[grid]
dim = 2
n = 16

[integrator]
dt = 0.01
t_end = {t_end}
sample_every = 5

[params]
seed = 4
"""


@pytest.fixture
def free_config(tmp_path):
    def make(t_end, name="free.toml"):
        path = tmp_path / name
        path.write_text(FREE.format(t_end=t_end))
        return path

    return make


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_validate_prints_normalized_config(tmp_path, free_config, capsys):
    assert main(["validate", str(free_config(1.0))]) == 0
    text = capsys.readouterr().out
    path = tmp_path / "again.toml"
    path.write_text(text)
    assert load_config(path) == load_config(free_config(1.0))


def test_bad_config_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text('experiment = "free-run"\ngamma = -1.0\n[grid]\nn = 16\n[integrator]\nt_end = 1.0\n[params]\nseed = 1\n')
    assert main(["run", str(path)]) == 2
    err = capsys.readouterr().err
    assert "gamma must be ≥ 0" in err and "line 2" in err


def test_missing_file_exits_2(tmp_path):
    assert main(["run", str(tmp_path / "nope.toml")]) == 2


def test_run_writes_manifest_with_checksums(tmp_path, free_config):
    out = tmp_path / "out"
    assert main(["run", str(free_config(0.1)), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["exit_status"] == 0 and manifest["ok"]
    assert set(manifest["files"]) == {"diagnostics.csv", "checkpoint.mre"}
    for name, info in manifest["files"].items():
        raw = (out / name).read_bytes()
        assert info["sha256"] == hashlib.sha256(raw).hexdigest() and info["bytes"] == len(raw)
    assert manifest["config"]["params"]["seed"] == 4


def test_same_seed_gives_identical_csv(tmp_path, free_config):
    cfg = str(free_config(0.1))
    for name in ("a", "b", "c"):
        seed = "9" if name != "c" else "10"
        assert main(["run", cfg, "--out", str(tmp_path / name), "--seed", seed]) == 0
    a, b, c = ((tmp_path / n / "diagnostics.csv").read_bytes() for n in "abc")
    assert a == b and a != c


def test_seed_must_be_u64(free_config):
    with pytest.raises(SystemExit) as info:
        main(["run", str(free_config(0.1)), "--seed", "-1"])
    assert info.value.code == 2


def test_resume_split_matches_straight_run(tmp_path, free_config):
    straight, half = tmp_path / "straight", tmp_path / "half"
    assert main(["run", str(free_config(1.0)), "--out", str(straight)]) == 0
    assert main(["run", str(free_config(0.5, "half.toml")), "--out", str(half)]) == 0
    assert main(["resume", str(half / "checkpoint.mre"), "--t-end", "1.0"]) == 0
    rest = dy.read_checkpoint(half / "resumed" / "checkpoint.mre")
    full = dy.read_checkpoint(straight / "checkpoint.mre")
    assert abs(rest.t - 1.0) < 1e-12
    assert np.max(np.abs(rest.B - full.B)) <= 1e-12


def test_resume_to_same_time_is_identity(tmp_path, free_config):
    out = tmp_path / "run"
    assert main(["run", str(free_config(0.2)), "--out", str(out)]) == 0
    before = dy.read_checkpoint(out / "checkpoint.mre")
    cfg = free_config(0.2)
    assert main(["resume", str(out / "checkpoint.mre"), "--config", str(cfg), "--out", str(tmp_path / "r")]) == 0
    after = dy.read_checkpoint(tmp_path / "r" / "checkpoint.mre")
    assert after.t == before.t and np.array_equal(after.B, before.B)


def test_resume_rejects_bad_magic(tmp_path, free_config):
    out = tmp_path / "run"
    assert main(["run", str(free_config(0.1)), "--out", str(out)]) == 0
    ckpt = out / "checkpoint.mre"
    ckpt.write_bytes(b"NOPE" + ckpt.read_bytes()[4:])
    assert main(["resume", str(ckpt)]) == 2


def test_resume_rejects_grid_mismatch(tmp_path, free_config):
    out = tmp_path / "run"
    assert main(["run", str(free_config(0.1)), "--out", str(out)]) == 0
    other = tmp_path / "other.toml"
    other.write_text(FREE.format(t_end=0.2).replace("n = 16", "n = 32"))
    assert main(["resume", str(out / "checkpoint.mre"), "--config", str(other)]) == 2


def test_current_sheet_run(tmp_path, capsys):
    cfg = tmp_path / "sheet.toml"
    cfg.write_text('experiment = "current-sheet"\n')
    assert main(["run", str(cfg), "--out", str(tmp_path / "s")]) == 0
    assert "current-sheet: ok" in capsys.readouterr().out
    header = (tmp_path / "s" / "sheets.csv").read_text().splitlines()[0]
    assert header == "x2_plane,x1,jump_b3,current_1,current_2,current_3"


def test_bound_failure_exits_1(tmp_path):
    cfg = tmp_path / "growth.toml"
    cfg.write_text('experiment = "shear-growth"\n[grid]\nn = 32\n[params]\neps = 0.1\nt_samples = [100.0]\n')
    assert main(["run", str(cfg), "--out", str(tmp_path / "g")]) == 1
    manifest = json.loads((tmp_path / "g" / "manifest.json").read_text())
    assert not manifest["checks"]["ratio2"]["ok"] and manifest["checks"]["ratio1"]["ok"]
