import pytest
from hypothesis import given, settings, strategies as st

from mrelab import config
from mrelab.errors import ConfigError

MINIMAL = """
experiment = "free-run"

[grid]
dim = 2
n = 32

[integrator]
t_end = 0.5

[params]
seed = 1
"""


def test_minimal_config_defaults():
    cfg = config.parse_config(MINIMAL)
    assert cfg.integrator.cfl == 0.4
    assert cfg.integrator.dt == "auto"
    assert cfg.sample_every == 10
    assert cfg.gamma == 0.0
    assert cfg.params["norm"] == 1.0 and cfg.seed == 1


def test_negative_gamma():
    with pytest.raises(ConfigError, match="gamma must be ≥ 0") as info:
        config.parse_config('gamma = -1.0\n' + MINIMAL)
    assert info.value.code == "invalid-value"
    assert info.value.field == "gamma" and info.value.line == 1


def test_distinct_error_codes():
    codes = set()
    for text in (
        MINIMAL.replace('"free-run"', '"warp-drive"'),
        MINIMAL.replace("seed = 1", ""),
        MINIMAL.replace("n = 32", "n = 31"),
        MINIMAL + "\ncolour = 3\n",
        "experiment = \n",
    ):
        with pytest.raises(ConfigError) as info:
            config.parse_config(text)
        codes.add(info.value.code)
    assert codes == {"unknown-experiment", "missing-key", "invalid-value", "unknown-key", "syntax"}


def test_error_reports_line():
    with pytest.raises(ConfigError) as info:
        config.parse_config(MINIMAL.replace("t_end = 0.5", "t_end = -0.5"))
    assert info.value.line == 9
    with pytest.raises(ConfigError) as info:
        config.parse_config("experiment = \n")
    assert info.value.line == 1


def test_missing_grid_for_dynamics():
    with pytest.raises(ConfigError) as info:
        config.parse_config('experiment = "energy-audit"\n[params]\nseed = 1\n')
    assert info.value.code == "missing-key"


def test_experiment_defaults():
    cfg = config.parse_config('experiment = "stability2d-nonlinear"\n')
    assert cfg.n == 128 and cfg.integrator.t_end == 5.0
    assert cfg.params == {"eps": 0.01, "delta": 0.5, "k": 4, "m": 13}
    with pytest.raises(ConfigError):
        config.parse_config('experiment = "shear-growth"\n[grid]\ndim = 3\n[params]\neps = 0.1\nt_samples = [1.0]\n')


def test_seed_override():
    cfg = config.parse_config(MINIMAL).with_overrides(seed=2**63 + 5, out_dir="x")
    assert cfg.seed == 2**63 + 5 and cfg.out_dir == "x"
    with pytest.raises(ConfigError):
        config.parse_config('experiment = "current-sheet"\n').with_overrides(seed=3)


def _configs():
    dyn = st.fixed_dictionaries(
        {
            "experiment": st.sampled_from(["free-run", "energy-audit"]),
            "gamma": st.floats(0, 5, allow_nan=False),
            "out_dir": st.text("abc/_-", min_size=1, max_size=12),
            "grid": st.fixed_dictionaries({"dim": st.sampled_from([2, 3]), "n": st.sampled_from([8, 16, 32])}),
            "integrator": st.fixed_dictionaries(
                {
                    "dt": st.one_of(st.just("auto"), st.floats(1e-4, 1.0)),
                    "t_end": st.floats(0, 10),
                    "cfl": st.floats(0.05, 1.0),
                    "reproject_every": st.integers(1, 5),
                    "sample_every": st.integers(1, 50),
                }
            ),
            "params": st.fixed_dictionaries(
                {"seed": st.integers(0, 2**63), "norm": st.floats(0, 10), "hs": st.lists(st.floats(0, 4), max_size=3)}
            ),
        }
    )
    growth = st.fixed_dictionaries(
        {
            "experiment": st.just("shear-growth"),
            "params": st.fixed_dictionaries(
                {"eps": st.floats(0.01, 0.9), "t_samples": st.lists(st.floats(0, 1e5), min_size=1, max_size=5)}
            ),
        }
    )
    return st.one_of(dyn, growth)


@settings(max_examples=60, deadline=None)
@given(data=_configs())
def test_round_trip(data):
    cfg = config.from_dict(data)
    text = config.serialize(cfg)
    again = config.parse_config(text)
    assert again == cfg
    assert config.serialize(again) == text
