import struct
import warnings

import numpy as np
import pytest

from mrelab import dynamics as dy, spectral as sp
from mrelab.errors import BlowUpError, CheckpointFormatError
from mrelab.initial import abc_field, constant_field, random_solenoidal


def _mul(grid, x, y):
    return sp.dealias(grid, sp.to_spectral(grid, sp.to_physical(grid, x) * sp.to_physical(grid, y)))


def transport_form(grid, B, u):
    """B.grad u - u.grad B with dealiased products, component by component."""
    out = []
    for i in range(grid.dim):
        term = sum(_mul(grid, B[j], sp.derivative(grid, u[i], j)) for j in range(grid.dim))
        term -= sum(_mul(grid, u[j], sp.derivative(grid, B[i], j)) for j in range(grid.dim))
        out.append(term)
    return np.stack(out)


def test_constant_field_is_steady():
    g = sp.Grid(2, 16)
    B = constant_field(g, (1.0, 0.5))
    assert np.allclose(dy.constitutive_velocity(g, B, 0.0), 0)
    assert np.allclose(dy.mre_rhs(g, B, 0.0), 0)


def test_shear_field_is_steady():
    g = sp.Grid(2, 32)
    x1, x2 = g.coords()
    B = sp.to_spectral(g, np.stack([np.sin(x2), np.zeros_like(x2)]))
    assert np.max(np.abs(dy.constitutive_velocity(g, B, 1.0))) < 1e-15


def test_abc_field_is_steady():
    g = sp.Grid(3, 16)
    B = abc_field(g)
    assert np.max(np.abs(dy.constitutive_velocity(g, B, 3.0))) < 1e-13


def test_gradient_force_gives_no_velocity():
    # B = (cos x2, cos x1) has B.grad B = -grad(sin x1 sin x2), which P removes
    g = sp.Grid(2, 32)
    x1, x2 = g.coords()
    B = sp.to_spectral(g, np.stack([np.cos(x2), np.cos(x1)]))
    u = dy.constitutive_velocity(g, B, 0.0)
    assert np.max(np.abs(u)) < 1e-15


@pytest.mark.parametrize("dim", [2, 3])
def test_induction_matches_transport_form(dim):
    g = sp.Grid(dim, 16)
    B = random_solenoidal(g, 1, kmax=2) + constant_field(g, [1.0] + [0.0] * (dim - 1))
    u = dy.constitutive_velocity(g, B, 0.5)
    curl_form = dy.induction_rhs(g, B, u)
    assert np.max(np.abs(curl_form - transport_form(g, B, u))) < 1e-13
    assert sp.divergence_residual(g, curl_form) < 1e-14


def test_rhs_preserves_mean():
    g = sp.Grid(3, 8)
    B = random_solenoidal(g, 2, kmax=2) + constant_field(g, (0.3, -0.2, 1.0))
    dB = dy.mre_rhs(g, B, 0.0)
    assert np.allclose(dB[:, 0, 0, 0], 0)


def test_integrator_config_validation():
    with pytest.raises(ValueError):
        dy.IntegratorConfig(dt=-1.0)
    with pytest.raises(ValueError):
        dy.IntegratorConfig(dt="fast")
    with pytest.raises(ValueError):
        dy.IntegratorConfig(cfl=0.0)
    with pytest.raises(ValueError):
        dy.IntegratorConfig(reproject_every=0)
    with pytest.raises(ValueError):
        dy.MREState(sp.Grid(2, 8), sp.Grid(2, 8).zeros(vector=True), gamma=-1.0)


def test_auto_dt_rules():
    g = sp.Grid(2, 64)
    h = g.spacing
    assert np.isclose(dy.auto_dt(g, 1.0, 0.4, 0.5, 9.0), 0.4 * h)
    assert np.isclose(dy.auto_dt(g, 1.0, 0.4, 2.0, 9.0), 0.2 * h)
    assert np.isclose(dy.auto_dt(g, 0.0, 0.4, 0.5, 4.0), 0.4 * h * h / 8.0)


def test_rk4_step_order():
    # dy/dt = y: one step error is O(dt^5)
    errs = [abs(dy.rk4_step(lambda y: y, 1.0, dt) - np.exp(dt)) for dt in (0.1, 0.05)]
    assert 25 < errs[0] / errs[1] < 40


def test_run_energy_decays_and_stays_solenoidal():
    g = sp.Grid(2, 32)
    state = dy.MREState(g, random_solenoidal(g, 3, norm=2.0), gamma=1.0)
    final, records = dy.run(state, dy.IntegratorConfig(t_end=0.5), sample_every=5)
    e = [r.energy for r in records]
    assert all(b <= a + 1e-12 for a, b in zip(e, e[1:]))
    assert records[0].t == 0 and np.isclose(records[-1].t, 0.5)
    assert sp.divergence_residual(g, final.B) < 1e-12


def test_fixed_dt_hits_t_end_exactly():
    g = sp.Grid(2, 16)
    state = dy.MREState(g, random_solenoidal(g, 4), gamma=0.0)
    final, _ = dy.run(state, dy.IntegratorConfig(dt=0.03, t_end=0.1))
    assert np.isclose(final.t, 0.1, rtol=0, atol=1e-15)
    assert final.steps == 4


def test_split_run_matches_straight_run():
    g = sp.Grid(2, 32)
    B0 = random_solenoidal(g, 5, norm=3.0)
    straight, _ = dy.run(dy.MREState(g, B0, gamma=1.0), dy.IntegratorConfig(dt=0.01, t_end=1.0))
    half, _ = dy.run(dy.MREState(g, B0, gamma=1.0), dy.IntegratorConfig(dt=0.01, t_end=0.5))
    rest, _ = dy.run(half, dy.IntegratorConfig(dt=0.01, t_end=1.0))
    assert np.max(np.abs(rest.B - straight.B)) <= 1e-12


def test_checkpoint_round_trip(tmp_path):
    g = sp.Grid(3, (8, 16, 8))
    state = dy.MREState(g, random_solenoidal(g, 6), t=0.25, gamma=3.0)
    path = tmp_path / "c.mre"
    dy.write_checkpoint(path, state)
    raw = path.read_bytes()
    assert raw[:4] == b"MRE1"
    assert struct.unpack_from("<I3Idd", raw, 4) == (3, 8, 16, 8, 3.0, 0.25)
    back = dy.read_checkpoint(path)
    assert back.grid == g and back.t == 0.25 and back.gamma == 3.0
    assert np.array_equal(back.B, state.B)
    dy.write_checkpoint(tmp_path / "d.mre", back)
    assert (tmp_path / "d.mre").read_bytes() == raw


def test_checkpoint_errors(tmp_path):
    g = sp.Grid(2, 8)
    path = tmp_path / "c.mre"
    dy.write_checkpoint(path, dy.MREState(g, g.zeros(vector=True)))
    raw = path.read_bytes()
    (tmp_path / "magic.mre").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(CheckpointFormatError):
        dy.read_checkpoint(tmp_path / "magic.mre")
    (tmp_path / "short.mre").write_bytes(raw[:-16])
    with pytest.raises(CheckpointFormatError):
        dy.read_checkpoint(tmp_path / "short.mre")
    (tmp_path / "header.mre").write_bytes(raw[:10])
    with pytest.raises(CheckpointFormatError):
        dy.read_checkpoint(tmp_path / "header.mre")


def test_blowup_is_reported_with_last_state():
    g = sp.Grid(2, 16)
    B0 = random_solenoidal(g, 7, norm=50.0)
    cfg = dy.IntegratorConfig(dt=5.0, t_end=500.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(BlowUpError) as info:
            dy.run(dy.MREState(g, B0), cfg)
    assert info.value.state is not None
    assert np.all(np.isfinite(info.value.state.B))
    assert len(info.value.records) >= 1


def test_resolution_warning():
    g = sp.Grid(2, 16)
    B = random_solenoidal(g, 8, kmax=8)
    with pytest.warns(dy.ResolutionWarning):
        dy.run(dy.MREState(g, B, gamma=2.0), dy.IntegratorConfig(dt=0.01, t_end=0.01))


def test_threads_env(monkeypatch):
    g = sp.Grid(2, 16)
    B = random_solenoidal(g, 9)
    ref = dy.mre_rhs(g, B, 0.0)
    monkeypatch.setenv("MRELAB_THREADS", "2")
    assert np.array_equal(dy.mre_rhs(g, B, 0.0), ref)


def test_noise_floor_zeroes_round_off_only():
    g = sp.Grid(2, 32)
    B = random_solenoidal(g, 10, norm=0.01, kmax=3) + constant_field(g, (1.0, 0.0))
    cfg = dy.IntegratorConfig(dt=0.01, t_end=0.01)
    plain = dy.step(dy.MREState(g, B), cfg)
    filtered = dy.step(dy.MREState(g, B), cfg, noise_floor=1e-13)
    small = np.abs(plain.B) < 1e-13
    assert np.any(plain.B[small] != 0) and np.all(filtered.B[small] == 0)
    assert np.array_equal(filtered.B[~small], plain.B[~small])
