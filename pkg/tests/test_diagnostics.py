import csv

import numpy as np
import pytest

from mrelab import diagnostics as dg, dynamics as dy, spectral as sp
from mrelab.errors import DomainError
from mrelab.initial import abc_field, constant_field, random_solenoidal


def test_energy_against_physical_quadrature():
    g = sp.Grid(2, 32)
    B = random_solenoidal(g, 1, kmax=4) + constant_field(g, (1.0, 0.0))
    phys = sp.to_physical(g, B)
    quad = 0.5 * np.sum(phys**2) * (2 * np.pi / 32) ** 2
    assert np.isclose(dg.energy(g, B), quad)


def test_dissipation_gamma_zero_is_l2():
    g = sp.Grid(2, 16)
    u = random_solenoidal(g, 2)
    assert np.isclose(dg.dissipation(g, u, 0.0), sp.l2_norm(g, u) ** 2)
    u[:, 0, 0] = 1.0
    with pytest.raises(DomainError):
        dg.dissipation(g, u, 1.0)


def test_sobolev_norm_of_single_mode():
    g = sp.Grid(2, 16)
    x1, x2 = g.coords()
    f = sp.to_spectral(g, np.cos(3 * x1 + 4 * x2))
    # |k| = 5 and |cos|^2_L2 = 2 pi^2
    assert np.isclose(dg.sobolev_norm(g, f, 1.5), 5**1.5 * np.sqrt(2 * np.pi**2))
    f[0, 0] = 2.0
    assert np.isclose(dg.hs_norm(g, f, 1.0) ** 2, 4 * 4 * np.pi**2 + 25 * 2 * np.pi**2)


def test_sobolev_norm_monotone_in_s():
    g = sp.Grid(2, 32)
    b = random_solenoidal(g, 3)
    values = [dg.sobolev_norm(g, b, s) for s in (0, 0.5, 1, 2, 3)]
    assert all(a <= b + 1e-14 for a, b in zip(values, values[1:]))


def test_abc_helicity_equals_energy():
    g = sp.Grid(3, 16)
    B = abc_field(g, 1.0, 0.7, 0.4)
    assert np.isclose(dg.helicity(g, B), sp.l2_norm(g, B) ** 2)


def test_helicity_grid_refinement_invariance():
    g = sp.Grid(3, 16)
    B = random_solenoidal(g, 4, kmax=3)
    fine = sp.Grid(3, 32)
    assert np.isclose(dg.helicity(g, B), dg.helicity(fine, sp.resample(g, B, fine)), rtol=1e-12)


def test_helicity_is_three_dimensional():
    g = sp.Grid(2, 16)
    with pytest.raises(ValueError):
        dg.helicity(g, random_solenoidal(g, 5))


def test_linf_gradient_and_current():
    g = sp.Grid(2, 32)
    x1, x2 = g.coords()
    B = sp.to_spectral(g, np.stack([np.sin(x2), np.zeros_like(x2)]))
    assert np.isclose(dg.linf_gradient(g, B), 1.0)
    assert np.isclose(dg.current_l2(g, B), np.sqrt(2 * np.pi**2))


def test_tail_fraction():
    g = sp.Grid(2, 18)
    x1, _ = g.coords()
    low = sp.to_spectral(g, np.cos(x1))
    high = sp.to_spectral(g, np.cos(5 * x1))
    shifted = low.copy()
    shifted[0, 0] = 5.0
    assert dg.tail_fraction(g, shifted) < 1e-20
    assert np.isclose(dg.tail_fraction(g, low + high), 0.5)


def test_record_fields():
    g = sp.Grid(3, 8)
    state = dy.MREState(g, random_solenoidal(g, 6, kmax=2), gamma=3.0)
    rec = dg.record(state, hs=(1.0,))
    assert rec.helicity is not None
    assert np.isclose(rec.criterion, rec.u_lip + rec.b_lip**2)
    shifted = dy.MREState(g, state.B + constant_field(g, (1.0, 0, 0)), gamma=3.0)
    assert dg.record(shifted).helicity is None


def test_csv_format(tmp_path):
    g = sp.Grid(2, 8)
    recs = [dg.record(dy.MREState(g, random_solenoidal(g, 7)), hs=(1.0, 2.5))]
    path = tmp_path / "d.csv"
    dg.write_diagnostics_csv(path, recs, hs=(1.0, 2.5))
    rows = list(csv.reader(open(path)))
    assert rows[0] == dg.CSV_BASE + ["hs_1", "hs_2.5"]
    assert rows[1][3] == ""
    assert float(rows[1][1]) == recs[0].energy
    assert dg.fmt(0.1) == "0.10000000000000001"


def test_fd_weights_reproduce_central_stencil():
    w = dg.fd_weights([-2, -1, 0, 1, 2], 0.0)
    assert np.allclose(w, [1 / 12, -2 / 3, 0, 2 / 3, -1 / 12])


def test_time_derivative_exact_on_quartics():
    rng = np.random.default_rng(0)
    t = np.sort(rng.uniform(0, 1, 12))
    c = rng.standard_normal(5)
    vals = np.polyval(c, t)
    assert np.allclose(dg.time_derivative(t, vals), np.polyval(np.polyder(c), t), atol=1e-8)


def test_energy_identity_on_exponential_decay():
    class R:
        def __init__(self, t):
            self.t = t
            self.energy = np.exp(-2 * t)
            self.dissipation = 2 * np.exp(-2 * t)

    res = dg.energy_identity_residuals([R(t) for t in np.linspace(0, 1, 201)])
    assert res.max() < 1e-8


def test_fit_blowup_constant():
    class R:
        def __init__(self, t):
            self.t = t
            self.criterion = 1.0
            self.hs_norms = {2.0: np.exp(0.75 * t)}

    c = dg.fit_blowup_constant([R(t) for t in np.linspace(0, 1, 11)], 2.0)
    assert np.isclose(c, 1.5)


def test_lp_norm():
    g = sp.Grid(2, 32)
    x1, _ = g.coords()
    f = sp.to_spectral(g, np.sin(x1))
    # int sin^4 over T^2 = (2 pi)^2 * 3/8
    assert np.isclose(dg.lp_norm(g, f, 4.0), ((2 * np.pi) ** 2 * 3 / 8) ** 0.25)
    assert np.isclose(dg.lp_norm(g, f, 2.0), sp.l2_norm(g, f))
    assert np.isclose(dg.lp_norm(g, f, np.inf), 1.0)
