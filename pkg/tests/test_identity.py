"""Energy-balance evaluator for the frozen-coefficient model problem."""
import dataclasses

import numpy as np
import pytest

from stefansim.grids import Grids, NormalGrid, TangentialGrid
from stefansim.identity import identity_residual_k0, model_energy
from stefansim.transform import Cutoff


def synthetic_window(grids, dt=1e-3, amp=0.05, decay=0.7):
    """Smooth fabricated (t, u, rho) samples; not a PDE solution."""
    x = grids.tangential.nodes
    z = grids.normal.nodes[None, :]

    def sample(t):
        damp = np.exp(-decay * t)
        u = damp * (amp * np.cos(x)[:, None] * np.cos(np.pi * z)
                    + 0.5 * amp * z**2)
        rho = damp * amp * np.sin(x)
        return (t, u, rho)

    return [sample(j * dt) for j in range(3)]


@pytest.fixture(scope="module")
def med_grids():
    return Grids(TangentialGrid(32), NormalGrid(33))


def test_steady_window_is_exactly_balanced(med_grids):
    # u == 0, rho == const: every term of the identity vanishes identically
    u = np.zeros(med_grids.shape)
    rho = np.full(32, 0.1)
    window = [(j * 0.1, u, rho) for j in range(3)]
    rep = identity_residual_k0(window, 1e-3, Cutoff(), med_grids)
    assert rep.lhs == 0.0 and rep.rhs == 0.0
    assert rep.residual == 0.0
    assert rep.dE_dt == 0.0 and rep.D_bar == 0.0
    assert rep.bulk_P == 0.0 and rep.bulk_R == 0.0
    assert rep.bdry_Q == rep.bdry_S == rep.bdry_T == 0.0


def test_window_validation(med_grids):
    window = synthetic_window(med_grids)
    with pytest.raises(ValueError):
        identity_residual_k0(window[:2], 0.0, Cutoff(), med_grids)  # even length
    with pytest.raises(ValueError):
        identity_residual_k0(window[:1], 0.0, Cutoff(), med_grids)  # too short
    skewed = [window[0], window[1], (window[2][0] + 0.5, *window[2][1:])]
    with pytest.raises(ValueError):
        identity_residual_k0(skewed, 0.0, Cutoff(), med_grids)  # non-uniform


def test_cross_terms_vanish_on_generic_window(med_grids):
    rep = identity_residual_k0(synthetic_window(med_grids), 1e-2, Cutoff(), med_grids)
    assert rep.cross_terms_max == 0.0
    assert rep.t == pytest.approx(1e-3)
    assert rep.residual >= 0.0
    assert rep.lhs == pytest.approx(rep.dE_dt + rep.D_bar)


def test_zero_eps_is_the_continuous_limit(med_grids):
    # the eps terms enter multiplicatively: eps -> 0 must agree with eps = 0
    window = synthetic_window(med_grids)
    rep0 = identity_residual_k0(window, 0.0, Cutoff(), med_grids)
    rep_tiny = identity_residual_k0(window, 1e-30, Cutoff(), med_grids)
    for f in dataclasses.fields(rep0):
        a = getattr(rep0, f.name)
        b = getattr(rep_tiny, f.name)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-20), f.name


def test_f_override_reproduces_default(med_grids):
    window = synthetic_window(med_grids)

    def default_f(fields):
        coef = fields["coef"]
        un_up, un_lo = fields["un"]
        uxn_up, uxn_lo = fields["uxn"]
        return (-coef.B * uxn_up - coef.c * un_up,
                -coef.B * uxn_lo - coef.c * un_lo)

    rep_a = identity_residual_k0(window, 1e-3, Cutoff(), med_grids)
    rep_b = identity_residual_k0(window, 1e-3, Cutoff(), med_grids,
                                 f_override=default_f)
    assert rep_a == rep_b

    def zero_f(fields):
        shape = fields["u"].shape
        return np.zeros(shape), np.zeros(shape)

    rep_c = identity_residual_k0(window, 1e-3, Cutoff(), med_grids, f_override=zero_f)
    assert rep_c.bulk_P != rep_a.bulk_P


def test_model_energy_basics(med_grids):
    assert model_energy(np.zeros(med_grids.shape), np.zeros(32), 0.5,
                        Cutoff(), med_grids) == 0.0
    x = med_grids.tangential.nodes
    z = med_grids.normal.nodes[None, :]
    u = 0.1 * np.cos(x)[:, None] * np.cos(np.pi * z)
    rho = 0.05 * np.sin(x)
    e0 = model_energy(u, rho, 0.0, Cutoff(), med_grids)
    e1 = model_energy(u, rho, 1.0, Cutoff(), med_grids)
    assert 0.0 < e0 < e1  # eps terms only add nonnegative interface energy
