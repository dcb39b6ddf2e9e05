import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcrta import chain
from conftest import make_spec


def test_layout_counts():
    lay = chain.generalize_chain(2, 30)
    assert (lay.n_voltages, lay.n_inlet_unknowns, lay.n_unknowns) == (60, 1, 61)
    assert chain.generalize_chain(3, 32, closed_loop=True).n_unknowns == 96 + 2 + 1
    assert chain.generalize_chain(1, 5).n_chains == 0
    with pytest.raises(ValueError):
        chain.generalize_chain(0)


def test_inlet_split_sums_to_transport():
    assert chain.inlet_currents([10.0, 20.0], 50.0) == pytest.approx([10.0, 20.0, 20.0])


def test_chain_recursion_dual_tape():
    U = np.array([[1.0, 2.0, 3.0], [1.5, 2.0, 2.0]])
    I_in = np.array([4.0, 6.0])
    r_in = np.array([0.5, 0.25])
    dv = chain.dv_chain(U, I_in, r_in)
    # inlet: potential of A minus B equals the joint drop of B minus that of A
    assert dv[0, 0] == pytest.approx(6 * 0.25 - 4 * 0.5)
    assert dv[0, 1:] == pytest.approx(dv[0, 0] - np.cumsum(U[0] - U[1]))


def test_radial_drives_dual_tape():
    U = np.array([[1.0, 2.0, 3.0], [1.5, 2.0, 2.0]])
    dv = chain.dv_chain(U, [4.0, 6.0], [0.5, 0.25])
    dv_tt, dv_turn = chain.radial_drive_voltages(dv, U)
    assert dv_tt[0] == pytest.approx(0.5 * (dv[0, 1:] + dv[0, :-1]))
    assert dv_turn == pytest.approx(-dv[0, 1:-1] + 0.5 * (U[0, 1:] + U[1, :-1]))


def test_insulated_coil_has_no_radial_current():
    spec = replace(make_spec(), contact_resistivity=math.inf)
    g_tt, g_turn = chain.contact_conductances(spec)
    assert not g_tt.any() and not g_turn.any()


@settings(max_examples=40, deadline=None)
@given(n_p=st.integers(1, 4), n_t=st.integers(1, 5), seed=st.integers(0, 1000))
def test_global_current_conservation(n_p, n_t, seed):
    """Summing every strip balance leaves inflow minus outflow: radial terms cancel."""
    rng = np.random.default_rng(seed)
    spec = make_spec(n_parallel=n_p, n_turns=n_t)
    U = rng.normal(size=(n_p, n_t)) * 1e-6
    I_in = rng.normal(size=n_p)
    I_az = rng.normal(size=(n_p, n_t))
    rin, _ = spec.joints.at(False)
    rad = chain.evaluate_radials(U, I_in, spec, rin)
    res = chain.continuity_residuals(I_az, rad, I_in)
    assert res.sum() == pytest.approx(I_in.sum() - I_az[:, -1].sum(), abs=1e-9)


def test_closure_for_equal_split_and_symmetric_joints():
    spec = make_spec(n_parallel=2, n_turns=2)
    U = np.zeros((2, 2))
    I_in = np.array([5.0, 5.0])
    rin, rout = spec.joints.at(False)
    rad = chain.evaluate_radials(U, I_in, spec, rin)
    I_az = np.full((2, 2), 5.0)
    assert np.allclose(chain.node_constraints(I_az, rad, I_in, rout), 0.0)
