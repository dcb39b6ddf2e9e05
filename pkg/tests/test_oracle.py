import math
from dataclasses import replace

import numpy as np
import pytest

from pcrta import oracle
from pcrta.coil import MU0
from pcrta.scenario import ClosedLoopConfig, DriveProfile
from conftest import make_spec


def test_strip_gmd_limits():
    w = 4e-3
    assert oracle.strip_gmd(w, 0.0) == pytest.approx(w * math.exp(-1.5))
    assert oracle.strip_gmd(w, 0.5) == pytest.approx(0.5, rel=1e-5)
    # continuous towards zero separation
    assert oracle.strip_gmd(w, 1e-9) == pytest.approx(w * math.exp(-1.5), rel=1e-5)


def test_inductance_matrix_symmetric_and_dominant():
    L = oracle.loop_inductance_matrix(make_spec(n_turns=4))
    assert np.allclose(L, L.T)
    assert np.all(np.diag(L) >= L.max(axis=1) - 1e-18)


def test_table1_inductance(table1_spec):
    net = oracle.build_network(table1_spec)
    assert net.effective_inductance == pytest.approx(193e-6, rel=0.05)


def test_dc_split_only_depends_on_joints_for_two_tapes():
    spec = make_spec(n_parallel=2, n_turns=2, joints_in=(1e-7, 3e-7), joints_out=(1e-7, 3e-7))
    I_in, I_out = oracle.steady_split(oracle.build_network(spec), 40.0)
    assert I_in.sum() == pytest.approx(40.0)
    assert I_out.sum() == pytest.approx(40.0)
    assert I_in[0] > I_in[1]


def test_insulated_single_turn_ramp_voltage():
    spec = replace(make_spec(n_parallel=1, n_turns=1), contact_resistivity=math.inf)
    net = oracle.build_network(spec)
    prof = DriveProfile((0.0, 1.0), (0.0, 10.0))
    res = oracle.transient_solve(net, prof, 1.0, 0.01)
    L = net.L[0, 0]
    v_expected = L * 10.0 + 10.0 * (300e-9 + 300e-9)
    assert res.V_coil[-1] == pytest.approx(v_expected, rel=1e-6)


def test_closed_loop_decay_time_constant():
    spec = replace(make_spec(n_parallel=1, n_turns=1), contact_resistivity=math.inf)
    net = oracle.build_network(spec)
    cl = ClosedLoopConfig(t0=1.0, r_cl=1e-6)
    prof = DriveProfile((0.0, 0.5, 1.0), (0.0, 10.0, 10.0))
    tau = oracle.closed_loop_time_constant(net, 1e-6)
    dt = tau / 200
    res = oracle.transient_solve(net, prof, 1.0 + tau, dt, cl)
    after = res.t >= 1.0 + 2 * dt
    t, i = res.t[after], res.I_coil[after]
    fit = -1 / np.polyfit(t, np.log(i), 1)[0]
    # backward Euler stretches the decay by about dt/2
    assert fit == pytest.approx(tau + dt / 2, rel=1e-3)
