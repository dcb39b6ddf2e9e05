import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcrta.coil import MaterialParams
from pcrta.ta import (StripState, element_balance, ej_power_law, ej_slope, jc_kim,
                      nodal_from_element_balance, strip_residual, tape_current)

MAT = MaterialParams(jc0=2e8, n_value=25.0)


def test_power_law_at_critical_current():
    assert ej_power_law(2e8, 2e8, MAT) == pytest.approx(MAT.e0)
    assert ej_power_law(-2e8, 2e8, MAT) == pytest.approx(-MAT.e0)
    assert ej_power_law(0.0, 2e8, MAT) == 0.0


@settings(max_examples=50, deadline=None)
@given(j=st.floats(-3e8, 3e8))
def test_power_law_odd_and_slope_consistent(j):
    jc = 2e8
    assert ej_power_law(-j, jc, MAT) == pytest.approx(-ej_power_law(j, jc, MAT), abs=1e-300)
    d = 1e-3 * max(abs(j), 1e6)
    fd = (ej_power_law(j + d, jc, MAT) - ej_power_law(j - d, jc, MAT)) / (2 * d)
    assert ej_slope(j, jc, MAT) == pytest.approx(fd, rel=1e-3, abs=1e-30)
    assert ej_slope(j, jc, MAT) >= 0


def test_kim_model_limits():
    assert jc_kim(0.0, 0.0, MAT) == MAT.jc0
    # perpendicular field is more harmful than the same parallel field
    assert jc_kim(0.0, 0.1, MAT) < jc_kim(0.1, 0.0, MAT) < MAT.jc0
    assert jc_kim(0.0, MAT.kim_b0, MAT) == pytest.approx(MAT.jc0 / 2**MAT.kim_alpha)


def test_net_current_telescopes():
    z = np.linspace(-2e-3, 2e-3, 7)
    T = np.array([0.0, 1.0, 3.0, 4.0, 4.5, 6.0, 8.0]) * 1e5
    strip = StripState(T_nodes=T, U=0.0, node_z=z)
    assert tape_current(strip, 1e-4) == pytest.approx(1e-4 * 8e5)
    assert np.sum(strip.J * strip.dz) * 1e-4 == pytest.approx(tape_current(strip, 1e-4))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(2, 12))
def test_nodal_residual_equals_element_form(seed, n):
    """For a piecewise-linear potential the nodal weak form reduces to element balances."""
    rng = np.random.default_rng(seed)
    z = np.sort(rng.uniform(-2e-3, 2e-3, n + 1))
    if np.min(np.diff(z)) < 1e-6:
        return
    T = np.cumsum(rng.normal(size=n + 1)) * 1e6
    T -= T[0]
    r = 0.05
    U = rng.normal() * 1e-4
    dA_nodes = rng.normal(size=n + 1) * 1e-5
    dBr = -np.diff(dA_nodes) / np.diff(z)
    strip = StripState(T_nodes=T, U=U, node_z=z)
    nodal = strip_residual(strip, dBr, (dA_nodes[0], dA_nodes[-1]), r, MAT)
    dA_mean = 0.5 * (dA_nodes[:-1] + dA_nodes[1:])
    f = element_balance(ej_power_law(strip.J, MAT.jc0, MAT), dA_mean, U, r)
    assert np.allclose(nodal, nodal_from_element_balance(f), rtol=1e-10, atol=1e-18)


def test_uniform_drive_without_induction_gives_uniform_current():
    z = np.linspace(-2e-3, 2e-3, 5)
    r = 0.05
    J = 0.9 * MAT.jc0
    E = ej_power_law(J, MAT.jc0, MAT)
    U = E * 2 * math.pi * r
    strip = StripState(T_nodes=J * (z - z[0]), U=U, node_z=z)
    res = strip_residual(strip, np.zeros(4), (0.0, 0.0), r, MAT)
    assert np.allclose(res, 0.0, atol=1e-12 * MAT.e0)
