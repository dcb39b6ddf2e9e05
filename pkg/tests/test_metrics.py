import numpy as np
import pytest

from pcrta import metrics
from pcrta.coil import build_mesh
from pcrta.solver import TimeSeriesRecord
from conftest import make_spec


def test_r_squared_definition():
    ref = np.array([[1.0, 2.0], [3.0, 6.0]])
    assert metrics.compute_r_squared(ref, ref) == 1.0
    assert metrics.compute_r_squared(ref, np.full_like(ref, ref.mean())) == pytest.approx(0.0)


def test_losses_of_silent_record_are_zero():
    rec = TimeSeriesRecord()
    for t in (0.0, 1.0, 2.0):
        rec.add("t", t, "s")
        for name in ("P_sc", "P_ct", "P_joint", "P_cl"):
            rec.add(name, 0.0, "W")
    assert metrics.integrate_losses(rec)["total"] == 0.0


def test_trapezoidal_loss_integral():
    rec = TimeSeriesRecord()
    for t in (0.0, 1.0, 2.0):
        rec.add("t", t, "s")
        rec.add("P_sc", t, "W")
        rec.add("P_ct", 1.0, "W")
        rec.add("P_joint", 0.0, "W")
        rec.add("P_cl", 0.0, "W")
    losses = metrics.integrate_losses(rec)
    assert losses["superconductor"] == pytest.approx(2.0)
    assert losses["total"] == pytest.approx(4.0)


def test_decay_fit_recovers_time_constant():
    t = np.linspace(0, 10, 50)
    assert metrics.fit_decay_time_constant(t, 3.0 * np.exp(-t / 4.0)) == pytest.approx(4.0)


def test_local_maxima_counts_end_peak():
    t = np.linspace(0, 10, 1001)
    y = np.exp(-((t - 3) ** 2)) + 2 * np.exp(-((t - 10) ** 2) * 4)
    times, vals = metrics.local_maxima(t, y)
    assert times == pytest.approx([3.0, 10.0], abs=0.02)


def test_dominant_frequency_ignores_trend():
    t = np.arange(0, 5, 0.01)
    y = 100 - 2 * t + 0.1 * np.sin(2 * np.pi * 2 * t)
    assert metrics.dominant_frequency(t, y) == pytest.approx(2.0, abs=0.21)


def test_map_to_mesh_identity_and_coarsening():
    spec = make_spec(n_turns=2)
    fine, coarse = build_mesh(spec, 4), build_mesh(spec, 2)
    v = np.arange(fine.n_elements, dtype=float)
    assert np.array_equal(metrics.map_to_mesh(v, fine, fine), v)
    c = np.arange(coarse.n_elements, dtype=float)
    assert list(metrics.map_to_mesh(c, coarse, fine, method="constant")[:4]) == [0, 0, 1, 1]
    assert list(metrics.map_to_mesh(c, coarse, fine)[:4]) == [0, 0.25, 0.75, 1]
    assert np.array_equal(metrics.map_to_mesh(c, coarse, coarse), c)


def test_dominant_frequency_period_trend_removes_curved_transient():
    t = np.arange(0, 6, 0.02)
    y = 5 * np.exp(-t / 1.5) * t + 0.05 * np.sin(2 * np.pi * 2 * t)
    assert metrics.dominant_frequency(t, y) < 1.0
    assert metrics.dominant_frequency(t, y, trend_period=1.0) == pytest.approx(2.0, abs=0.2)
