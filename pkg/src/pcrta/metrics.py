"""Post-processing of run records: losses, fits, spectra and field comparisons."""

from __future__ import annotations

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import detrend, find_peaks

from .coil import TapeMesh


def compute_r_squared(reference, candidate) -> float:
    """Coefficient of determination of ``candidate`` against ``reference`` (all entries pooled)."""
    ref = np.asarray(reference, dtype=float).ravel()
    cand = np.asarray(candidate, dtype=float).ravel()
    if ref.shape != cand.shape:
        raise ValueError("reference and candidate must have the same shape")
    ss_res = np.sum((ref - cand) ** 2)
    ss_tot = np.sum((ref - ref.mean()) ** 2)
    return float(1.0 - ss_res / ss_tot)


def integrate_losses(record) -> dict[str, float]:
    """Time integrals [J] of every dissipation channel of a record."""
    t = record["t"]
    out = {
        "superconductor": float(trapezoid(record["P_sc"], t)),
        "contact": float(trapezoid(record["P_ct"], t)),
        "joint": float(trapezoid(record["P_joint"], t)),
        "closed_loop": float(trapezoid(record["P_cl"], t)),
    }
    out["total"] = sum(out.values())
    return out


def source_energy(record) -> float:
    """Energy [J] delivered through the terminals while the supply drives the coil."""
    t = record["t"]
    return float(trapezoid(record["V_coil"] * record["I_op"], t))


def energy_balance_error(record) -> float:
    """Relative mismatch of delivered energy against losses plus stored field energy."""
    e_in = source_energy(record)
    losses = integrate_losses(record)
    stored = record["W_mag"][-1] - record["W_mag"][0]
    return abs(e_in - losses["total"] - stored) / abs(e_in)


def fit_decay_time_constant(t, y) -> float:
    """Time constant of ``y = y0 exp(-t / tau)`` by least squares on ``log |y|``."""
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    slope = np.polyfit(t - t[0], np.log(y), 1)[0]
    return float(-1.0 / slope)


def local_maxima(t, y, prominence_fraction=0.01):
    """Times and values of local maxima more prominent than a fraction of max(y)."""
    y = np.asarray(y, dtype=float)
    # pad with zeros so a maximum at the last sample is still a peak
    padded = np.concatenate([[0.0], y, [0.0]])
    idx, _ = find_peaks(padded, prominence=prominence_fraction * np.max(np.abs(y)))
    idx = idx - 1
    return np.asarray(t)[idx], y[idx]


def dominant_frequency(t, y, trend_period: float | None = None) -> float:
    """Frequency [Hz] of the largest non-DC spectral line of a uniformly sampled signal.

    By default a linear trend is removed.  With ``trend_period`` the trend is
    instead a centred moving average over that period, which cancels slow
    transients of any shape while passing every harmonic of ``1/trend_period``
    unchanged; the half-window at each end is discarded.
    """
    t = np.asarray(t, dtype=float)
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-6):
        raise ValueError("dominant_frequency needs uniform sampling")
    y = np.asarray(y, dtype=float)
    if trend_period is None:
        y = detrend(y, type="linear")
    else:
        w = int(round(trend_period / dt[0]))
        if w < 2 or w >= y.size:
            raise ValueError("trend_period must span at least two samples and less than the record")
        trend = np.convolve(y, np.ones(w) / w, mode="valid")
        y = y[w // 2: w // 2 + trend.size] - trend
    spec = np.abs(np.fft.rfft(y * np.hanning(y.size)))
    freqs = np.fft.rfftfreq(y.size, dt[0])
    spec[0] = 0.0
    return float(freqs[np.argmax(spec)])


def dynamic_resistance(record, turn: int, tape: int) -> np.ndarray:
    """Resistive voltage over current [Ohm] of one strip (turn and tape 1-based)."""
    v = record[f"Vsc_t{turn}_k{tape}"]
    i = record[f"I_t{turn}_k{tape}"]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(np.abs(i) > 0, v / i, 0.0)


def map_to_mesh(values, source: TapeMesh, target: TapeMesh, method: str = "linear") -> np.ndarray:
    """Transfer element values between two meshes of the same coil, strip by strip.

    ``linear`` interpolates between source element centroids (constant beyond
    the outermost centroids); ``constant`` takes the value of the source
    element containing each target centroid.  Both are exact when the meshes
    coincide.
    """
    values = np.asarray(values, dtype=float)
    if source.n_strips != target.n_strips:
        raise ValueError("meshes describe different coils")
    if method not in ("linear", "constant"):
        raise ValueError("method must be 'linear' or 'constant'")
    out = np.empty(target.n_elements)
    for s in range(target.n_strips):
        es_t = target.elements_in(s)
        es_s = source.elements_in(s)
        zc = target.elem_z[es_t]
        if method == "linear":
            out[es_t] = np.interp(zc, source.elem_z[es_s], values[es_s])
        else:
            z_edges = source.node_z[source.nodes_in(s)]
            k = np.clip(np.searchsorted(z_edges, zc) - 1, 0, es_s.stop - es_s.start - 1)
            out[es_t] = values[es_s.start + k]
    return out
