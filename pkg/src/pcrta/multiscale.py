"""Analysed/non-analysed turn partition and the interpolation of the latter."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MultiscaleConfig:
    """Sampling of fully analysed turns.

    ``penalty`` is the weight ``beta`` of the current-target term; ``None``
    selects a value 1e3 times the strip stiffness (see ``penalty_scale``).
    ``variant`` is ``"edge"`` (net-current pin on the strip edge node) or
    ``"distributed"`` (the target applied to every node).
    """

    boundary_turns: int = 10
    interior_stride: int = 5
    penalty: float | None = None
    coarse_elements: int = 20
    variant: str = "edge"
    penalty_scale: float = 1e3

    def __post_init__(self):
        if self.interior_stride < 1:
            raise ValueError("interior_stride >= 1")
        if self.boundary_turns < 1:
            raise ValueError("boundary_turns >= 1")
        if self.penalty is not None and self.penalty <= 0:
            raise ValueError("penalty > 0")
        if self.coarse_elements < 1:
            raise ValueError("coarse_elements >= 1")
        if self.variant not in ("edge", "distributed"):
            raise ValueError("variant must be 'edge' or 'distributed'")


def select_analyzed(config: MultiscaleConfig, n_turns: int) -> np.ndarray:
    """Sorted 0-based indices of the analysed turns.

    Dense bands of ``boundary_turns`` at both radial edges, and in between
    every ``interior_stride``-th turn counted from the inner band.
    """
    b = min(config.boundary_turns, n_turns)
    inner = np.arange(b)
    outer = np.arange(max(n_turns - b, 0), n_turns)
    interior = np.arange(b - 1 + config.interior_stride, n_turns, config.interior_stride)
    return np.unique(np.concatenate([inner, interior, outer]))


def interp_weights(r_i: float, r_j: float, r_k: float) -> tuple[float, float]:
    """Linear radial weights of the two bracketing analysed turns."""
    span = r_k - r_i
    return (r_k - r_j) / span, (r_j - r_i) / span


def interp_turn(U_i, I_i, U_k, I_k, weights):
    w_i, w_k = weights
    return w_i * U_i + w_k * U_k, w_i * I_i + w_k * I_k


def interpolation_matrix(analyzed: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Matrix mapping analysed-turn values of one tape to all turns of that tape.

    ``radii`` are the radii of the tape in every turn.
    """
    n_turns = radii.size
    W = np.zeros((n_turns, analyzed.size))
    pos = {int(t): c for c, t in enumerate(analyzed)}
    for j in range(n_turns):
        if j in pos:
            W[j, pos[j]] = 1.0
            continue
        c = np.searchsorted(analyzed, j)
        i, k = analyzed[c - 1], analyzed[c]
        w_i, w_k = interp_weights(radii[i], radii[j], radii[k])
        W[j, c - 1] = w_i
        W[j, c] = w_k
    return W


def penalty_virtual_work(T_nodes, node_z, I_target: float, beta: float, r: float,
                         d_tape: float, variant: str = "distributed") -> np.ndarray:
    """Nodal contribution of the current-target penalty.

    ``distributed`` integrates ``beta (T - I_target/d) 2 pi r`` against the hat
    functions over the strip with T pinned to zero at the lower edge;
    ``edge`` applies it to the upper edge node only, which constrains the
    net current ``d (T_b - T_a)`` and leaves the distribution free.
    """
    T = np.asarray(T_nodes, dtype=float)
    target = I_target / d_tape
    out = np.zeros(T.size)
    if variant == "edge":
        out[-1] = beta * 2.0 * math.pi * r * ((T[-1] - T[0]) - target)
        return out
    h = np.diff(np.asarray(node_z, dtype=float))
    g = T - target
    # consistent P1 mass matrix applied to g
    out[:-1] += h * (g[:-1] / 3.0 + g[1:] / 6.0)
    out[1:] += h * (g[:-1] / 6.0 + g[1:] / 3.0)
    return beta * 2.0 * math.pi * r * out
