"""Thin-strip T-formulation for one tape strip.

The current vector potential T (normal to the tape) is piecewise linear
along the width, so the azimuthal current density is constant on each
element.  The strip is driven through its edges by the electric field
``E = -dA/dt + U / (2 pi r)`` where ``U`` is the voltage drop along the
tape over one turn, taken positive in the direction of the current.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coil import MaterialParams


def jc_kim(b_par, b_perp, mat: MaterialParams):
    """Field-dependent critical current density (anisotropic Kim form)."""
    b_eff = np.sqrt((mat.kim_m * np.asarray(b_par)) ** 2 + np.asarray(b_perp) ** 2)
    return mat.jc0 / (1.0 + b_eff / mat.kim_b0) ** mat.kim_alpha


def ej_power_law(j, jc, mat: MaterialParams):
    """Electric field of the superconductor, odd and monotone in ``j``."""
    x = np.asarray(j) / jc
    return mat.e0 * np.abs(x) ** (mat.n_value - 1.0) * x


def ej_slope(j, jc, mat: MaterialParams):
    """dE/dJ of :func:`ej_power_law`; zero at ``j = 0`` for ``n > 1``."""
    x = np.asarray(j) / jc
    return mat.n_value * mat.e0 / jc * np.abs(x) ** (mat.n_value - 1.0)


@dataclass
class StripState:
    """Nodal T values [A/m] of one strip and its turn voltage ``U`` [V]."""

    T_nodes: np.ndarray
    U: float
    node_z: np.ndarray

    @property
    def dz(self) -> np.ndarray:
        return np.diff(self.node_z)

    @property
    def J(self) -> np.ndarray:
        return np.diff(self.T_nodes) / self.dz


def tape_current(strip: StripState, d_tape: float) -> float:
    """Net transport current [A]; the width integral of J telescopes to T(b) - T(a)."""
    return d_tape * (strip.T_nodes[-1] - strip.T_nodes[0])


def edge_field(dA_dt_edge, U, r):
    """Boundary electric field from the induced and the applied (terminal) parts."""
    return -np.asarray(dA_dt_edge) + U / (2.0 * math.pi * r)


def strip_residual(strip: StripState, dBr_dt, dA_dt_edges, r: float,
                   mat: MaterialParams, jc=None) -> np.ndarray:
    """Galerkin residual of ``dE/dz = dB_r/dt`` for every node of the strip.

    ``dBr_dt`` holds one value per element (element average), ``dA_dt_edges``
    the potential rate at the two strip edges ``(z=a, z=b)``.
    """
    h = strip.dz
    if jc is None:
        jc = mat.jc0
    E = ej_power_law(strip.J, jc, mat)
    dBr_dt = np.asarray(dBr_dt, dtype=float)
    n_nodes = strip.T_nodes.size
    res = np.zeros(n_nodes)
    # integral of E * dT~/dz: +E_e on the upper node of e, -E_e on its lower node
    res[1:] += E
    res[:-1] -= E
    # integral of dB_r/dt * T~ with linear hat functions
    res[:-1] += 0.5 * dBr_dt * h
    res[1:] += 0.5 * dBr_dt * h
    e_a = edge_field(dA_dt_edges[0], strip.U, r)
    e_b = edge_field(dA_dt_edges[1], strip.U, r)
    res[0] += e_a
    res[-1] -= e_b
    return res


def element_balance(E, dA_dt_mean, U, r):
    """Per-element field balance ``f_e = E_e + <dA/dt>_e - U/(2 pi r)``.

    ``dA_dt_mean`` is the mean potential rate over each element.  Since
    ``B_r = -dA/dz``, the hat-function integral of ``dB_r/dt`` at a node is the
    difference of the adjacent element means, so the nodal residual of
    :func:`strip_residual` equals ``-f[0], f[0]-f[1], ..., f[-1]``.
    """
    return np.asarray(E) + np.asarray(dA_dt_mean, dtype=float) - U / (2.0 * math.pi * r)


def nodal_from_element_balance(f) -> np.ndarray:
    """Map element balances ``f`` to the nodal residual vector (see :func:`element_balance`)."""
    f = np.asarray(f, dtype=float)
    res = np.zeros(f.size + 1)
    res[:-1] -= f
    res[1:] += f
    return res
