"""Potential-chain bookkeeping for parallel co-wound tapes.

Tapes are indexed ``k = 0..n_parallel-1`` from the inside out and turns
``i = 0..N-1``.  ``U[k, i]`` is the voltage drop along tape ``k`` over turn
``i``.  One potential chain is kept per radially adjacent tape pair:
``dV[k, i]`` is the potential of tape ``k`` minus that of tape ``k+1`` at the
end of turn ``i`` (column 0 holds the inlet value).

Radial current sign conventions: intra-turn currents flow outward from
tape ``k`` to tape ``k+1``; inter-turn currents flow outward from the last
tape of turn ``i`` to the first tape of turn ``i+1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coil import CoilSpec


@dataclass(frozen=True)
class ChainLayout:
    """Counts describing the global scalar unknowns of the chain system."""

    n_parallel: int
    n_turns: int
    n_chains: int
    n_voltages: int
    n_inlet_unknowns: int
    closed_loop: bool

    @property
    def n_unknowns(self) -> int:
        return self.n_voltages + self.n_inlet_unknowns + int(self.closed_loop)

    @property
    def n_continuity(self) -> int:
        return self.n_parallel * self.n_turns

    @property
    def n_closures(self) -> int:
        return self.n_chains


def generalize_chain(n_parallel: int, n_turns: int = 1, closed_loop: bool = False) -> ChainLayout:
    """Layout of chains and unknowns for ``n_parallel`` tapes.

    Every strip contributes a turn voltage, every tape but the last an inlet
    current (the last is fixed by the transport current), and the closed-loop
    mode adds the coil current.
    """
    if n_parallel < 1 or n_turns < 1:
        raise ValueError("n_parallel >= 1 and n_turns >= 1 required")
    return ChainLayout(
        n_parallel=n_parallel,
        n_turns=n_turns,
        n_chains=n_parallel - 1,
        n_voltages=n_parallel * n_turns,
        n_inlet_unknowns=n_parallel - 1,
        closed_loop=closed_loop,
    )


@dataclass(frozen=True)
class RadialCurrents:
    I_tt: np.ndarray      # (n_parallel-1, N) intra-turn radial currents [A]
    I_turn: np.ndarray    # (N-1,) inter-turn radial currents [A]
    dV_chain: np.ndarray  # (n_parallel-1, N+1) chain potentials [V]


def inlet_currents(I_in_free, I_op) -> np.ndarray:
    """Complete the inlet split; the last tape takes whatever the others do not."""
    free = np.atleast_1d(np.asarray(I_in_free, dtype=float))
    return np.append(free, I_op - free.sum())


def dv_chain(U, I_in, r_in) -> np.ndarray:
    """Inter-tape potential differences at the inlet and at every turn end."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    I_in = np.asarray(I_in, dtype=float)
    r_in = np.asarray(r_in, dtype=float)
    n_p, n_turns = U.shape
    dv = np.empty((n_p - 1, n_turns + 1))
    if n_p == 1:
        return dv
    dv[:, 0] = I_in[1:] * r_in[1:] - I_in[:-1] * r_in[:-1]
    dv[:, 1:] = dv[:, :1] - np.cumsum(U[:-1] - U[1:], axis=1)
    return dv


def radial_drive_voltages(dV, U):
    """Average driving voltages of the intra-turn and inter-turn contacts."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    dV = np.asarray(dV, dtype=float)
    dv_tt = 0.5 * (dV[:, 1:] + dV[:, :-1])
    # potential of the last tape minus the first at each turn end
    spread = -dV[:, 1:-1].sum(axis=0) if dV.shape[0] else np.zeros(U.shape[1] - 1)
    dv_turn = spread + 0.5 * (U[0, 1:] + U[-1, :-1])
    return dv_tt, dv_turn


def contact_conductances(spec: CoilSpec, radii=None):
    """Conductances [S] of the intra-turn (n_p-1, N) and inter-turn (N-1,) contacts."""
    n_p, n_turns = spec.n_parallel, spec.n_turns
    if radii is None:
        radii = spec.strip_radii().reshape(n_turns, n_p).T
    if spec.insulated:
        return np.zeros((n_p - 1, n_turns)), np.zeros(max(n_turns - 1, 0))
    g = 2.0 * math.pi * radii * spec.tape_width / spec.contact_resistivity
    return g[:-1, :], g[-1, :-1]


def radial_currents(drives, spec: CoilSpec) -> tuple[np.ndarray, np.ndarray]:
    """Ohmic radial currents through the contacts for the given drive voltages."""
    dv_tt, dv_turn = drives
    g_tt, g_turn = contact_conductances(spec)
    return g_tt * dv_tt, g_turn * dv_turn


def evaluate_radials(U, I_in, spec: CoilSpec, r_in) -> RadialCurrents:
    dV = dv_chain(U, I_in, r_in)
    I_tt, I_turn = radial_currents(radial_drive_voltages(dV, U), spec)
    return RadialCurrents(I_tt=I_tt, I_turn=I_turn, dV_chain=dV)


def continuity_residuals(I_az, radials: RadialCurrents, I_in) -> np.ndarray:
    """Current balance of every (tape, turn) strip, shape (n_parallel, N)."""
    I_az = np.atleast_2d(np.asarray(I_az, dtype=float))
    n_p, n_turns = I_az.shape
    inflow = np.empty_like(I_az)
    inflow[:, 0] = I_in
    inflow[:, 1:] = I_az[:, :-1]
    res = inflow - I_az
    res[:-1, :] -= radials.I_tt
    res[1:, :] += radials.I_tt
    res[-1, :-1] -= radials.I_turn
    res[0, 1:] += radials.I_turn
    return res


def closure_residuals(I_az, radials: RadialCurrents, r_out) -> np.ndarray:
    """Output-terminal voltage closure of every chain, shape (n_parallel-1,)."""
    I_az = np.atleast_2d(np.asarray(I_az, dtype=float))
    r_out = np.asarray(r_out, dtype=float)
    last = I_az[:, -1]
    return radials.dV_chain[:, -1] - (last[:-1] * r_out[:-1] - last[1:] * r_out[1:])


def node_constraints(I_az, radials: RadialCurrents, I_in, r_out) -> np.ndarray:
    """All Kirchhoff residuals: strip continuities (tape-major) then chain closures."""
    cont = continuity_residuals(I_az, radials, I_in)
    return np.concatenate([cont.ravel(), closure_residuals(I_az, radials, r_out)])
