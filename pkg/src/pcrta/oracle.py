"""Lumped R-L network of the same winding, used as an independent reference.

Each turn of each tape is one loop split into two half-inductors that meet
at a mid-turn node; the radial contacts connect mid-turn nodes of radially
adjacent tapes.  Superconducting branches have zero resistance.  The loop
inductances come from the circular-filament formula: Gauss-averaged over
the widths for well separated loops and Maxwell's geometric-mean-distance
formula for close ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad
from scipy.sparse.linalg import splu

from .chain import contact_conductances
from .coil import MU0, CoilSpec
from .kernels import loop_mutual
from .scenario import ClosedLoopConfig, DriveProfile, source_current


def strip_gmd(width: float, separation: float) -> float:
    """Geometric mean distance between two parallel, facing segments of equal width."""
    if separation == 0.0:
        return width * math.exp(-1.5)
    f = lambda u: (width - u) * 0.5 * math.log(u * u + separation * separation)
    val, _ = quad(f, 0.0, width, limit=200, points=[min(separation, width)])
    return math.exp(2.0 * val / width**2)


def loop_inductance_matrix(spec: CoilSpec, n_gauss: int = 16) -> np.ndarray:
    """Inductance matrix [H] between the turn-tape loops in winding order."""
    r = spec.strip_radii()
    w = spec.tape_width
    n = r.size
    L = np.empty((n, n))
    x, wt = np.polynomial.legendre.leggauss(n_gauss)
    z = spec.axial_center + 0.5 * w * x
    weights = 0.5 * wt
    gmd_cache = {}
    for i in range(n):
        for j in range(i, n):
            y = abs(r[i] - r[j])
            if y < w:
                key = round(y / spec.radial_pitch)
                if key not in gmd_cache:
                    gmd_cache[key] = strip_gmd(w, y)
                a = math.sqrt(r[i] * r[j])
                val = MU0 * a * (math.log(8.0 * a / gmd_cache[key]) - 2.0)
            else:
                m = loop_mutual(r[i], z[:, None], r[j], z[None, :])
                val = float(weights @ m @ weights)
            L[i, j] = L[j, i] = val
    return L


@dataclass
class OracleNetwork:
    spec: CoilSpec
    L: np.ndarray
    g_tt: np.ndarray
    g_turn: np.ndarray

    @property
    def effective_inductance(self) -> float:
        """Series inductance for equal sharing among the parallel tapes."""
        n_p = self.spec.n_parallel
        return float(self.L.sum()) / n_p**2


def build_network(spec: CoilSpec) -> OracleNetwork:
    g_tt, g_turn = contact_conductances(spec)
    return OracleNetwork(spec=spec, L=loop_inductance_matrix(spec), g_tt=g_tt, g_turn=g_turn)


class _Mna:
    """Node/branch bookkeeping of the network.

    Nodes: input terminal, then per strip its start and mid node, then the
    end node of every tape.  The output terminal is ground.
    """

    def __init__(self, net: OracleNetwork):
        spec = net.spec
        n_p, N = spec.n_parallel, spec.n_turns
        self.n_s = n_s = n_p * N
        self.IN = 0
        self.start = 1 + 2 * np.arange(n_s)
        self.mid = self.start + 1
        self.tail = 1 + 2 * n_s + np.arange(n_p)
        self.n_nodes = 1 + 2 * n_s + n_p
        end = np.empty(n_s, dtype=int)
        for s in range(n_s):
            i, k = divmod(s, n_p)
            end[s] = self.start[s + n_p] if i + 1 < N else self.tail[k]
        self.end = end
        # half-inductor branches: 2 per strip
        self.b_from = np.empty(2 * n_s, dtype=int)
        self.b_to = np.empty(2 * n_s, dtype=int)
        self.b_from[0::2] = self.start
        self.b_to[0::2] = self.mid
        self.b_from[1::2] = self.mid
        self.b_to[1::2] = end
        self.n_b = 2 * n_s
        self.L_half = 0.25 * np.kron(net.L, np.ones((2, 2)))
        # resistive elements (node a, node b, conductance); node -1 is ground
        res = []
        for i in range(N):
            for k in range(n_p - 1):
                res.append((self.mid[i * n_p + k], self.mid[i * n_p + k + 1], net.g_tt[k, i]))
            if i + 1 < N:
                res.append((self.mid[i * n_p + n_p - 1], self.mid[(i + 1) * n_p], net.g_turn[i]))
        self.contacts = res
        self.spec = spec

    def system(self, inv_dt: float, closed: bool, cl: ClosedLoopConfig | None):
        """MNA matrix for unknowns [node voltages, branch currents]."""
        spec = self.spec
        n_v = self.n_nodes
        n = n_v + self.n_b
        A = np.zeros((n, n))

        def stamp_g(a, b, g):
            if g == 0.0:
                return
            for p, q, s in ((a, a, g), (b, b, g), (a, b, -g), (b, a, -g)):
                if p >= 0 and q >= 0:
                    A[p, q] += s

        for a, b, g in self.contacts:
            stamp_g(a, b, g)
        rin, rout = spec.joints.at(closed)
        for k in range(spec.n_parallel):
            stamp_g(self.IN, self.start[k], 1.0 / rin[k] if rin[k] > 0 else 1e12)
            stamp_g(self.tail[k], -1, 1.0 / rout[k] if rout[k] > 0 else 1e12)
        if closed:
            stamp_g(self.IN, -1, 1.0 / cl.r_cl if cl.r_cl > 0 else 1e12)
        for b in range(self.n_b):
            f, t = self.b_from[b], self.b_to[b]
            # KCL: branch current leaves "from", enters "to"
            A[f, n_v + b] += 1.0
            A[t, n_v + b] -= 1.0
            # branch law: V_f - V_t - L dI/dt = 0
            A[n_v + b, f] += 1.0
            A[n_v + b, t] -= 1.0
        A[n_v:, n_v:] -= inv_dt * self.L_half
        return A

    def currents(self, sol):
        n_v = self.n_nodes
        ib = sol[n_v:]
        n_p = self.spec.n_parallel
        strip = 0.5 * (ib[0::2] + ib[1::2])
        first_half = ib[0::2]
        second_half = ib[1::2]
        I_in = first_half[:n_p]
        I_out = second_half[-n_p:]
        return strip, I_in, I_out


def steady_split(net: OracleNetwork, I_op: float):
    """Per-tape (inlet, outlet) currents of the purely resistive network."""
    m = _Mna(net)
    A = m.system(0.0, False, None)
    rhs = np.zeros(A.shape[0])
    rhs[m.IN] = I_op
    sol = np.linalg.solve(A, rhs)
    _, I_in, I_out = m.currents(sol)
    return I_in, I_out


@dataclass
class OracleResult:
    t: np.ndarray
    I_in: np.ndarray      # (n_t, n_parallel)
    I_out: np.ndarray
    I_strip: np.ndarray   # (n_t, n_strips) turn-averaged loop currents
    I_coil: np.ndarray
    V_coil: np.ndarray
    B_center_proxy: np.ndarray  # flux-weighted total turn current


def transient_solve(net: OracleNetwork, profile: DriveProfile, t_end: float, dt: float,
                    closed_loop: ClosedLoopConfig | None = None) -> OracleResult:
    """Backward-Euler integration of the network from rest.

    Before ``t0`` the supply injects ``I_source(t)``; from ``t0`` on the
    terminals are shorted through ``r_cl`` and the joints change by ``delta_r``.
    """
    m = _Mna(net)
    n_steps = int(round(t_end / dt))
    times = np.linspace(0.0, n_steps * dt, n_steps + 1)
    n_v = m.n_nodes
    sol = np.zeros(n_v + m.n_b)
    cache = {}
    out_in, out_out, out_strip, out_coil, out_v = [], [], [], [], []

    def record(sol, closed):
        strip, I_in, I_out = m.currents(sol)
        out_in.append(I_in)
        out_out.append(I_out)
        out_strip.append(strip)
        out_coil.append(I_in.sum())
        out_v.append(sol[m.IN])

    record(sol, False)
    for n in range(n_steps):
        t_old, t_new = times[n], times[n + 1]
        closed = closed_loop is not None and t_old >= closed_loop.t0
        if closed not in cache:
            cache[closed] = splu(sp.csc_matrix(m.system(1.0 / dt, closed, closed_loop)))
        rhs = np.zeros(n_v + m.n_b)
        ib_old = sol[n_v:]
        rhs[n_v:] = -(m.L_half @ ib_old) / dt
        if not closed:
            rhs[m.IN] = source_current(profile, t_new)
        sol = cache[closed].solve(rhs)
        record(sol, closed)
    strip = np.array(out_strip)
    return OracleResult(t=times, I_in=np.array(out_in), I_out=np.array(out_out), I_strip=strip,
                        I_coil=np.array(out_coil), V_coil=np.array(out_v),
                        B_center_proxy=strip.sum(axis=1))


def ni_time_constant(net: OracleNetwork) -> float:
    """L/R_c of the winding: effective inductance over the series contact resistance."""
    g = np.concatenate([net.g_tt.ravel(), net.g_turn.ravel()])
    if g.size == 0 or np.any(g == 0):
        return math.inf
    return net.effective_inductance / float(np.sum(1.0 / g))


def closed_loop_time_constant(net: OracleNetwork, r_cl: float) -> float:
    """L/(R_cl + parallel input joints + parallel output joints) in closed-loop operation."""
    rin, rout = net.spec.joints.at(True)
    r_par = lambda r: 1.0 / np.sum(1.0 / r)
    return net.effective_inductance / (r_cl + r_par(rin) + r_par(rout))
