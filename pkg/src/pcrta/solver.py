"""Monolithic backward-Euler / Newton solution of the coupled strip-chain system.

Unknowns of one step, in order:

* the azimuthal current ``I_e = d (T[e+1] - T[e])`` of every element
  (T is pinned to zero on the lower edge of each strip, which removes the
  gauge freedom of the strip equations),
* the turn voltage ``U`` of every analysed strip,
* the inlet currents of all tapes but the last,
* the coil current, only when a closed-loop switch is configured.

Because the radial field is the z-derivative of the vector potential, the
nodal Galerkin residual of a strip is an invertible difference of the
element balances ``f_e = E(J_e) + <dA/dt>_e - U/(2 pi r)``, where ``<>_e`` is
the mean over the element.  The element means come from the symmetric
sheet-to-sheet inductance matrix, so every current pattern, including
element-to-element oscillations, carries its full inductive cost.
Analysed strips use ``f_e = 0`` directly; non-analysed strips keep the
nodal form so that the current-target penalty can replace one row.
"""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lu_factor, lu_solve

from . import chain
from .coil import CoilSpec, TapeMesh, build_mesh, validate_spec
from .kernels import KernelSet, assemble_kernels, uniform_current_weights, DEFAULT_MEMORY_CAP
from .multiscale import MultiscaleConfig, interpolation_matrix, select_analyzed
from .scenario import (BackgroundField, ClosedLoopConfig, DriveProfile,
                       background_element_potential, background_node_potential,
                       source_current)
from .ta import ej_power_law, ej_slope, jc_kim

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    pass


class SimulationAborted(RuntimeError):
    """Raised when a step fails at the minimum time step; carries the last good state."""

    def __init__(self, message, state=None, dump_path=None):
        super().__init__(message)
        self.state = state
        self.dump_path = dump_path


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 0.01
    dt_min: float = 1e-6
    dt_max: float | None = None
    newton_tol: float = 1e-10
    max_newton_iters: int = 30
    jacobian_mode: str = "analytic"

    def __post_init__(self):
        dt_max = self.dt if self.dt_max is None else self.dt_max
        if not (0 < self.dt_min <= self.dt <= dt_max):
            raise ValueError("dt_min <= dt <= dt_max with dt_min > 0 required")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol > 0")
        if self.jacobian_mode not in ("analytic", "fd-check"):
            raise ValueError("jacobian_mode must be 'analytic' or 'fd-check'")


@dataclass(frozen=True)
class Scenario:
    profile: DriveProfile
    closed_loop: ClosedLoopConfig | None = None
    background: BackgroundField | None = None
    t_end: float | None = None

    @property
    def end_time(self) -> float:
        return self.profile.t_end if self.t_end is None else self.t_end

    def breakpoints(self) -> list[float]:
        pts = set(float(t) for t in self.profile.times)
        if self.closed_loop is not None:
            pts.add(float(self.closed_loop.t0))
        if self.background is not None:
            pts.add(float(self.background.t_start))
        end = self.end_time
        return sorted(t for t in pts | {end} if 0.0 < t <= end)


@dataclass
class SimState:
    """Solver state at one instant: the full unknown vector plus its time."""

    time: float
    x: np.ndarray
    newton_iterations: int = 0
    kirchhoff_residual: float = 0.0


@dataclass
class StepContext:
    t_old: float
    t_new: float
    dt: float
    x_old: np.ndarray
    jc: np.ndarray
    dA_bg: np.ndarray        # element-averaged background potential rate
    closed: bool
    I_op: float              # transport current when it is prescribed


class PcrtaModel:
    """Assembled coupled model of one coil under one scenario."""

    def __init__(self, spec: CoilSpec, elements_per_width: int, scenario: Scenario,
                 multiscale: MultiscaleConfig | None = None, kernels: KernelSet | None = None,
                 memory_cap: int | None = DEFAULT_MEMORY_CAP, base_dt: float = 0.01):
        validate_spec(spec)
        self.spec = spec
        self.scenario = scenario
        self.multiscale = multiscale
        n_p, n_turns = spec.n_parallel, spec.n_turns
        if multiscale is None:
            self.analyzed_turns = np.arange(n_turns)
        else:
            self.analyzed_turns = select_analyzed(multiscale, n_turns)
        turn_is_analyzed = np.zeros(n_turns, dtype=bool)
        turn_is_analyzed[self.analyzed_turns] = True
        self.strip_analyzed = np.repeat(turn_is_analyzed, n_p)
        counts = np.where(self.strip_analyzed, elements_per_width,
                          multiscale.coarse_elements if multiscale else elements_per_width)
        self.mesh: TapeMesh = build_mesh(spec, elements_per_width, strip_elements=counts)
        self.kernels = kernels if kernels is not None else assemble_kernels(self.mesh, memory_cap)
        if self.kernels.n_elements != self.mesh.n_elements:
            raise ValueError("kernel set does not match the mesh")
        self._build_static(base_dt)

    # ------------------------------------------------------------------ layout
    def _build_static(self, base_dt):
        spec, mesh, ks = self.spec, self.mesh, self.kernels
        n_p, N = spec.n_parallel, spec.n_turns
        n_el, n_s = mesh.n_elements, mesh.n_strips
        self.n_el = n_el
        self.an_strips = np.flatnonzero(self.strip_analyzed)
        self.n_u = self.an_strips.size
        self.n_in = n_p - 1
        self.has_coil_unknown = self.scenario.closed_loop is not None
        self.layout = chain.generalize_chain(n_p, N, self.has_coil_unknown)
        self.sl_I = slice(0, n_el)
        self.sl_U = slice(n_el, n_el + self.n_u)
        self.sl_in = slice(self.sl_U.stop, self.sl_U.stop + self.n_in)
        self.i_coil = self.sl_in.stop if self.has_coil_unknown else None
        self.n_x = self.sl_in.stop + int(self.has_coil_unknown)

        lo = mesh.elem_lo
        self.h = mesh.elem_length
        self.d = spec.tape_thickness
        self.r_el = mesh.elem_r
        self.A_el = ks.A_map
        self.S_el = sp.csr_matrix((np.ones(n_el), (mesh.elem_strip, np.arange(n_el))),
                                  shape=(n_s, n_el))
        # strip-order interpolation of analysed U (and strip currents) to all strips
        P_U = np.zeros((n_s, self.n_u))
        col_of = {int(s): c for c, s in enumerate(self.an_strips)}
        for k in range(n_p):
            radii = mesh.strip_radius[k::n_p]
            W = interpolation_matrix(self.analyzed_turns, radii)
            for j in range(N):
                for c, t_an in enumerate(self.analyzed_turns):
                    if W[j, c] != 0.0:
                        P_U[j * n_p + k, col_of[int(t_an) * n_p + k]] = W[j, c]
        self.P_U = P_U
        # element -> U/(2 pi r) coupling
        D_r = sp.csr_matrix((1.0 / (2.0 * math.pi * self.r_el), (np.arange(n_el), mesh.elem_strip)),
                            shape=(n_el, n_s))
        self.DU = np.asarray((D_r @ P_U))

        # row combination (identity on analysed strips, nodal differences elsewhere)
        rows, cols, vals = [], [], []
        for s in range(n_s):
            es = mesh.elements_in(s)
            idx = np.arange(es.start, es.stop)
            if self.strip_analyzed[s]:
                rows += list(idx); cols += list(idx); vals += [1.0] * idx.size
            else:
                for n in range(idx.size):       # nodal residual at node n+1
                    rows.append(idx[n]); cols.append(idx[n]); vals.append(1.0)
                    if n + 1 < idx.size:
                        rows.append(idx[n]); cols.append(idx[n + 1]); vals.append(-1.0)
        self.C = sp.csr_matrix((vals, (rows, cols)), shape=(n_el, n_el))
        self.CA = np.asarray(self.C @ self.A_el)
        self.CDU = np.asarray(self.C @ self.DU)
        self.Q = self._penalty_matrix(base_dt)

        # Kirchhoff operators for charging and closed-loop joints
        self._kirchhoff = {False: self._kirchhoff_rows(False), True: self._kirchhoff_rows(True)}
        self.i_scale = max(1.0, self.scenario.profile.peak)
        self.v_scale = spec.material.e0 * 2.0 * math.pi * spec.inner_radius
        self.e_scale = spec.material.e0
        self.u_weights = uniform_current_weights(mesh)
        bg = self.scenario.background
        if bg is not None:
            a = background_node_potential(bg, mesh)
            self.a_bg_el = background_element_potential(bg, mesh)
            self.br_bg_el = -(a[lo + 1] - a[lo]) / self.h
            _, self.bz_bg_el = bg.field_per_amp(mesh.elem_r, mesh.elem_z)
        else:
            self.a_bg_el = None

    def _penalty_matrix(self, base_dt):
        """Current-target penalty rows of non-analysed strips, linear in element currents."""
        mesh, n_el = self.mesh, self.n_el
        Q = np.zeros((n_el, n_el))
        coarse = np.flatnonzero(~self.strip_analyzed)
        self.penalty_beta = {}
        if coarse.size == 0:
            return Q
        ms = self.multiscale
        n_p = self.spec.n_parallel
        diag = np.diag(self.A_el)
        # target current of every strip as a function of analysed strip currents
        P_I = self.P_U  # same radial weights as the voltages
        for s in coarse:
            es = mesh.elements_in(s)
            idx = np.arange(es.start, es.stop)
            r = mesh.strip_radius[s]
            if ms.penalty is None:
                kappa = ms.penalty_scale * float(np.mean(diag[idx])) / base_dt
                beta = kappa * self.d / (2.0 * math.pi * r)
            else:
                beta = ms.penalty
                kappa = beta * 2.0 * math.pi * r / self.d
            self.penalty_beta[int(s)] = beta
            # d(target)/d(I_el): interpolated analysed strip currents
            tgt = np.zeros(n_el)
            for c, s_an in enumerate(self.an_strips):
                wgt = P_I[s, c]
                if wgt != 0.0:
                    tgt[mesh.elements_in(int(s_an))] += wgt
            if ms.variant == "edge":
                Q[idx[-1], idx] += kappa
                Q[idx[-1]] -= kappa * tgt
            else:
                # distributed: beta 2 pi r * mass * (T - target/d) on nodes 1..N
                z = mesh.node_z[mesh.nodes_in(s)]
                hz = np.diff(z)
                n = idx.size
                mass = np.zeros((n + 1, n + 1))
                for e in range(n):
                    mass[e:e + 2, e:e + 2] += hz[e] * np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
                cum = np.tril(np.ones((n + 1, n)), -1) / self.d  # T nodes from element currents
                scale = kappa / self.spec.tape_width
                Q[np.ix_(idx, idx)] += scale * self.d * (mass @ cum)[1:]
                Q[idx] -= scale * np.outer(mass[1:].sum(axis=1), tgt)
        return Q

    def _kirchhoff_function(self, I_strip, U_full, I_in_free, I_op, closed):
        spec = self.spec
        n_p, N = spec.n_parallel, spec.n_turns
        rin, rout = spec.joints.at(closed)
        I_in = chain.inlet_currents(I_in_free, I_op) if n_p > 1 else np.array([I_op])
        U = U_full.reshape(N, n_p).T
        I_az = I_strip.reshape(N, n_p).T
        rad = chain.evaluate_radials(U, I_in, spec, rin)
        cont = chain.continuity_residuals(I_az, rad, I_in).T.ravel()  # strip order
        clos = chain.closure_residuals(I_az, rad, rout)
        return cont, clos

    def _kirchhoff_rows(self, closed):
        """Probe the (linear) chain relations for their matrix in terms of the unknowns."""
        n_s = self.mesh.n_strips
        n_in = self.n_in
        n_in_cols = 2 * n_s + n_in + 1
        base = np.zeros(n_in_cols)
        cont_cols, clos_cols = [], []
        for j in range(n_in_cols):
            v = base.copy(); v[j] = 1.0
            c, k = self._kirchhoff_function(v[:n_s], v[n_s:2 * n_s], v[2 * n_s:2 * n_s + n_in],
                                            v[-1], closed)
            cont_cols.append(c); clos_cols.append(k)
        Kc = np.array(cont_cols).T[self.an_strips]
        Kk = np.array(clos_cols).T.reshape(n_in, n_in_cols)
        K = np.vstack([Kc, Kk])
        # compose with unknowns: I_strip = S_el I, U_full = P_U U
        M = np.zeros((K.shape[0], self.n_x))
        M[:, self.sl_I] = (self.S_el.T @ K[:, :n_s].T).T
        M[:, self.sl_U] = K[:, n_s:2 * n_s] @ self.P_U
        M[:, self.sl_in] = K[:, 2 * n_s:2 * n_s + n_in]
        op_col = K[:, -1]
        if self.has_coil_unknown:
            M[:, self.i_coil] = op_col
            op_col = np.zeros_like(op_col)
        return M, op_col, Kc.shape[0]

    # ---------------------------------------------------------------- unpack
    def element_currents(self, x):
        return x[self.sl_I]

    def strip_currents(self, x):
        return self.S_el @ x[self.sl_I]

    def element_J(self, x):
        return x[self.sl_I] / (self.h * self.d)

    def T_nodes(self, x):
        """Nodal current vector potential [A/m] of every strip (lower edge at 0)."""
        out = np.zeros(self.mesh.n_nodes)
        I = x[self.sl_I]
        for s in range(self.mesh.n_strips):
            es, ns = self.mesh.elements_in(s), self.mesh.nodes_in(s)
            out[ns.start + 1:ns.stop] = np.cumsum(I[es]) / self.d
        return out

    def turn_voltages(self, x):
        return self.P_U @ x[self.sl_U]

    def transport_current(self, x, ctx_I_op):
        return x[self.i_coil] if self.has_coil_unknown else ctx_I_op

    def inlet_currents(self, x, I_op):
        if self.spec.n_parallel == 1:
            return np.array([I_op])
        return chain.inlet_currents(x[self.sl_in], I_op)

    # ---------------------------------------------------------------- context
    def lagged_jc(self, x, t):
        ks = self.kernels
        I = x[self.sl_I]
        b_perp = ks.Br_map @ I
        b_par = ks.Bz_map @ I
        bg = self.scenario.background
        if bg is not None:
            i_bg = bg.current(t)
            b_perp = b_perp + i_bg * self.br_bg_el
            b_par = b_par + i_bg * self.bz_bg_el
        return jc_kim(b_par, b_perp, self.spec.material)

    def make_context(self, state: SimState, dt: float, t_new: float | None = None) -> StepContext:
        t_old = state.time
        if t_new is None:
            t_new = t_old + dt
        cl = self.scenario.closed_loop
        closed = cl is not None and cl.closed(t_old)
        bg = self.scenario.background
        if bg is not None:
            dA_bg = (bg.current(t_new) - bg.current(t_old)) / dt * self.a_bg_el
        else:
            dA_bg = np.zeros(self.n_el)
        return StepContext(t_old=t_old, t_new=t_new, dt=dt, x_old=state.x, jc=self.lagged_jc(state.x, t_old),
                           dA_bg=dA_bg, closed=closed,
                           I_op=source_current(self.scenario.profile, t_new))

    # ---------------------------------------------------------------- residual
    def _mode_row(self, ctx: StepContext):
        """Linear mode row (coefficients, constant, scale) when a switch is configured."""
        row = np.zeros(self.n_x)
        if not ctx.closed:
            row[self.i_coil] = 1.0
            return row, -ctx.I_op, self.i_scale
        spec = self.spec
        rin, rout = spec.joints.at(True)
        n_p = spec.n_parallel
        # sum of first-tape turn voltages
        first = np.arange(0, self.mesh.n_strips, n_p)
        row[self.sl_U] = self.P_U[first].sum(axis=0)
        if n_p > 1:
            row[self.sl_in.start] += rin[0]
        else:
            row[self.i_coil] += rin[0]
        last_first = self.mesh.elements_in(int(first[-1]))
        row[last_first] += rout[0]
        row[self.i_coil] += self.scenario.closed_loop.r_cl
        return row, 0.0, self.v_scale

    def linear_part(self, ctx: StepContext):
        """Constant Jacobian and affine offset of every row except the power-law terms."""
        n_el = self.n_el
        Kmat, op_col, n_cont = self._kirchhoff[ctx.closed]
        J = np.zeros((self.n_x, self.n_x))
        J[:n_el, self.sl_I] = self.CA / ctx.dt + self.Q
        J[:n_el, self.sl_U] = -self.CDU
        J[:n_el] /= self.e_scale
        b = np.zeros(self.n_x)
        b[:n_el] = (self.C @ (ctx.dA_bg - self.A_el @ ctx.x_old[self.sl_I] / ctx.dt)) / self.e_scale
        r0 = n_el
        J[r0:r0 + n_cont] = Kmat[:n_cont] / self.i_scale
        b[r0:r0 + n_cont] = op_col[:n_cont] * ctx.I_op / self.i_scale
        r1 = r0 + n_cont
        J[r1:r1 + self.n_in] = Kmat[n_cont:] / self.v_scale
        b[r1:r1 + self.n_in] = op_col[n_cont:] * ctx.I_op / self.v_scale
        if self.has_coil_unknown:
            row, const, scale = self._mode_row(ctx)
            J[-1] = row / scale
            b[-1] = const / scale
        n_rows = r1 + self.n_in + int(self.has_coil_unknown)
        if n_rows != self.n_x:
            raise ValueError(f"system is not square: {n_rows} rows for {self.n_x} unknowns")
        return J, b

    def residual(self, x, ctx: StepContext, lin=None):
        J_lin, b = lin if lin is not None else self.linear_part(ctx)
        F = J_lin @ x + b
        E = ej_power_law(self.element_J(x), ctx.jc, self.spec.material)
        F[:self.n_el] += (self.C @ E) / self.e_scale
        return F

    def jacobian(self, x, ctx: StepContext, lin=None):
        J_lin, _ = lin if lin is not None else self.linear_part(ctx)
        slope = ej_slope(self.element_J(x), ctx.jc, self.spec.material) / (self.h * self.d)
        J = J_lin.copy()
        Cs = (self.C @ sp.diags(slope)).tocoo()
        np.add.at(J, (Cs.row, Cs.col), Cs.data / self.e_scale)
        return J

    def kirchhoff_residual(self, x, ctx: StepContext) -> float:
        """Largest strip current-balance violation [A] at state ``x``."""
        Kmat, op_col, n_cont = self._kirchhoff[ctx.closed]
        r = Kmat[:n_cont] @ x + op_col[:n_cont] * ctx.I_op
        return float(np.max(np.abs(r))) if r.size else 0.0

    # ---------------------------------------------------------------- stepping
    def zero_state(self) -> SimState:
        return SimState(time=0.0, x=np.zeros(self.n_x))

    def newton(self, state: SimState, ctx: StepContext, cfg: SolverConfig):
        lin = self.linear_part(ctx)
        x = state.x.copy()
        F = self.residual(x, ctx, lin)
        norm = float(np.max(np.abs(F)))
        it = 0
        while norm > cfg.newton_tol:
            if it >= cfg.max_newton_iters:
                raise ConvergenceError(f"no convergence in {it} iterations (residual {norm:.3e})")
            J = self.jacobian(x, ctx, lin)
            if cfg.jacobian_mode == "fd-check" and it == 0:
                err = jacobian_fd_error(self, x, ctx)
                log.info("jacobian check at t=%.6g: max relative error %.3e", ctx.t_new, err)
            dx = lu_solve(lu_factor(J, check_finite=False), -F, check_finite=False)
            alpha = 1.0
            while True:
                xn = x + alpha * dx
                Fn = self.residual(xn, ctx, lin)
                nn = float(np.max(np.abs(Fn)))
                if np.isfinite(nn) and nn < norm:
                    break
                alpha *= 0.5
                if alpha < 1.0 / 4096:
                    raise ConvergenceError(f"line search failed (residual {norm:.3e})")
            x, F, norm = xn, Fn, nn
            it += 1
        return x, it

    def step(self, state: SimState, dt: float, cfg: SolverConfig, t_new: float | None = None) -> SimState:
        """Advance one implicit step; raises :class:`ConvergenceError` on failure."""
        if dt <= 0:
            raise ValueError("dt > 0 required")
        ctx = self.make_context(state, dt, t_new)
        x, it = self.newton(state, ctx, cfg)
        return SimState(time=ctx.t_new, x=x, newton_iterations=it,
                        kirchhoff_residual=self.kirchhoff_residual(x, ctx))


def jacobian_fd_error(model: PcrtaModel, x, ctx: StepContext, rel_step=1e-6) -> float:
    """Max column-wise relative error of the analytic Jacobian against central differences."""
    J = model.jacobian(x, ctx)
    worst = 0.0
    for j in range(model.n_x):
        h = rel_step * max(abs(x[j]), 1e-3 if j < model.n_el else 1e-9)
        xp = x.copy(); xp[j] += h
        xm = x.copy(); xm[j] -= h
        col = (model.residual(xp, ctx) - model.residual(xm, ctx)) / (2 * h)
        denom = max(np.max(np.abs(col)), np.max(np.abs(J[:, j])), 1e-300)
        worst = max(worst, float(np.max(np.abs(col - J[:, j]))) / denom)
    return worst


# ---------------------------------------------------------------------------
# time loop and diagnostics


@dataclass
class TimeSeriesRecord:
    """Output table (one row per output time) plus optional J snapshots."""

    columns: dict[str, list] = field(default_factory=dict)
    units: dict[str, str] = field(default_factory=dict)
    snapshot_times: list[float] = field(default_factory=list)
    snapshots: list[np.ndarray] = field(default_factory=list)
    mesh_digest: str = ""
    info: dict = field(default_factory=dict)

    def add(self, name, value, unit):
        if name not in self.columns:
            self.columns[name] = []
            self.units[name] = unit
        self.columns[name].append(float(value))

    def __getitem__(self, name) -> np.ndarray:
        return np.asarray(self.columns[name])

    @property
    def t(self) -> np.ndarray:
        return self["t"]

    def names(self):
        return list(self.columns)


def diagnostics(model: PcrtaModel, state: SimState, ctx: StepContext | None):
    """Physical outputs of ``state``; ``ctx`` supplies the mode, Jc and the previous step."""
    spec, mesh = model.spec, model.mesh
    n_p, N = spec.n_parallel, spec.n_turns
    x = state.x
    t = state.time
    closed = bool(ctx.closed) if ctx is not None else False
    I_src = source_current(model.scenario.profile, t)
    I_op = x[model.i_coil] if model.has_coil_unknown else I_src
    rin, rout = spec.joints.at(closed)
    I_in = model.inlet_currents(x, I_op)
    I_strip = model.strip_currents(x)
    U_full = model.turn_voltages(x)
    U = U_full.reshape(N, n_p).T
    rad = chain.evaluate_radials(U, I_in, spec, rin)
    g_tt, g_turn = chain.contact_conductances(spec)
    dv_tt, dv_turn = chain.radial_drive_voltages(rad.dV_chain, U)
    I_az = I_strip.reshape(N, n_p).T
    I_out = I_az[:, -1]
    jc = ctx.jc if ctx is not None else np.full(model.n_el, spec.material.jc0)
    I_el = x[model.sl_I]
    E = ej_power_law(model.element_J(x), jc, spec.material)
    p_el = E * I_el * 2.0 * math.pi * model.r_el
    v_sc = np.asarray(model.S_el @ (E * model.h)) * 2.0 * math.pi * mesh.strip_radius / spec.tape_width
    MI = model.kernels.M @ I_el
    out = {
        "I_op": I_op,
        "I_source": I_src,
        "V_coil": float(np.sum(U[0]) + I_in[0] * rin[0] + I_out[0] * rout[0]),
        "I_in": I_in,
        "I_out": I_out,
        "I_strip": I_strip,
        "U": U_full,
        "I_tt": rad.I_tt,
        "I_turn": rad.I_turn,
        "dV_chain": rad.dV_chain,
        "B_center": float(model.kernels.Bz_center @ I_el),
        "P_sc": float(np.sum(p_el)),
        "P_ct": float(np.sum(g_tt * dv_tt**2) + np.sum(g_turn * dv_turn**2)),
        "P_joint": float(np.sum(I_in**2 * rin) + np.sum(I_out**2 * rout)),
        "P_cl": float(I_op**2 * model.scenario.closed_loop.r_cl) if closed else 0.0,
        "flux": float(model.u_weights @ MI),
        "W_mag": float(0.5 * I_el @ MI),
        "V_sc": v_sc,
        "J": model.element_J(x),
        "E": E,
    }
    return out


def _record_row(record: TimeSeriesRecord, model: PcrtaModel, state: SimState, ctx, kirch_max,
                iters_max, snapshots: bool):
    spec = model.spec
    n_p, N = spec.n_parallel, spec.n_turns
    dg = diagnostics(model, state, ctx)
    record.add("t", state.time, "s")
    record.add("I_op", dg["I_op"], "A")
    record.add("I_source", dg["I_source"], "A")
    record.add("V_coil", dg["V_coil"], "V")
    for k in range(n_p):
        record.add(f"I_in_{k + 1}", dg["I_in"][k], "A")
    for k in range(n_p):
        record.add(f"I_out_{k + 1}", dg["I_out"][k], "A")
    record.add("B_center", dg["B_center"], "T")
    record.add("P_sc", dg["P_sc"], "W")
    record.add("P_ct", dg["P_ct"], "W")
    record.add("P_joint", dg["P_joint"], "W")
    record.add("P_cl", dg["P_cl"], "W")
    record.add("flux", dg["flux"], "Wb")
    record.add("W_mag", dg["W_mag"], "J")
    record.add("kirchhoff_max", kirch_max, "A")
    record.add("newton_iters", iters_max, "1")
    for s in range(model.mesh.n_strips):
        i, k = divmod(s, n_p)
        record.add(f"I_t{i + 1}_k{k + 1}", dg["I_strip"][s], "A")
    for s in range(model.mesh.n_strips):
        i, k = divmod(s, n_p)
        record.add(f"Vsc_t{i + 1}_k{k + 1}", dg["V_sc"][s], "V")
    for k in range(n_p - 1):
        for i in range(N):
            record.add(f"Itt_t{i + 1}_k{k + 1}", dg["I_tt"][k, i], "A")
    for i in range(N - 1):
        record.add(f"Iturn_t{i + 1}", dg["I_turn"][i], "A")
    if snapshots:
        record.snapshot_times.append(state.time)
        record.snapshots.append(dg["J"].copy())


def _time_grid(scenario: Scenario, cadence: float | None):
    end = scenario.end_time
    pts = set(scenario.breakpoints())
    outputs = None
    if cadence is not None:
        n = int(math.floor(end / cadence + 1e-9))
        outputs = [round(k * cadence, 12) for k in range(1, n + 1)]
        pts |= set(outputs)
    pts.add(end)
    return sorted(p for p in pts if 0 < p <= end), (set(outputs) | {end} if outputs else None)


def run(model: PcrtaModel, cfg: SolverConfig, cadence: float | None = None, snapshots: bool = False,
        dump_path=None, progress=None) -> TimeSeriesRecord:
    """Integrate the scenario from the zero (virgin) state.

    Steps land exactly on every profile breakpoint, the switching time, the
    excitation start and every output time.  A failing step is retried with
    half the step down to ``dt_min``.
    """
    record = TimeSeriesRecord(mesh_digest=model.mesh.digest())
    stops, outputs = _time_grid(model.scenario, cadence)
    dt_max = cfg.dt if cfg.dt_max is None else cfg.dt_max
    state = model.zero_state()
    _record_row(record, model, state, None, 0.0, 0, snapshots)
    dt = cfg.dt
    kirch_max = 0.0
    iters_max = 0
    n_steps = 0
    wall0 = _time.perf_counter()
    for stop in stops:
        while state.time < stop:
            remaining = stop - state.time
            h = min(dt, remaining)
            if remaining - h < 1e-6 * cfg.dt:
                h = remaining
            t_new = stop if h == remaining else state.time + h
            try:
                ctx = model.make_context(state, h, t_new)
                new_state = model.step(state, h, cfg, t_new)
            except ConvergenceError as exc:
                if dt / 2 < cfg.dt_min:
                    path = None
                    if dump_path is not None:
                        from .io import write_snapshot
                        write_snapshot(dump_path, model.mesh.digest(), state.time, state.x)
                        path = dump_path
                    raise SimulationAborted(f"step failed at t={state.time:.6g} s with dt={h:.3g}: {exc}",
                                            state, path) from exc
                dt /= 2
                continue
            state = new_state
            n_steps += 1
            kirch_max = max(kirch_max, state.kirchhoff_residual)
            iters_max = max(iters_max, state.newton_iterations)
            dt = min(dt * 2, cfg.dt, dt_max)
            if progress is not None:
                progress(state)
            if outputs is None:
                _record_row(record, model, state, ctx, kirch_max, iters_max, snapshots)
                kirch_max = 0.0
                iters_max = 0
        if outputs is not None and stop in outputs:
            _record_row(record, model, state, ctx, kirch_max, iters_max, snapshots)
            kirch_max = 0.0
            iters_max = 0
    record.info.update(steps=n_steps, wall_time=_time.perf_counter() - wall0,
                       analyzed_turns=(model.analyzed_turns + 1).tolist(),
                       penalty_beta=model.penalty_beta)
    return record
