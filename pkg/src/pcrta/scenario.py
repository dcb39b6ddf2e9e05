"""Drive profiles, closed-loop switching and background AC excitation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coil import CoilSpec, TapeMesh
from .kernels import loop_field, loop_potential


@dataclass(frozen=True)
class DriveProfile:
    """Piecewise-linear source current through ``(time, current)`` breakpoints."""

    times: tuple[float, ...]
    currents: tuple[float, ...]

    def __post_init__(self):
        if len(self.times) != len(self.currents) or len(self.times) < 1:
            raise ValueError("profile needs matching, non-empty time and current lists")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("profile times must be strictly increasing")

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.currents)))

    @classmethod
    def ramp_hold(cls, rate: float, level: float, hold: float) -> "DriveProfile":
        t_ramp = level / rate
        return cls((0.0, t_ramp, t_ramp + hold), (0.0, level, level))


def source_current(profile: DriveProfile, t: float) -> float:
    """Source current at ``t``; held at the end values outside the breakpoints."""
    return float(np.interp(t, profile.times, profile.currents))


@dataclass(frozen=True)
class ClosedLoopConfig:
    """Switch from the supply to a short-circuit resistor ``r_cl`` at ``t0``.

    ``delta_r`` is added to every terminal joint resistance from ``t0`` on.
    """

    t0: float
    r_cl: float
    delta_r: float = 0.0

    def __post_init__(self):
        if self.r_cl < 0:
            raise ValueError("closed-loop resistance must be >= 0")

    def closed(self, t: float) -> bool:
        return t >= self.t0


def mode_residual(I_coil: float, V_coil: float, t: float, cfg: ClosedLoopConfig | None,
                  profile: DriveProfile) -> float:
    """Follow the source before ``t0``; obey ``V + I R_cl = 0`` afterwards."""
    if cfg is None or not cfg.closed(t):
        return I_coil - source_current(profile, t)
    return V_coil + I_coil * cfg.r_cl


def coil_voltage(U_first_tape, I_in_first: float, I_out_first: float,
                 r_in_first: float, r_out_first: float) -> float:
    """Terminal voltage along the first (innermost) tape, joints included."""
    return float(np.sum(U_first_tape) + I_in_first * r_in_first + I_out_first * r_out_first)


@dataclass(frozen=True)
class BackgroundField:
    """Anti-series pair of circular excitation coils at ``z_c +/- offset``.

    The upper coil carries ``+turns * i(t)`` and the lower ``-turns * i(t)`` with
    ``i(t) = amplitude * sin(2 pi f (t - t_start))`` for ``t >= t_start``.
    """

    radius: float
    offset: float
    turns: float
    amplitude: float
    frequency: float
    t_start: float
    axial_center: float = 0.0

    def current(self, t: float) -> float:
        if t < self.t_start:
            return 0.0
        return self.amplitude * math.sin(2.0 * math.pi * self.frequency * (t - self.t_start))

    def _sources(self):
        zc = self.axial_center
        return ((zc + self.offset, self.turns), (zc - self.offset, -self.turns))

    def potential_per_amp(self, r, z) -> np.ndarray:
        """A_phi per ampere of excitation current."""
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        return sum(n * loop_potential(self.radius, zs, r, z) for zs, n in self._sources())

    def field_per_amp(self, r, z):
        br = 0.0
        bz = 0.0
        for zs, n in self._sources():
            a, b = loop_field(self.radius, zs, np.asarray(r, float), np.asarray(z, float))
            br = br + n * a
            bz = bz + n * b
        return br, bz


def default_background(spec: CoilSpec, amplitude=50.0, frequency=1.0, t_start=30.0,
                       target_br=16.7e-3) -> BackgroundField:
    """Background pair sized from the coil and calibrated to ``target_br``."""
    bg = BackgroundField(
        radius=1.5 * spec.outer_radius,
        offset=1.5 * spec.tape_width,
        turns=1.0,
        amplitude=amplitude,
        frequency=frequency,
        t_start=t_start,
        axial_center=spec.axial_center,
    )
    return calibrate_background(bg, spec, target_br)


def calibration_point(spec: CoilSpec) -> tuple[float, float]:
    """Mid-radius of the winding on the mid-plane (B_r vanishes on the axis)."""
    return 0.5 * (spec.inner_radius + spec.outer_radius), spec.axial_center


def calibrate_background(bg: BackgroundField, spec: CoilSpec, target_br: float) -> BackgroundField:
    """Scale the turn count so that the peak |B_r| at the calibration point is ``target_br``."""
    r, z = calibration_point(spec)
    unit = BackgroundField(bg.radius, bg.offset, 1.0, bg.amplitude, bg.frequency, bg.t_start,
                           bg.axial_center)
    br, _ = unit.field_per_amp(r, z)
    turns = target_br / (abs(float(br)) * bg.amplitude)
    return BackgroundField(bg.radius, bg.offset, turns, bg.amplitude, bg.frequency, bg.t_start,
                           bg.axial_center)


def background_node_potential(bg: BackgroundField, mesh: TapeMesh) -> np.ndarray:
    """A_phi per excitation ampere at every strip node."""
    return bg.potential_per_amp(mesh.node_r, mesh.node_z)


def background_element_potential(bg: BackgroundField, mesh: TapeMesh, n_gauss: int = 4) -> np.ndarray:
    """Element-mean A_phi per excitation ampere (Gauss rule along the width)."""
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    out = np.zeros(mesh.n_elements)
    for xg, wg in zip(x, w):
        z = mesh.elem_z + 0.5 * mesh.elem_length * xg
        out += 0.5 * wg * bg.potential_per_amp(mesh.elem_r, z)
    return out


def background_Br(bg: BackgroundField, t: float, mesh: TapeMesh) -> np.ndarray:
    """Element-averaged radial field [T] of the excitation at time ``t``.

    Taken as the exact difference of the nodal potential, i.e. the element
    mean of ``-dA/dz``.
    """
    a_node = background_node_potential(bg, mesh)
    lo = mesh.elem_lo
    return -bg.current(t) * (a_node[lo + 1] - a_node[lo]) / mesh.elem_length


def background_Bz(bg: BackgroundField, t: float, mesh: TapeMesh) -> np.ndarray:
    _, bz = bg.field_per_amp(mesh.elem_r, mesh.elem_z)
    return bg.current(t) * bz
