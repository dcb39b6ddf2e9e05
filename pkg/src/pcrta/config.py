"""Run configuration files (INI syntax, SI units throughout).

Sections ``[coil]``, ``[material]``, ``[joints]``, ``[mesh]`` and ``[drive]``
are required; ``[multiscale]``, ``[closed_loop]``, ``[background]``,
``[solver]`` and ``[output]`` are optional.  Unknown sections or keys are
errors in strict mode and warnings otherwise.
"""

from __future__ import annotations

import configparser
import logging
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .coil import (CoilSpec, JointResistances, MaterialParams, SpecError,
                   contact_resistivity_from_coil_resistance, jc0_from_ic,
                   pitch_from_diameters, validate_spec)
from .multiscale import MultiscaleConfig
from .scenario import BackgroundField, ClosedLoopConfig, DriveProfile, calibrate_background
from .solver import Scenario, SolverConfig

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


_KEYS = {
    "run": {"name"},
    "coil": {"n_parallel", "n_turns", "inner_radius", "inner_diameter", "outer_diameter",
             "radial_pitch", "tape_width", "tape_thickness", "contact_resistivity",
             "coil_contact_resistance", "insulated", "axial_center"},
    "material": {"jc0", "ic_per_tape", "ic_coil", "n_value", "e0", "kim_m", "kim_alpha", "kim_b0"},
    "joints": {"input", "output"},
    "mesh": {"elements_per_width"},
    "multiscale": {"boundary_turns", "interior_stride", "penalty", "coarse_elements", "variant",
                   "penalty_scale"},
    "drive": {"times", "currents", "ramp_rate", "level", "hold"},
    "closed_loop": {"t0", "r_cl", "delta_r"},
    "background": {"radius", "offset", "turns", "target_br", "amplitude", "frequency", "t_start"},
    "solver": {"dt", "dt_min", "dt_max", "newton_tol", "max_newton_iters", "jacobian_mode", "t_end"},
    "output": {"cadence", "snapshots"},
}
_REQUIRED = ("coil", "material", "joints", "mesh", "drive")
BUNDLED = ("table1.cfg", "table2_threetape.cfg", "table3_cycle.cfg", "freedecay_30turn.cfg",
           "ac_disturbance.cfg")


@dataclass(frozen=True)
class RunConfig:
    name: str
    coil: CoilSpec
    elements_per_width: int
    multiscale: MultiscaleConfig | None
    scenario: Scenario
    solver: SolverConfig
    cadence: float | None
    snapshots: bool


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _check_keys(cp: configparser.ConfigParser, strict: bool):
    for section in cp.sections():
        if section not in _KEYS:
            _complain(f"unknown section [{section}]", strict)
            continue
        for key in cp[section]:
            if key not in _KEYS[section]:
                _complain(f"unknown key '{key}' in [{section}]", strict)
    for section in _REQUIRED:
        if not cp.has_section(section):
            raise ConfigError(f"missing required section [{section}]")


def _complain(msg, strict):
    if strict:
        raise ConfigError(msg)
    log.warning(msg)


def _coil(cp) -> CoilSpec:
    c = cp["coil"]
    n_p = c.getint("n_parallel")
    n_t = c.getint("n_turns")
    if n_p is None or n_t is None:
        raise ConfigError("[coil] needs n_parallel and n_turns")
    if "inner_radius" in c:
        r_in = c.getfloat("inner_radius")
    elif "inner_diameter" in c:
        r_in = 0.5 * c.getfloat("inner_diameter")
    else:
        raise ConfigError("[coil] needs inner_radius or inner_diameter")
    width = c.getfloat("tape_width")
    thick = c.getfloat("tape_thickness")
    if width is None or thick is None:
        raise ConfigError("[coil] needs tape_width and tape_thickness")
    if "radial_pitch" in c:
        pitch = c.getfloat("radial_pitch")
    elif "outer_diameter" in c:
        pitch = pitch_from_diameters(2 * r_in, c.getfloat("outer_diameter"), max(n_p, 1), max(n_t, 1))
    else:
        pitch = thick

    m = cp["material"]
    if "jc0" in m:
        jc0 = m.getfloat("jc0")
    elif "ic_per_tape" in m:
        jc0 = jc0_from_ic(m.getfloat("ic_per_tape"), width, thick)
    elif "ic_coil" in m:
        jc0 = jc0_from_ic(m.getfloat("ic_coil") / max(n_p, 1), width, thick)
    else:
        raise ConfigError("[material] needs one of jc0, ic_per_tape, ic_coil")
    mat = MaterialParams(
        jc0=jc0,
        n_value=m.getfloat("n_value", 30.0),
        e0=m.getfloat("e0", 1e-4),
        kim_m=m.getfloat("kim_m", 0.0605),
        kim_alpha=m.getfloat("kim_alpha", 0.758),
        kim_b0=m.getfloat("kim_b0", 0.103),
    )
    j = cp["joints"]
    delta = cp.getfloat("closed_loop", "delta_r", fallback=0.0) if cp.has_section("closed_loop") else 0.0
    joints = JointResistances(_floats(j.get("input", "")), _floats(j.get("output", "")), delta)
    spec = CoilSpec(n_parallel=n_p, n_turns=n_t, inner_radius=r_in, tape_width=width,
                    tape_thickness=thick, radial_pitch=pitch, material=mat, joints=joints,
                    contact_resistivity=1.0, axial_center=c.getfloat("axial_center", 0.0))
    if c.getboolean("insulated", False):
        rho = math.inf
    elif "contact_resistivity" in c:
        rho = c.getfloat("contact_resistivity")
    elif "coil_contact_resistance" in c:
        rho = contact_resistivity_from_coil_resistance(spec, c.getfloat("coil_contact_resistance"))
    else:
        raise ConfigError("[coil] needs contact_resistivity, coil_contact_resistance or insulated")
    spec = replace(spec, contact_resistivity=rho)
    try:
        return validate_spec(spec)
    except SpecError as exc:
        raise ConfigError(str(exc)) from exc


def _profile(cp) -> DriveProfile:
    d = cp["drive"]
    if "times" in d:
        return DriveProfile(_floats(d["times"]), _floats(d["currents"]))
    try:
        return DriveProfile.ramp_hold(d.getfloat("ramp_rate"), d.getfloat("level"), d.getfloat("hold"))
    except TypeError as exc:
        raise ConfigError("[drive] needs times/currents or ramp_rate/level/hold") from exc


def parse_config(text: str, strict: bool = True) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    _check_keys(cp, strict)
    coil = _coil(cp)
    epw = cp.getint("mesh", "elements_per_width", fallback=None)
    if epw is None:
        raise ConfigError("[mesh] needs elements_per_width")
    profile = _profile(cp)

    ms = None
    if cp.has_section("multiscale"):
        s = cp["multiscale"]
        ms = MultiscaleConfig(
            boundary_turns=s.getint("boundary_turns", 10),
            interior_stride=s.getint("interior_stride", 5),
            penalty=s.getfloat("penalty") if "penalty" in s else None,
            coarse_elements=s.getint("coarse_elements", 20),
            variant=s.get("variant", "edge"),
            penalty_scale=s.getfloat("penalty_scale", 1e3),
        )
    cl = None
    if cp.has_section("closed_loop"):
        s = cp["closed_loop"]
        cl = ClosedLoopConfig(t0=s.getfloat("t0"), r_cl=s.getfloat("r_cl"),
                              delta_r=s.getfloat("delta_r", 0.0))
    bg = None
    if cp.has_section("background"):
        s = cp["background"]
        bg = BackgroundField(
            radius=s.getfloat("radius", 1.5 * coil.outer_radius),
            offset=s.getfloat("offset", 1.5 * coil.tape_width),
            turns=s.getfloat("turns", 1.0),
            amplitude=s.getfloat("amplitude", 50.0),
            frequency=s.getfloat("frequency", 1.0),
            t_start=s.getfloat("t_start", 0.0),
            axial_center=coil.axial_center,
        )
        if "target_br" in s:
            if "turns" in s:
                raise ConfigError("[background] give either turns or target_br, not both")
            bg = calibrate_background(bg, coil, s.getfloat("target_br"))

    sv = cp["solver"] if cp.has_section("solver") else {}
    get = (lambda k, default: float(sv[k]) if k in sv else default)
    solver = SolverConfig(
        dt=get("dt", 0.01),
        dt_min=get("dt_min", 1e-6),
        dt_max=get("dt_max", None),
        newton_tol=get("newton_tol", 1e-10),
        max_newton_iters=int(get("max_newton_iters", 30)),
        jacobian_mode=sv.get("jacobian_mode", "analytic") if sv else "analytic",
    )
    t_end = get("t_end", None)
    scenario = Scenario(profile=profile, closed_loop=cl, background=bg, t_end=t_end)
    if cl is not None and not (0.0 <= cl.t0 <= scenario.end_time):
        raise ConfigError("[closed_loop] t0 must lie within the simulated span")
    out = cp["output"] if cp.has_section("output") else {}
    cadence = float(out["cadence"]) if "cadence" in out else None
    snapshots = cp.getboolean("output", "snapshots", fallback=False) if out else False
    name = cp.get("run", "name", fallback="run") if cp.has_section("run") else "run"
    return RunConfig(name=name, coil=coil, elements_per_width=epw, multiscale=ms,
                     scenario=scenario, solver=solver, cadence=cadence, snapshots=snapshots)


def load_config(path, strict: bool = True) -> RunConfig:
    """Parse a config file; a bare bundled name (e.g. ``table1.cfg``) is looked up in the package."""
    p = Path(path)
    if not p.exists() and p.name in BUNDLED and p.parent == Path("."):
        return parse_config(bundled_text(p.name), strict)
    return parse_config(p.read_text(), strict)


def bundled_text(name: str) -> str:
    return resources.files("pcrta").joinpath("configs", name).read_text()
