"""Coil specification and the 1D tape-strip mesh shared by every other module."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

MU0 = 4e-7 * math.pi  # vacuum permeability [T m/A]


class SpecError(ValueError):
    """Raised when a coil specification violates one of its invariants."""


@dataclass(frozen=True)
class MaterialParams:
    """E-J power law and modified Kim model parameters of the HTS layer."""

    jc0: float
    n_value: float = 30.0
    e0: float = 1e-4
    kim_m: float = 0.0605
    kim_alpha: float = 0.7580
    kim_b0: float = 0.103
    mu0: float = MU0


@dataclass(frozen=True)
class JointResistances:
    """Terminal joint resistances per parallel tape [Ohm].

    ``closed_loop_delta`` is added to every joint once the coil is switched
    into closed-loop operation.
    """

    input: tuple[float, ...]
    output: tuple[float, ...]
    closed_loop_delta: float = 0.0

    def at(self, closed: bool) -> tuple[np.ndarray, np.ndarray]:
        rin = np.asarray(self.input, dtype=float)
        rout = np.asarray(self.output, dtype=float)
        if closed:
            rin = rin + self.closed_loop_delta
            rout = rout + self.closed_loop_delta
        return rin, rout


@dataclass(frozen=True)
class CoilSpec:
    n_parallel: int
    n_turns: int
    inner_radius: float
    tape_width: float
    tape_thickness: float
    radial_pitch: float
    material: MaterialParams
    joints: JointResistances
    contact_resistivity: float
    axial_center: float = 0.0

    @property
    def n_strips(self) -> int:
        return self.n_parallel * self.n_turns

    @property
    def outer_radius(self) -> float:
        return self.inner_radius + self.n_strips * self.radial_pitch

    @property
    def insulated(self) -> bool:
        return math.isinf(self.contact_resistivity)

    def strip_radius(self, turn: int, tape: int) -> float:
        """Centerline radius of ``tape`` (0-based) in ``turn`` (0-based)."""
        layer = turn * self.n_parallel + tape
        return self.inner_radius + (layer + 0.5) * self.radial_pitch

    def strip_radii(self) -> np.ndarray:
        layers = np.arange(self.n_strips)
        return self.inner_radius + (layers + 0.5) * self.radial_pitch

    def with_turns(self, n_turns: int) -> "CoilSpec":
        return replace(self, n_turns=n_turns)


def pitch_from_diameters(inner_diameter: float, outer_diameter: float,
                         n_parallel: int, n_turns: int) -> float:
    """Radial pitch per tape layer that reproduces a quoted ID/OD pair."""
    return 0.5 * (outer_diameter - inner_diameter) / (n_parallel * n_turns)


def jc0_from_ic(ic_per_tape: float, tape_width: float, tape_thickness: float) -> float:
    return ic_per_tape / (tape_width * tape_thickness)


def contact_layer_radii(spec: CoilSpec) -> np.ndarray:
    """Radii at which the radial contact resistances are evaluated.

    Every strip except the outermost one owns exactly one outward contact
    (intra-turn to the next tape, or inter-turn to the next turn).
    """
    return spec.strip_radii()[:-1]


def contact_resistivity_from_coil_resistance(spec: CoilSpec, coil_resistance: float) -> float:
    """Area resistivity whose series sum over all contact layers equals ``coil_resistance``."""
    radii = contact_layer_radii(spec)
    if radii.size == 0:
        raise SpecError("a single-strip coil has no contact layers")
    conductance_sum = np.sum(1.0 / (2.0 * math.pi * radii * spec.tape_width))
    return coil_resistance / conductance_sum


def coil_contact_resistance(spec: CoilSpec) -> float:
    """Series sum of every contact-layer resistance (the characteristic R_c)."""
    if spec.insulated:
        return math.inf
    radii = contact_layer_radii(spec)
    return float(np.sum(spec.contact_resistivity / (2.0 * math.pi * radii * spec.tape_width)))


def validate_spec(spec: CoilSpec) -> CoilSpec:
    """Return ``spec`` unchanged, or raise :class:`SpecError` naming the first broken invariant."""
    checks = [
        (spec.n_parallel >= 1, "n_parallel >= 1"),
        (spec.n_turns >= 1, "n_turns >= 1"),
        (spec.inner_radius > 0, "inner_radius > 0"),
        (spec.tape_width > 0, "tape_width > 0"),
        (spec.tape_thickness > 0, "tape_thickness > 0"),
        (spec.radial_pitch > 0, "radial_pitch > 0"),
        (math.isfinite(spec.outer_radius) and spec.outer_radius > spec.inner_radius,
         "outer_radius finite and > inner_radius"),
        (spec.contact_resistivity > 0, "contact_resistivity > 0"),
    ]
    mat = spec.material
    checks += [
        (mat.n_value > 1, "material.n_value > 1"),
        (mat.e0 > 0, "material.e0 > 0"),
        (mat.jc0 > 0, "material.jc0 > 0"),
        (mat.kim_b0 > 0, "material.kim_b0 > 0"),
        (mat.kim_alpha >= 0, "material.kim_alpha >= 0"),
        (0 <= mat.kim_m <= 1, "0 <= material.kim_m <= 1"),
    ]
    j = spec.joints
    checks += [
        (len(j.input) == spec.n_parallel, "joints.input length == n_parallel"),
        (len(j.output) == spec.n_parallel, "joints.output length == n_parallel"),
        (all(r >= 0 for r in j.input), "joints.input entries >= 0"),
        (all(r >= 0 for r in j.output), "joints.output entries >= 0"),
    ]
    for ok, name in checks:
        if not ok:
            raise SpecError(f"invariant violated: {name}")
    return spec


@dataclass(frozen=True)
class TapeMesh:
    """Uniform 1D discretisation of every tape strip across its width.

    Strips are stored in winding order ``s = turn * n_parallel + tape`` so
    that radius increases with ``s``.  Nodes and elements of strip ``s`` are
    the slices ``node_offset[s]:node_offset[s+1]`` and
    ``elem_offset[s]:elem_offset[s+1]``.
    """

    spec: CoilSpec
    strip_turn: np.ndarray
    strip_tape: np.ndarray
    strip_radius: np.ndarray
    node_offset: np.ndarray
    elem_offset: np.ndarray
    node_z: np.ndarray
    elem_strip: np.ndarray = field(repr=False)

    @property
    def n_strips(self) -> int:
        return self.strip_radius.size

    @property
    def n_nodes(self) -> int:
        return self.node_z.size

    @property
    def n_elements(self) -> int:
        return self.elem_strip.size

    def elements_in(self, s: int) -> slice:
        return slice(int(self.elem_offset[s]), int(self.elem_offset[s + 1]))

    def nodes_in(self, s: int) -> slice:
        return slice(int(self.node_offset[s]), int(self.node_offset[s + 1]))

    @property
    def elem_lo(self) -> np.ndarray:
        """Index of the lower node of every element."""
        return np.arange(self.n_elements) + self.elem_strip

    @property
    def elem_z0(self) -> np.ndarray:
        return self.node_z[self.elem_lo]

    @property
    def elem_z1(self) -> np.ndarray:
        return self.node_z[self.elem_lo + 1]

    @property
    def elem_length(self) -> np.ndarray:
        return self.elem_z1 - self.elem_z0

    @property
    def elem_z(self) -> np.ndarray:
        return 0.5 * (self.elem_z0 + self.elem_z1)

    @property
    def elem_r(self) -> np.ndarray:
        return self.strip_radius[self.elem_strip]

    @property
    def node_r(self) -> np.ndarray:
        counts = np.diff(self.node_offset)
        return np.repeat(self.strip_radius, counts)

    def strip_index(self, turn: int, tape: int) -> int:
        return turn * self.spec.n_parallel + tape

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.strip_radius, self.node_offset, self.node_z):
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        return h.hexdigest()


def build_mesh(spec: CoilSpec, elements_per_width: int,
               strip_elements: np.ndarray | None = None) -> TapeMesh:
    """Discretise every strip uniformly across its width.

    ``strip_elements`` optionally overrides the element count per strip
    (used by the multi-scale mode to coarsen non-analysed turns).
    """
    validate_spec(spec)
    if elements_per_width < 2 and strip_elements is None:
        raise SpecError("elements_per_width >= 2")
    n_strips = spec.n_strips
    if strip_elements is None:
        counts = np.full(n_strips, int(elements_per_width), dtype=np.int64)
    else:
        counts = np.asarray(strip_elements, dtype=np.int64)
        if counts.shape != (n_strips,) or np.any(counts < 1):
            raise SpecError("strip_elements must give >= 1 element for every strip")

    a = spec.axial_center - 0.5 * spec.tape_width
    b = spec.axial_center + 0.5 * spec.tape_width
    node_z = np.concatenate([np.linspace(a, b, n + 1) for n in counts])
    node_offset = np.concatenate([[0], np.cumsum(counts + 1)])
    elem_offset = np.concatenate([[0], np.cumsum(counts)])
    strips = np.arange(n_strips)
    return TapeMesh(
        spec=spec,
        strip_turn=strips // spec.n_parallel,
        strip_tape=strips % spec.n_parallel,
        strip_radius=spec.strip_radii(),
        node_offset=node_offset,
        elem_offset=elem_offset,
        node_z=node_z,
        elem_strip=np.repeat(strips, counts),
    )
