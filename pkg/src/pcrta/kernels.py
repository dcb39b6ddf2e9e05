"""Axisymmetric magnetic coupling between tape elements.

Every element is a thin current sheet of uniform azimuthal current spread
over its width segment.  Couplings are built from the exact circular
filament kernels (complete elliptic integrals).  Near pairs subtract the
logarithmic singularity of the filament kernel and integrate it
analytically; the smooth remainder is Gauss-integrated.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ellipe, ellipkm1

from .coil import MU0, TapeMesh

GMD_LINE = math.exp(-1.5)  # geometric mean distance of a segment, per unit length
NEAR_FACTOR = 4.0
CACHE_ENV = "PCRTA_KERNEL_CACHE"
DEFAULT_MEMORY_CAP = 2 * 1024**3


class CoincidentPointsError(ValueError):
    """Source and observation filaments coincide: use the self term."""


class KernelMemoryError(MemoryError):
    pass


# ---------------------------------------------------------------------------
# filament kernels


def _km_e(p):
    """K(m) and E(m) for parameter m = 1 - p (p given directly for accuracy near m = 1)."""
    return ellipkm1(p), ellipe(1.0 - p)


def loop_mutual(r1, z1, r2, z2):
    """Mutual inductance [H] between two coaxial circular filaments."""
    r1, z1, r2, z2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r1, z1, r2, z2)))
    dz2 = (z2 - z1) ** 2
    s_plus = (r1 + r2) ** 2 + dz2
    p = ((r1 - r2) ** 2 + dz2) / s_plus
    m = 4.0 * r1 * r2 / s_plus
    K, E = _km_e(p)
    k = np.sqrt(m)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.array(MU0 * np.sqrt(r1 * r2) * ((2.0 / k - k) * K - (2.0 / k) * E))
        # small-m series avoids cancellation: (2/k - k)K - (2/k)E = pi k^3/16 (1 + 3m/4 + ...)
        small = m < 1e-3
        if np.any(small):
            ms = m[small]
            series = 1.0 + ms * (3.0 / 4.0 + ms * (75.0 / 128.0 + ms * 245.0 / 512.0))
            out[small] = MU0 * np.sqrt(r1[small] * r2[small]) * math.pi * ms**1.5 / 16.0 * series
    return out


def loop_potential(r_src, z_src, r_obs, z_obs):
    """A_phi [V s/m] at (r_obs, z_obs) per ampere in a filament at (r_src, z_src)."""
    scalar = np.ndim(r_src) == np.ndim(z_src) == np.ndim(r_obs) == np.ndim(z_obs) == 0
    r_src, z_src, r_obs, z_obs = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (r_src, z_src, r_obs, z_obs)))
    if np.any((r_src == r_obs) & (z_src == z_obs)):
        raise CoincidentPointsError("coincident source and observation: use self term")
    out = np.zeros(r_obs.shape)
    on = r_obs > 0
    out[on] = loop_mutual(r_src[on], z_src[on], r_obs[on], z_obs[on]) / (2.0 * math.pi * r_obs[on])
    return float(out) if scalar else out


def loop_field(r_src, z_src, r_obs, z_obs):
    """(B_r, B_z) [T] at the observation point per ampere in the filament."""
    r_src, z_src, r_obs, z_obs = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (r_src, z_src, r_obs, z_obs)))
    a, r = r_src, r_obs
    dz = z_obs - z_src
    s_plus = (a + r) ** 2 + dz**2
    s_minus = (a - r) ** 2 + dz**2
    K, E = _km_e(s_minus / s_plus)
    root = np.sqrt(s_plus)
    c = MU0 / (2.0 * math.pi)
    with np.errstate(divide="ignore", invalid="ignore"):
        bz = c / root * (K + (a**2 - r**2 - dz**2) / s_minus * E)
        br = c * dz / (r * root) * (-K + (a**2 + r**2 + dz**2) / s_minus * E)
    axis = r == 0
    if np.any(axis):
        bz = np.where(axis, MU0 * a**2 / (2.0 * (a**2 + dz**2) ** 1.5), bz)
        br = np.where(axis, 0.0, br)
    return br, bz


# ---------------------------------------------------------------------------
# analytic integrals of the 2D log kernel ln(rho), rho^2 = u^2 + y^2


def _log_antideriv(u, y):
    """F(u) with dF/du = ln sqrt(u^2 + y^2)."""
    v = u * u + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        half_log = np.where(v > 0, 0.5 * np.log(np.where(v > 0, v, 1.0)), 0.0)
        at = np.where(y > 0, y * np.arctan(u / np.where(y > 0, y, 1.0)), 0.0)
    return u * half_log - u + at


def _log_antideriv2(u, y):
    """G(u) with dG/du = F(u)."""
    v = u * u + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        logv = np.where(v > 0, np.log(np.where(v > 0, v, 1.0)), 0.0)
        at = np.where(y > 0, y * u * np.arctan(u / np.where(y > 0, y, 1.0)), 0.0)
    return 0.25 * (v * logv - v) - 0.5 * u * u + at - 0.5 * y * y * logv


def _singular_mutual(r1, r2, rho):
    """Leading logarithmic part of the filament mutual inductance for small rho."""
    return MU0 * np.sqrt(r1 * r2) * (np.log(4.0 * (r1 + r2) / rho) - 2.0)


_GAUSS = {n: np.polynomial.legendre.leggauss(n) for n in (1, 2, 3, 4, 6, 8)}


def sheet_flux(r_src, z0, z1, r_obs, z_obs, n_gauss=4):
    """Segment-averaged mutual inductance between a uniform sheet and a filament.

    Returns (1/h) * integral over z' in [z0, z1] of M(r_src, z', r_obs, z_obs).
    Exact log singularity, Gauss-integrated remainder.
    """
    r_src, z0, z1, r_obs, z_obs = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (r_src, z0, z1, r_obs, z_obs)))
    h = z1 - z0
    y = np.abs(r_src - r_obs)
    int_log = _log_antideriv(z1 - z_obs, y) - _log_antideriv(z0 - z_obs, y)
    pref = MU0 * np.sqrt(r_src * r_obs)
    singular = pref * ((np.log(4.0 * (r_src + r_obs)) - 2.0) * h - int_log)
    x, w = _GAUSS[n_gauss]
    rem = np.zeros(h.shape)
    for xg, wg in zip(x, w):
        zg = 0.5 * (z0 + z1) + 0.5 * h * xg
        rho = np.hypot(r_src - r_obs, zg - z_obs)
        ok = rho > 1e-12 * r_obs
        val = np.zeros(h.shape)
        val[ok] = loop_mutual(r_src[ok], zg[ok], r_obs[ok], z_obs[ok]) - _singular_mutual(
            r_src[ok], r_obs[ok], rho[ok])
        rem += 0.5 * wg * val
    return singular / h + rem


def sheet_sheet_flux(r_a, a0, a1, r_b, b0, b1, n_gauss=4):
    """Doubly segment-averaged mutual inductance between two uniform sheets."""
    r_a, a0, a1, r_b, b0, b1 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (r_a, a0, a1, r_b, b0, b1)))
    ha = a1 - a0
    hb = b1 - b0
    y = np.abs(r_a - r_b)
    G = _log_antideriv2
    int_log = G(a1 - b0, y) - G(a0 - b0, y) - G(a1 - b1, y) + G(a0 - b1, y)
    pref = MU0 * np.sqrt(r_a * r_b)
    singular = pref * ((np.log(4.0 * (r_a + r_b)) - 2.0) * ha * hb - int_log)
    x, w = _GAUSS[n_gauss]
    rem = np.zeros(ha.shape)
    for xi, wi in zip(x, w):
        za = 0.5 * (a0 + a1) + 0.5 * ha * xi
        for xj, wj in zip(x, w):
            zb = 0.5 * (b0 + b1) + 0.5 * hb * xj
            rho = np.hypot(r_a - r_b, za - zb)
            ok = rho > 1e-12 * r_a
            val = np.zeros(ha.shape)
            val[ok] = loop_mutual(r_a[ok], za[ok], r_b[ok], zb[ok]) - _singular_mutual(
                r_a[ok], r_b[ok], rho[ok])
            rem += 0.25 * wi * wj * val
    return singular / (ha * hb) + rem


def sheet_center_bz(r_src, z0, z1, z_axis):
    """On-axis B_z at ``z_axis`` per ampere spread uniformly over a sheet (exact)."""
    h = z1 - z0
    u1 = z1 - z_axis
    u0 = z0 - z_axis
    return MU0 / (2.0 * h) * (u1 / np.hypot(r_src, u1) - u0 / np.hypot(r_src, u0))


# ---------------------------------------------------------------------------
# kernel assembly


@dataclass(frozen=True)
class KernelSet:
    """Dense, time-independent linear maps from element currents [A] to fields.

    M        Galerkin mutual inductance between element sheets [H] (symmetric)
    A_map    element-averaged A_phi per ampere, ``M / (2 pi r_obs)``
    A_node   A_phi at every strip node per ampere
    Br_map   element-averaged B_r per ampere (exactly ``-dA/dz`` averaged)
    Bz_map   B_z at element centroids per ampere
    Bz_center  on-axis B_z at the coil mid-plane per ampere
    """

    mesh_digest: str
    M: np.ndarray
    A_map: np.ndarray
    A_node: np.ndarray
    Br_map: np.ndarray
    Bz_map: np.ndarray
    Bz_center: np.ndarray
    self_regularization: np.ndarray

    @property
    def n_elements(self) -> int:
        return self.M.shape[0]


def estimate_kernel_bytes(mesh: TapeMesh) -> int:
    n = mesh.n_elements
    return 8 * (5 * n * n + mesh.n_nodes * n)


def _near_mask(ro, zo, ho, rs, zs, hs):
    d = np.hypot(ro[:, None] - rs[None, :], zo[:, None] - zs[None, :])
    return d < NEAR_FACTOR * np.maximum(ho[:, None], hs[None, :])


def _point_sheet_matrix(mesh: TapeMesh, r_obs, z_obs, h_obs, chunk=512):
    """Sheet-averaged mutual inductance from every element to every observation point."""
    rs, zs, hs = mesh.elem_r, mesh.elem_z, mesh.elem_length
    z0s, z1s = mesh.elem_z0, mesh.elem_z1
    out = np.empty((r_obs.size, rs.size))
    for lo in range(0, r_obs.size, chunk):
        sl = slice(lo, min(lo + chunk, r_obs.size))
        ro, zo = r_obs[sl], z_obs[sl]
        block = loop_mutual(rs[None, :], zs[None, :], ro[:, None], zo[:, None])
        near = _near_mask(ro, zo, h_obs[sl], rs, zs, hs)
        i, j = np.nonzero(near)
        if i.size:
            block[i, j] = sheet_flux(rs[j], z0s[j], z1s[j], ro[i], zo[i])
        out[sl] = block
    return out


def _galerkin_matrix(mesh: TapeMesh, chunk=512):
    r, z, h = mesh.elem_r, mesh.elem_z, mesh.elem_length
    z0, z1 = mesh.elem_z0, mesh.elem_z1
    n = r.size
    M = np.empty((n, n))
    for lo in range(0, n, chunk):
        sl = slice(lo, min(lo + chunk, n))
        with np.errstate(divide="ignore", invalid="ignore"):
            block = loop_mutual(r[None, :], z[None, :], r[sl, None], z[sl, None])
        near = _near_mask(r[sl], z[sl], h[sl], r, z, h)
        i, j = np.nonzero(near)
        if i.size:
            ii = i + lo
            block[i, j] = sheet_sheet_flux(r[ii], z0[ii], z1[ii], r[j], z0[j], z1[j])
        M[sl] = block
    return 0.5 * (M + M.T)


def _bz_matrix(mesh: TapeMesh, chunk=512):
    """B_z at element centroids: analytic far field, flux difference for near pairs."""
    r, z, h = mesh.elem_r, mesh.elem_z, mesh.elem_length
    z0, z1 = mesh.elem_z0, mesh.elem_z1
    pitch = mesh.spec.radial_pitch
    n = r.size
    out = np.empty((n, n))
    for lo in range(0, n, chunk):
        sl = slice(lo, min(lo + chunk, n))
        with np.errstate(divide="ignore", invalid="ignore"):
            _, block = loop_field(r[None, :], z[None, :], r[sl, None], z[sl, None])
        near = _near_mask(r[sl], z[sl], h[sl], r, z, h)
        i, j = np.nonzero(near)
        if i.size:
            ii = i + lo
            delta = 0.25 * np.minimum(pitch, h[ii])
            coarse = _bz_central_difference(r[j], z0[j], z1[j], r[ii], z[ii], delta)
            fine = _bz_central_difference(r[j], z0[j], z1[j], r[ii], z[ii], 0.5 * delta)
            block[i, j] = (4.0 * fine - coarse) / 3.0  # Richardson extrapolation
        out[sl] = block
    return out


def _bz_central_difference(r_src, z0, z1, r_obs, z_obs, delta):
    plus = sheet_flux(r_src, z0, z1, r_obs + delta, z_obs, n_gauss=8)
    minus = sheet_flux(r_src, z0, z1, r_obs - delta, z_obs, n_gauss=8)
    return (plus - minus) / (2.0 * delta * 2.0 * math.pi * r_obs)


def assemble_kernels(mesh: TapeMesh, memory_cap: int | None = DEFAULT_MEMORY_CAP,
                     use_cache: bool = True) -> KernelSet:
    """Build all coupling maps for ``mesh`` (optionally through the on-disk cache)."""
    if memory_cap is not None and estimate_kernel_bytes(mesh) > memory_cap:
        raise KernelMemoryError(
            f"kernel storage {estimate_kernel_bytes(mesh) / 1e9:.2f} GB exceeds cap "
            f"{memory_cap / 1e9:.2f} GB: reduce elements or enable multi-scale")
    cache_dir = os.environ.get(CACHE_ENV)
    digest = mesh.digest()
    if use_cache and cache_dir:
        path = Path(cache_dir) / f"{digest}.bin"
        if path.exists():
            return read_kernel_cache(path, digest)

    r_el = mesh.elem_r
    h = mesh.elem_length
    M = _galerkin_matrix(mesh)
    A_map = M / (2.0 * math.pi * r_el[:, None])

    node_r = mesh.node_r
    counts = np.diff(mesh.elem_offset)
    node_h = np.repeat(mesh.spec.tape_width / counts, counts + 1)
    psi_node = _point_sheet_matrix(mesh, node_r, mesh.node_z, node_h)
    A_node = psi_node / (2.0 * math.pi * node_r[:, None])

    lo = mesh.elem_lo
    Br_map = -(A_node[lo + 1] - A_node[lo]) / h[:, None]
    Bz_map = _bz_matrix(mesh)
    Bz_center = sheet_center_bz(r_el, mesh.elem_z0, mesh.elem_z1, mesh.spec.axial_center)

    ks = KernelSet(
        mesh_digest=digest,
        M=M,
        A_map=A_map,
        A_node=A_node,
        Br_map=Br_map,
        Bz_map=Bz_map,
        Bz_center=Bz_center,
        self_regularization=GMD_LINE * h,
    )
    if use_cache and cache_dir:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        write_kernel_cache(Path(cache_dir) / f"{digest}.bin", ks)
    return ks


def uniform_current_weights(mesh: TapeMesh) -> np.ndarray:
    """Fraction of the coil current carried by each element for a uniform split."""
    counts = np.diff(mesh.elem_offset)
    per_strip = 1.0 / mesh.spec.n_parallel
    return np.repeat(per_strip / counts, counts)


def effective_inductance(mesh_or_kernels, mesh: TapeMesh | None = None) -> float:
    """Series inductance [H] of the winding for uniform current distribution."""
    if isinstance(mesh_or_kernels, KernelSet):
        if mesh is None:
            raise ValueError("mesh required alongside a KernelSet")
        ks = mesh_or_kernels
    else:
        mesh = mesh_or_kernels
        ks = assemble_kernels(mesh)
    x = uniform_current_weights(mesh)
    return float(x @ ks.M @ x)


def field_at(mesh: TapeMesh, elem_currents, r, z, n_gauss=2):
    """(A_phi, B_r, B_z) at arbitrary points away from the tapes.

    Each element is integrated with ``n_gauss`` filaments across its width.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    cur = np.asarray(elem_currents, dtype=float)
    x, w = _GAUSS[n_gauss]
    A = np.zeros(r.shape)
    Br = np.zeros(r.shape)
    Bz = np.zeros(r.shape)
    rs = mesh.elem_r
    for xg, wg in zip(x, w):
        zs = mesh.elem_z + 0.5 * mesh.elem_length * xg
        Ig = 0.5 * wg * cur
        with np.errstate(divide="ignore", invalid="ignore"):
            Mk = loop_mutual(rs[None, :], zs[None, :], r[:, None], z[:, None])
            br, bz = loop_field(rs[None, :], zs[None, :], r[:, None], z[:, None])
        A += np.where(r > 0, (Mk @ Ig) / (2.0 * math.pi * np.where(r > 0, r, 1.0)), 0.0)
        Br += br @ Ig
        Bz += bz @ Ig
    return A, Br, Bz


# ---------------------------------------------------------------------------
# binary cache: magic, version, digest, array count, then (name, rows, cols, data)

_MAGIC = b"PCRK"
_VERSION = 1
_FIELDS = ("M", "A_map", "A_node", "Br_map", "Bz_map", "Bz_center", "self_regularization")


def write_kernel_cache(path: Path, ks: KernelSet) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(ks.mesh_digest.encode("ascii"))
        fh.write(struct.pack("<I", len(_FIELDS)))
        for name in _FIELDS:
            arr = np.atleast_2d(np.asarray(getattr(ks, name), dtype="<f8"))
            fh.write(name.encode("ascii").ljust(32, b"\0"))
            fh.write(struct.pack("<QQ", *arr.shape))
            fh.write(np.ascontiguousarray(arr).tobytes())


def read_kernel_cache(path: Path, digest: str | None = None) -> KernelSet:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a kernel cache file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported cache version {version}")
        stored = fh.read(64).decode("ascii")
        if digest is not None and stored != digest:
            raise ValueError(f"{path}: mesh hash mismatch")
        (count,) = struct.unpack("<I", fh.read(4))
        arrays = {}
        for _ in range(count):
            name = fh.read(32).rstrip(b"\0").decode("ascii")
            rows, cols = struct.unpack("<QQ", fh.read(16))
            data = np.frombuffer(fh.read(8 * rows * cols), dtype="<f8").reshape(rows, cols)
            arrays[name] = data.astype(float)
    for vec in ("Bz_center", "self_regularization"):
        arrays[vec] = arrays[vec].ravel()
    return KernelSet(mesh_digest=stored, **arrays)
