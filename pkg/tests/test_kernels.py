import math

import numpy as np
import pytest
from scipy.integrate import dblquad, quad

from pcrta.coil import MU0, build_mesh
from pcrta.kernels import (CoincidentPointsError, KernelMemoryError, assemble_kernels,
                           effective_inductance, field_at, loop_field, loop_mutual,
                           loop_potential, read_kernel_cache, sheet_center_bz, sheet_flux,
                           sheet_sheet_flux, write_kernel_cache)
from conftest import make_spec


def test_mutual_matches_direct_neumann_integral():
    r1, r2, dz = 0.05, 0.07, 0.01
    f = lambda phi: r1 * r2 * math.cos(phi) / math.sqrt(r1**2 + r2**2 + dz**2 - 2 * r1 * r2 * math.cos(phi))
    ref = MU0 / (4 * math.pi) * 2 * math.pi * quad(f, 0, 2 * math.pi)[0]
    assert loop_mutual(r1, 0.0, r2, dz) == pytest.approx(ref, rel=1e-10)


def test_mutual_far_field_dipole_limit():
    a, b, z = 0.01, 0.012, 20.0
    dipole = MU0 * math.pi * a**2 * b**2 / (2 * z**3)
    assert loop_mutual(a, 0, b, z) == pytest.approx(dipole, rel=1e-6)


def test_on_axis_field():
    _, bz = loop_field(0.05, 0.0, np.array([0.0]), np.array([0.02]))
    assert bz[0] == pytest.approx(MU0 * 0.05**2 / (2 * (0.05**2 + 0.02**2) ** 1.5))


def test_potential_coincident_points_raise():
    with pytest.raises(CoincidentPointsError):
        loop_potential(0.05, 0.0, 0.05, 0.0)


def test_potential_vanishes_on_axis():
    assert loop_potential(0.05, 0.0, 0.0, 0.01) == 0.0


def test_field_is_curl_of_potential():
    r, z, d = 0.04, 0.003, 1e-6
    A = lambda rr, zz: loop_potential(0.05, 0.0, rr, zz)
    br_fd = -(A(r, z + d) - A(r, z - d)) / (2 * d)
    bz_fd = ((r + d) * A(r + d, z) - (r - d) * A(r - d, z)) / (2 * d) / r
    br, bz = loop_field(0.05, 0.0, np.array([r]), np.array([z]))
    assert br[0] == pytest.approx(br_fd, rel=1e-6)
    assert bz[0] == pytest.approx(bz_fd, rel=1e-6)


def test_sheet_flux_against_quadrature():
    args = (0.05, -1e-3, 1e-3, 0.0502, 0.0004)
    ref = quad(lambda zp: loop_mutual(0.05, zp, 0.0502, 0.0004), -1e-3, 1e-3, points=[0.0004], limit=200)[0] / 2e-3
    assert sheet_flux(*args) == pytest.approx(ref, rel=1e-8)


def test_sheet_sheet_self_term_against_quadrature():
    h = 0.5e-3
    val = sheet_sheet_flux(0.05, 0.0, h, 0.05, 0.0, h)
    ref = dblquad(lambda zb, za: loop_mutual(0.05, za, 0.05, zb) if za != zb else 0.0,
                  0, h, 0, h, epsabs=1e-16, epsrel=1e-9)[0] / h**2
    assert val == pytest.approx(ref, rel=1e-6)


def test_single_loop_inductance_matches_thin_strip_formula():
    spec = make_spec(n_parallel=1, n_turns=1, inner_radius=0.05)
    mesh = build_mesh(spec, 16)
    a = mesh.strip_radius[0]
    ref = MU0 * a * (math.log(8 * a / (spec.tape_width * math.exp(-1.5))) - 2)
    assert effective_inductance(mesh) == pytest.approx(ref, rel=1e-3)


def test_galerkin_matrix_symmetric_positive(small_spec):
    ks = assemble_kernels(build_mesh(small_spec, 4), use_cache=False)
    assert np.allclose(ks.M, ks.M.T, rtol=0, atol=1e-14 * np.abs(ks.M).max())
    assert np.all(np.linalg.eigvalsh(ks.M) > 0)


def test_center_field_matches_field_at(small_spec):
    mesh = build_mesh(small_spec, 4)
    ks = assemble_kernels(mesh, use_cache=False)
    I = np.linspace(1.0, 2.0, mesh.n_elements)
    _, _, bz = field_at(mesh, I, np.array([0.0]), np.array([0.0]), n_gauss=8)
    assert ks.Bz_center @ I == pytest.approx(bz[0], rel=1e-6)


def test_center_sheet_formula_against_quadrature():
    val = sheet_center_bz(0.05, -1e-3, 2e-3, 0.0)
    ref = quad(lambda z: MU0 * 0.05**2 / (2 * (0.05**2 + z**2) ** 1.5), -1e-3, 2e-3)[0] / 3e-3
    assert val == pytest.approx(ref, rel=1e-12)


def test_radial_field_map_against_quadrature(small_spec):
    mesh = build_mesh(small_spec, 4)
    ks = assemble_kernels(mesh, use_cache=False)
    e_obs, e_src = 5, 13
    r_o = mesh.elem_r[e_obs]
    z0, z1 = mesh.elem_z0[e_obs], mesh.elem_z1[e_obs]
    z0s, z1s = mesh.elem_z0[e_src], mesh.elem_z1[e_src]
    def br(z):
        return quad(lambda zs: loop_field(mesh.elem_r[e_src], zs, np.array([r_o]), np.array([z]))[0][0],
                    z0s, z1s, limit=200)[0] / (z1s - z0s)
    ref = quad(br, z0, z1, limit=200)[0] / (z1 - z0)
    assert ks.Br_map[e_obs, e_src] == pytest.approx(ref, rel=1e-5)


def test_memory_cap_enforced(small_spec):
    with pytest.raises(KernelMemoryError):
        assemble_kernels(build_mesh(small_spec, 4), memory_cap=1000)


def test_cache_round_trip(tmp_path, small_spec, monkeypatch):
    mesh = build_mesh(small_spec, 3)
    ks = assemble_kernels(mesh, use_cache=False)
    write_kernel_cache(tmp_path / "k.bin", ks)
    back = read_kernel_cache(tmp_path / "k.bin", mesh.digest())
    for name in ("M", "A_node", "Br_map", "Bz_map", "Bz_center"):
        assert np.array_equal(getattr(ks, name), getattr(back, name))
    with pytest.raises(ValueError, match="hash"):
        read_kernel_cache(tmp_path / "k.bin", "0" * 64)
    monkeypatch.setenv("PCRTA_KERNEL_CACHE", str(tmp_path / "cache"))
    first = assemble_kernels(mesh)
    second = assemble_kernels(mesh)
    assert np.array_equal(first.M, second.M)
    assert len(list((tmp_path / "cache").iterdir())) == 1


def test_divergence_free_field(small_spec):
    mesh = build_mesh(small_spec, 4)
    I = np.ones(mesh.n_elements)
    r, z, d = 0.027, 0.004, 1e-6
    _, br_p, _ = field_at(mesh, I, np.array([r + d]), np.array([z]))
    _, br_m, _ = field_at(mesh, I, np.array([r - d]), np.array([z]))
    _, _, bz_p = field_at(mesh, I, np.array([r]), np.array([z + d]))
    _, _, bz_m = field_at(mesh, I, np.array([r]), np.array([z - d]))
    div = ((r + d) * br_p[0] - (r - d) * br_m[0]) / (2 * d * r) + (bz_p[0] - bz_m[0]) / (2 * d)
    _, br, bz = field_at(mesh, I, np.array([r]), np.array([z]))
    scale = math.hypot(br[0], bz[0]) / d
    assert abs(div) / scale < 1e-6


@pytest.mark.parametrize("m_target", [1e-7, 5e-4, 2e-3, 0.3])
def test_mutual_continuous_across_series_switch(m_target):
    import mpmath as mp
    r1, r2 = 0.05, 0.06
    # choose dz so that m = 4 r1 r2 / ((r1 + r2)^2 + dz^2) hits the target
    dz = math.sqrt(4 * r1 * r2 / m_target - (r1 + r2) ** 2)
    m = mp.mpf(4 * r1 * r2) / ((r1 + r2) ** 2 + mp.mpf(dz) ** 2)
    k = mp.sqrt(m)
    ref = float(4e-7 * mp.pi * mp.sqrt(r1 * r2) * ((2 / k - k) * mp.ellipk(m) - 2 / k * mp.ellipe(m)))
    assert loop_mutual(r1, 0.0, r2, dz) == pytest.approx(ref, rel=1e-8)
