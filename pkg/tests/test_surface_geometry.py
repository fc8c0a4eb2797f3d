import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import eigh

from curvstab import curvature_algebra as ca
from curvstab import radial_field as rf
from curvstab import sphere_grid as sg
from curvstab import surface_geometry as sgeo
from curvstab.harmonics import harmonic_field, random_band_limited


def test_unit_sphere_anchors(grid3):
    geom = sgeo.assemble_grid(rf.RadialField(3, []), grid3)
    assert np.max(np.abs(geom.g - grid3.sigma)) == 0.0
    assert np.max(np.abs(geom.A - grid3.sigma)) == 0.0
    assert np.max(np.abs(geom.H - 3.0)) < 1e-12
    assert np.max(np.abs(geom.R - 6.0)) < 1e-12
    assert np.max(np.abs(geom.ric0)) < 1e-12
    assert np.max(geom.weyl_gnorm()) < 1e-10
    riem_sq = ca.norm4_squared(geom.riemann(), geom.g_inv)
    assert np.max(np.abs(riem_sq - 2 * 3 * 2)) < 1e-9


def test_radius_two_sphere(grid3):
    geom = sgeo.assemble_grid(rf.RadialField(3, [], const_shift=math.log(2)),
                              grid3)
    assert_allclose(geom.g, 4.0 * grid3.sigma, atol=1e-12)
    assert_allclose(geom.A, 2.0 * grid3.sigma, atol=1e-12)
    assert np.max(np.abs(geom.H - 1.5)) < 1e-12
    assert np.max(np.abs(geom.R - 1.5)) < 1e-12


def test_scaling_under_constant_shift(grid3):
    rng = np.random.default_rng(0)
    field = random_band_limited(3, [2, 3], rng, amplitude=0.1)
    c = 0.37
    g0 = sgeo.assemble_grid(field, grid3)
    g1 = sgeo.assemble_grid(rf.shift_constant(field, c), grid3)
    assert_allclose(g1.H, math.exp(-c) * g0.H, rtol=1e-10)
    assert_allclose(g1.R, math.exp(-2 * c) * g0.R, rtol=1e-10)
    v0 = sg.integrate(g0.vol_density, grid3)
    v1 = sg.integrate(g1.vol_density, grid3)
    assert_allclose(v1, math.exp(3 * c) * v0, rtol=1e-10)


@pytest.mark.parametrize("n,seed", [(3, 1), (3, 2), (4, 3)])
def test_ricci_two_paths_agree(n, seed, grid3, grid4):
    grid = grid3 if n == 3 else grid4
    rng = np.random.default_rng(seed)
    field = random_band_limited(n, [2, 3, 4], rng, amplitude=0.1)
    geom = sgeo.assemble_grid(field, grid)
    ric_from_trace = ca.ricci_contraction(geom.riemann(), geom.g_inv)
    assert np.max(np.abs(ric_from_trace - geom.ric)) < 1e-9


def test_metric_inverse_closed_form(grid3):
    rng = np.random.default_rng(7)
    field = random_band_limited(3, [2, 4], rng, amplitude=0.2)
    geom = sgeo.assemble_grid(field, grid3)
    assert np.max(np.abs(geom.g_inv - np.linalg.inv(geom.g))) < 1e-10
    trace = np.einsum("mij,mij->m", geom.g_inv, geom.ric0)
    assert np.max(np.abs(trace)) < 1e-10


def test_normal_field(grid3):
    rng = np.random.default_rng(8)
    field = random_band_limited(3, [2, 3], rng, amplitude=0.15)
    geom = sgeo.assemble_grid(field, grid3)
    jets = rf.eval_field_jets(field, grid3, order=2)
    assert np.max(np.abs(np.einsum("ma,ma->m", geom.normal, geom.normal) - 1)) \
        < 1e-12
    # tangent frame of the graph: d_i psi = e^f (f_i x + J_i)
    e_f = np.exp(jets.f)
    tangent = e_f[:, None, None] * (
        np.einsum("mi,ma->mai", jets.grad, grid3.ambient) + grid3.jacobian)
    dots = np.einsum("ma,mai->mi", geom.normal, tangent)
    assert np.max(np.abs(dots)) < 1e-10


def test_single_point_assemble_symmetries():
    field = harmonic_field(3, 3, 1, amplitude=0.2)
    pt = sg.build_chart_point(np.array([1.3, 0.9, 2.5]))
    geom = sgeo.assemble(rf.eval_jet(field, pt))
    riem = ca.Tensor4(3, geom.riem)
    assert riem.riemann_symmetry_residual() < 1e-10
    assert riem.bianchi_cyclic_residual() < 1e-10
    assert_allclose(geom.shape, geom.g_inv @ geom.A, atol=1e-12)
    assert abs(geom.H - np.trace(geom.shape)) < 1e-10
    assert abs(np.einsum("ij,ij->", geom.g_inv, geom.ric0)) < 1e-10
    assert np.max(np.abs(geom.weyl)) < 1e-8


def test_mixed_shape_closed_form(grid3):
    # the displayed mixed second fundamental form agrees with g^{-1} A
    rng = np.random.default_rng(12)
    field = random_band_limited(3, [2, 3], rng, amplitude=0.2)
    assert sgeo.shape_closed_form_residual(field, grid3) < 1e-10


def test_mean_curvature_divergence_form(grid3):
    rng = np.random.default_rng(13)
    field = random_band_limited(3, [2, 4], rng, amplitude=0.2)
    geom = sgeo.assemble_grid(field, grid3)
    h_div = sgeo.mean_curvature_divergence_form(field, grid3)
    assert np.max(np.abs(h_div - geom.H)) < 1e-10


def test_rigidity_only_flat_field_is_umbilic(grid3):
    geom0 = sgeo.assemble_grid(rf.RadialField(3, []), grid3)
    assert np.max(np.abs(geom0.A - geom0.g)) < 1e-10
    for degree in range(1, 7):
        field = harmonic_field(3, degree, 0, amplitude=0.1)
        geom = sgeo.assemble_grid(field, grid3)
        assert np.max(np.abs(geom.A - geom.g)) > 1e-4


def test_admissibility_unit_sphere(grid3):
    field = rf.RadialField(3, [])
    geom = sgeo.assemble_grid(field, grid3)
    adm = sgeo.admissibility(geom, field, grid3)
    assert_allclose(adm["volume"], 2 * math.pi ** 2, rtol=1e-12)
    assert_allclose(adm["a_inf_norm"], math.sqrt(3.0), rtol=1e-12)
    assert adm["convexity_ok"]
    assert 1.9 < adm["diameter_estimate"] <= 2.0 + 1e-12


def test_admissibility_scaled_sphere(grid3):
    field = rf.RadialField(3, [], const_shift=math.log(2))
    geom = sgeo.assemble_grid(field, grid3)
    adm = sgeo.admissibility(geom, field, grid3)
    assert_allclose(adm["volume"], 8 * 2 * math.pi ** 2, rtol=1e-12)
    assert 3.8 < adm["diameter_estimate"] <= 4.0 + 1e-12


def test_convexity_matches_dense_eigen_oracle(grid3):
    field = rf.RadialField(3, [(0.5, (2, 0, 0, 0)), (-0.5, (0, 2, 0, 0))])
    geom = sgeo.assemble_grid(field, grid3)
    mins = sgeo.min_generalized_eigenvalue(geom.A, geom.g)
    idx = np.linspace(0, grid3.size - 1, 40).astype(int)
    for m in idx:
        oracle = eigh(geom.A[m], geom.g[m], eigvals_only=True)[0]
        assert abs(oracle - mins[m]) < 1e-9
    adm = sgeo.admissibility(geom, field, grid3)
    assert adm["convexity_ok"] == bool(np.min(mins) >= -1e-10)


def test_normalize_volume(grid3):
    n = 3
    target = 2 * math.pi ** 2
    # pure dilation: comes back to the unit sphere
    back = sgeo.normalize_volume(rf.RadialField(n, [], const_shift=math.log(2)),
                                 grid3)
    assert np.max(np.abs(back.values_at(grid3.ambient))) < 1e-10
    # already normalized: unchanged
    same = sgeo.normalize_volume(rf.RadialField(n, []), grid3)
    assert np.max(np.abs(same.values_at(grid3.ambient))) < 1e-12
    # mean of f after normalizing scales like eps^2
    means = []
    for eps in (0.1, 0.05):
        field = sgeo.normalize_volume(eps * harmonic_field(n, 2, 2), grid3)
        vol = sgeo.surface_volume(field, grid3)
        assert abs(vol - target) < 1e-10 * target
        means.append(abs(sg.integrate(field.values_at(grid3.ambient), grid3)))
    assert 3.5 < means[0] / means[1] < 4.5


def test_christoffel_fd_check():
    pt = sg.build_chart_point(np.array([1.0, 1.3, 0.4]))
    flat = rf.RadialField(3, [])
    assert sgeo.christoffel_fd_check(flat, pt, 1e-3) < 1e-8
    small = rf.linear_field(3, np.array([1e-2, 0, 0, 0]))
    assert sgeo.christoffel_fd_check(small, pt, 1e-3) < 1e-6
    rng = np.random.default_rng(3)
    field = random_band_limited(3, [2, 3], rng, amplitude=0.2)
    r1 = sgeo.christoffel_fd_check(field, pt, 1e-3)
    r2 = sgeo.christoffel_fd_check(field, pt, 5e-4)
    assert 3.6 < r1 / r2 < 4.4
    with pytest.raises(ValueError):
        bad = sg.build_chart_point(np.array([1e-3, 1.3, 0.4]))
        sgeo.christoffel_fd_check(field, bad, 1e-3)


def test_decomposition_pieces_are_orthogonal(grid4):
    rng = np.random.default_rng(20)
    field = random_band_limited(4, [2, 3], rng, amplitude=0.1)
    geom = sgeo.assemble_grid(field, grid4)
    n = 4
    sphere_part = (geom.R / (2 * n * (n - 1)))[:, None, None, None, None] \
        * ca.kn_components(geom.g, geom.g)
    traceless_part = ca.kn_components(geom.ric0, geom.g) / (n - 2)
    weyl = geom.weyl()
    assert np.max(np.abs(ca.inner4(sphere_part, traceless_part, geom.g_inv))) \
        < 1e-8
    assert np.max(np.abs(ca.inner4(sphere_part, weyl, geom.g_inv))) < 1e-8
    assert np.max(np.abs(ca.inner4(traceless_part, weyl, geom.g_inv))) < 1e-8
    trace = ca.ricci_contraction(weyl, geom.g_inv)
    assert np.max(np.abs(trace)) < 1e-8


def test_nonconvex_surface_still_reports(grid3):
    from curvstab.stability_lab import deficits
    field = rf.RadialField(3, [(0.8, (2, 0, 0, 0)), (-0.8, (0, 2, 0, 0))])
    report = deficits(field, grid3, 2.0)
    assert not report.convexity_ok
    assert math.isfinite(report.ric0_lp) and report.ric0_lp > 0
    assert math.isfinite(report.r_avg)


def test_overflowing_field_rejected(grid3):
    huge = rf.RadialField(3, [(500.0, (2, 0, 0, 0))])
    with pytest.raises((ValueError, ArithmeticError)):
        sgeo.assemble_grid(huge, grid3)
