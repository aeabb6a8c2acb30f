import dataclasses
import math

import numpy as np
import pytest

from dtnflow import assembly, coeffs, evolution, mesh as msh, motion
from dtnflow.coeffs import TIME_INF


@pytest.fixture(scope="module")
def disk():
    return msh.generate_disk_mesh(1.0, 0.2)


SAMPLE_PTS = np.array([[0.0, 0.0], [0.3, 0.1], [0.0, 0.6], [-0.7, 0.1],
                       [0.6, -0.6], [1.0, 0.0], [0.0, -1.0]])
BOUNDARY_PTS = np.column_stack([np.cos(np.linspace(0, 2 * np.pi, 9)),
                                np.sin(np.linspace(0, 2 * np.pi, 9))])


def test_identity_normal_extension_is_one_exactly():
    m = motion.identity_motion()
    np.testing.assert_array_equal(motion.normal_extension_N(m, 0.7, SAMPLE_PTS),
                                  np.ones(len(SAMPLE_PTS)))


def test_identity_generic_normal_extension_near_one():
    # drop the closed form: the generic formula must still give N ~ 1
    m = dataclasses.replace(motion.identity_motion(), N_closed=None)
    N = motion.normal_extension_N(m, 0.0, SAMPLE_PTS)
    np.testing.assert_allclose(N, 1.0, atol=1e-14)


def test_dilation_normal_extension_on_boundary():
    m = motion.dilation_exp(amp=0.1, decay=1.0)
    for t in (0.0, 1.0, 3.0):
        rho = 1.0 + 0.1 * math.exp(-t)
        N = motion.normal_extension_N(m, t, BOUNDARY_PTS)
        np.testing.assert_allclose(N, rho, rtol=1e-12)
        generic = dataclasses.replace(m, N_closed=None)
        np.testing.assert_allclose(
            motion.normal_extension_N(generic, t, BOUNDARY_PTS), N, rtol=1e-12)


def test_dilation_normal_extension_relaxes():
    m = motion.dilation_exp(amp=0.1, decay=1.0)
    devs = [np.max(np.abs(motion.normal_extension_N(m, t, SAMPLE_PTS) - 1.0))
            for t in (0.0, 2.0, 6.0, 12.0)]
    assert all(b < a for a, b in zip(devs, devs[1:]))
    assert devs[-1] < 1e-5
    np.testing.assert_array_equal(
        motion.normal_extension_N(m, TIME_INF, SAMPLE_PTS), 1.0)


def test_normal_extension_positive():
    for m in (motion.identity_motion(), motion.dilation_exp(),
              motion.collar_oscillating()):
        for t in (3.0, 7.0):
            assert np.all(motion.normal_extension_N(m, t, SAMPLE_PTS) > 0)


def test_transformed_identity_equals_reference_bitwise(disk):
    ref = coeffs.preset_laplace_shift(-1.0)
    fam = motion.transformed_family(motion.identity_motion(), -1.0)
    for t in (0.0, 1.7, TIME_INF):
        for ft, fr in zip(fam.eval_all(t, SAMPLE_PTS),
                          ref.eval_all(t, SAMPLE_PTS)):
            np.testing.assert_array_equal(ft, fr)
    K1 = assembly.assemble_form(disk, fam, 0.3)
    K2 = assembly.assemble_form(disk, ref, 0.3)
    assert (K1 != K2).nnz == 0
    np.testing.assert_array_equal(K1.data, K2.data)


def test_transformed_constant_dilation_symbolic():
    # rho constant: c = 0, G = rho^-1 I, so a = rho^-2 N delta_kl
    rho0 = 2.0
    m = motion.radial_dilation(lambda t: rho0, lambda t: 0.0)
    fam = motion.transformed_family(m, -1.0)
    a = fam.a(0.5, SAMPLE_PTS)
    N = motion.normal_extension_N(m, 0.5, SAMPLE_PTS)
    expect = np.einsum("n,kl->nkl", N / rho0 ** 2, np.eye(2))
    np.testing.assert_allclose(a, expect, rtol=1e-13)
    d = fam.d(0.5, SAMPLE_PTS)
    np.testing.assert_allclose(d, N, rtol=1e-13)


def test_transformed_family_relaxes_to_reference_matrix(disk):
    fam = motion.transformed_family(motion.dilation_exp(0.1, 1.0), -1.0)
    K_inf = assembly.assemble_form(disk, coeffs.preset_laplace_shift(-1.0),
                                   0.0)
    devs = []
    for t in (0.0, 2.0, 5.0, 10.0):
        K = assembly.assemble_form(disk, fam, t)
        devs.append(abs(K - K_inf).max())
    assert all(b < a for a, b in zip(devs, devs[1:]))
    assert devs[-1] < 1e-3
    K = assembly.assemble_form(disk, fam, TIME_INF)
    assert (K != K_inf).nnz == 0


def test_divergence_field_closed_vs_finite_difference():
    m = motion.dilation_exp(amp=0.1, decay=1.0)
    generic = dataclasses.replace(m, N_closed=None, div_GN_closed=None)
    pts = SAMPLE_PTS[np.hypot(SAMPLE_PTS[:, 0], SAMPLE_PTS[:, 1]) < 0.99]
    for t in (0.0, 1.0):
        closed = motion._div_GN(m, t, pts)
        fd = motion._div_GN(generic, t, pts)
        np.testing.assert_allclose(fd, closed, atol=1e-7)


def test_strong_conormal_linear_function(disk):
    m = motion.identity_motion()
    v = disk.vertices[:, 0]  # x_1
    got = motion.strong_conormal_eval(m, 0.0, disk, v)
    nu = motion.disk_normal_field(disk.vertices[disk.boundary_vertices])
    np.testing.assert_allclose(got, nu[:, 0], atol=1e-10)


def test_strong_conormal_constant_is_zero(disk):
    m = motion.dilation_exp()
    v = np.full(disk.nv, 3.7)
    assert np.max(np.abs(motion.strong_conormal_eval(m, 1.0, disk, v))) <= 1e-12


def test_strong_vs_weak_conormal_refinement():
    # for discretely harmonic v the pointwise conormal converges to the
    # weak one in boundary L2 at first order
    from dtnflow.dtn import DtnOperator
    m = motion.dilation_exp(0.1, 1.0)
    fam = motion.transformed_family(m, -1.0)
    errs = []
    for h in (0.4, 0.2, 0.1):
        mesh = msh.generate_disk_mesh(1.0, h)
        op = DtnOperator(mesh, fam, 0.5)
        th = np.arctan2(*mesh.vertices[mesh.boundary_vertices][:, ::-1].T)
        g = np.cos(th)
        from dtnflow.elliptic import solve_dirichlet
        v = solve_dirichlet(mesh, op.K, g, factors=op.factors)
        weak_vals = assembly.dual_to_field(op.M, op.apply(g))
        strong_vals = motion.strong_conormal_eval(m, 0.5, mesh, v)
        diff = weak_vals - strong_vals
        errs.append(np.sqrt(diff @ (op.M @ diff)))
    assert errs[-1] < errs[0]
    assert errs[2] <= 0.75 * errs[1]


def test_pullback_identity(disk):
    m = motion.identity_motion()
    M = assembly.assemble_boundary_mass(disk)

    def f(pts):
        return pts[:, 0] + 2.0 * pts[:, 1]

    got = motion.pullback_boundary_data(m, 0.0, disk, f, M=M)
    pts = disk.vertices[disk.boundary_vertices]
    np.testing.assert_array_equal(got, M @ f(pts))


def test_pullback_constant_motion_invariant(disk):
    M = assembly.assemble_boundary_mass(disk)
    ones = M @ np.ones(disk.n_boundary)
    for m in (motion.identity_motion(), motion.dilation_exp(0.1, 1.0)):
        got = motion.pullback_boundary_data(
            m, 0.3, disk, lambda p: np.ones(len(p)), M=M)
        np.testing.assert_allclose(got, ones, rtol=1e-14)


def test_pullback_dilation_squared_radius(disk):
    m = motion.radial_dilation(lambda t: 2.0, lambda t: 0.0)
    mapped = m.h(1.0, disk.vertices[disk.boundary_vertices])
    vals = mapped[:, 0] ** 2 + mapped[:, 1] ** 2
    np.testing.assert_allclose(vals, 4.0, rtol=1e-12)


def test_pushforward_positions(disk):
    m = motion.dilation_exp(0.1, 1.0)
    v = np.arange(disk.nv, dtype=float)
    pos, vals = motion.pushforward_field(m, 0.0, disk, v)
    np.testing.assert_allclose(pos, 1.1 * disk.vertices, rtol=1e-14)
    np.testing.assert_array_equal(vals, v)


def test_verify_identity_motion():
    rep = motion.verify_motion_assumptions(motion.identity_motion(),
                                           [0.0, 1.0, 5.0])
    assert rep["passed"]
    assert rep["max_jac_deviation"] == 0.0
    assert rep["normal_speed_residual"] == 0.0
    assert rep["holder_h"] == 0.0


def test_verify_dilation_motion():
    m = motion.dilation_exp(0.1, 1.0)
    rep = motion.verify_motion_assumptions(m, [0.0, 0.5, 1.0, 2.0])
    assert rep["passed"]
    assert rep["normal_speed_residual"] <= 1e-10
    assert rep["max_c"] == pytest.approx(0.1, rel=1e-12)


def test_verify_rejects_spatially_varying_normal_speed():
    bad = dataclasses.replace(
        motion.dilation_exp(0.1, 1.0),
        dh_dt=lambda t, pts: np.column_stack(
            [np.atleast_2d(pts)[:, 0] ** 3, np.atleast_2d(pts)[:, 1]]))
    rep = motion.verify_motion_assumptions(bad, [0.0, 1.0])
    assert not rep["normal_speed_ok"]
    assert not rep["passed"]


def test_collar_oscillating_velocity_decays():
    m = motion.collar_oscillating(eps=0.02, beta=2.0, alpha_exp=1.25)
    early = max(np.max(np.abs(m.dh_dt(t, BOUNDARY_PTS)))
                for t in np.linspace(2.0, 4.0, 9))
    late = max(np.max(np.abs(m.dh_dt(t, BOUNDARY_PTS)))
               for t in np.linspace(40.0, 60.0, 9))
    assert late < 0.2 * early
    rep = motion.verify_motion_assumptions(m, [2.0, 3.0, 5.0, 9.0])
    assert rep["passed"]


def test_collar_admissibility_window():
    with pytest.raises(ValueError):
        motion.collar_oscillating(eps=0.02, beta=0.1, alpha_exp=2.0)


def test_theorem_equivalence_identity_motion_bit_for_bit(disk):
    # evolving the pulled-back problem under the trivial motion must equal
    # the plain cylindrical evolution exactly
    ref = coeffs.preset_laplace_shift(-1.0)
    fam = motion.transformed_family(motion.identity_motion(), -1.0)
    x, y = disk.vertices[disk.boundary_vertices].T
    u0 = np.cos(np.arctan2(y, x))
    M = assembly.assemble_boundary_mass(disk)
    F = M @ np.ones(disk.n_boundary)

    runs = []
    for family in (ref, fam):
        runs.append(evolution.run_evolution(
            disk, family, 0.0, 0.5, 0.05, u0, forcing=lambda t: F,
            u_inf=np.zeros(disk.n_boundary)))
    np.testing.assert_array_equal(runs[0].states, runs[1].states)
    np.testing.assert_array_equal(runs[0].h1_bulk, runs[1].h1_bulk)
    np.testing.assert_array_equal(runs[0].dist_h1, runs[1].dist_h1)


def test_singular_jacobian_raises():
    m = dataclasses.replace(
        motion.identity_motion(),
        jac=lambda t, pts: np.zeros((len(np.atleast_2d(pts)), 2, 2)),
        N_closed=None, div_GN_closed=None)
    with pytest.raises(motion.GeometryError):
        motion.normal_extension_N(m, 0.0, SAMPLE_PTS)
