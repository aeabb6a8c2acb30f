import numpy as np
import pytest
import scipy.linalg as la

from dtnflow import assembly, coeffs, mesh as msh, oracle
from dtnflow.coeffs import TIME_INF
from dtnflow.dtn import DtnOperator, SizeCapError, UnsupportedMethodError

HEXAGON = """mesh2d 7 6 6
v 0.0 0.0
v 1.0 0.0
v 0.5 0.8660254037844386
v -0.5 0.8660254037844386
v -1.0 0.0
v -0.5 -0.8660254037844386
v 0.5 -0.8660254037844386
t 0 1 2
t 0 2 3
t 0 3 4
t 0 4 5
t 0 5 6
t 0 6 1
b 1 2 0
b 2 3 0
b 3 4 0
b 4 5 0
b 5 6 0
b 6 1 0
"""


@pytest.fixture(scope="module")
def disk():
    return msh.generate_disk_mesh(1.0, 0.1)


@pytest.fixture(scope="module")
def op(disk):
    return DtnOperator(disk, coeffs.preset_laplace_shift(-1.0), 0.0)


@pytest.fixture(scope="module")
def op_drift(disk):
    return DtnOperator(disk, coeffs.preset_constant_drift(-1.0), 0.0)


def boundary_angles(mesh):
    x, y = mesh.vertices[mesh.boundary_vertices].T
    return np.arctan2(y, x)


def test_apply_zero(op):
    assert not op.apply(np.zeros(op.mesh.n_boundary)).any()


def test_apply_matches_bessel_modes():
    mesh = msh.generate_disk_mesh(1.0, 0.05)
    op = DtnOperator(mesh, coeffs.preset_laplace_shift(-1.0), 0.0)
    th = boundary_angles(mesh)
    M = op.M
    for k in (0, 1, 2):
        g = np.cos(k * th)
        vals = assembly.dual_to_field(M, op.apply(g))
        mu = oracle.disk_dtn_eigenvalue(-1.0, k)
        err = np.linalg.norm(vals - mu * g) / np.linalg.norm(mu * g)
        assert err <= 0.02


def test_matrix_matches_dense_schur_oracle():
    mesh = msh.load_mesh(HEXAGON)
    op = DtnOperator(mesh, coeffs.preset_laplace_shift(-1.0), 0.0)
    S = oracle.dense_schur_dtn(op.K, mesh.boundary_vertices)
    A = op.matrix()
    assert np.max(np.abs(A - S)) <= 1e-12 * np.max(np.abs(S))


def test_matrix_matches_columnwise_apply(op):
    A = op.matrix()
    nb = op.mesh.n_boundary
    for b in (0, nb // 3, nb - 1):
        e = np.zeros(nb)
        e[b] = 1.0
        np.testing.assert_allclose(A[:, b], op.apply(e), atol=1e-11)


def test_matrix_symmetric_and_positive(op):
    A = op.matrix()
    assert np.max(np.abs(A - A.T)) <= 1e-12 * np.max(np.abs(A))
    w, _ = op.eig()
    assert w.min() > 0


def test_matrix_size_cap(disk):
    op2 = DtnOperator(disk, coeffs.preset_laplace_shift(-1.0), 0.0)
    import dtnflow.dtn as dtn_mod
    old = dtn_mod.DENSE_BOUNDARY_CAP
    dtn_mod.DENSE_BOUNDARY_CAP = 8
    try:
        with pytest.raises(SizeCapError, match="apply-mode"):
            op2.matrix()
    finally:
        dtn_mod.DENSE_BOUNDARY_CAP = old


def test_inverse_roundtrip(op):
    rng = np.random.default_rng(10)
    for _ in range(5):
        F = rng.standard_normal(op.mesh.n_boundary)
        back = op.apply(op.inverse_apply(F))
        assert np.linalg.norm(back - F) <= 1e-10 * np.linalg.norm(F)
    assert not op.inverse_apply(np.zeros(op.mesh.n_boundary)).any()


def test_inverse_mode1(op):
    th = boundary_angles(op.mesh)
    g = np.cos(th)
    got = op.inverse_apply(op.M @ g)
    mu1 = oracle.disk_dtn_eigenvalue(-1.0, 1)
    err = np.linalg.norm(got - g / mu1) / np.linalg.norm(g / mu1)
    assert err <= 0.02


def test_resolvent_zero_equals_inverse(op):
    rng = np.random.default_rng(11)
    F = rng.standard_normal(op.mesh.n_boundary)
    y0 = op.resolvent_apply(0.0, F)
    np.testing.assert_allclose(np.real(y0), op.inverse_apply(F), atol=1e-11)
    assert np.max(np.abs(np.imag(y0))) == 0.0


def test_resolvent_residual_on_imaginary_axis(op):
    rng = np.random.default_rng(12)
    F = rng.standard_normal(op.mesh.n_boundary)
    A = op.matrix()
    M = op.mass_dense()
    for lam in (1j, -2.0 + 5j, -100.0, 0.3j):
        y = op.resolvent_apply(lam, F)
        res = A @ y - lam * (M @ y) - F
        assert np.linalg.norm(res) <= 1e-9 * np.linalg.norm(F)


def test_resolvent_rejects_right_half_plane(op):
    with pytest.raises(ValueError):
        op.resolvent_apply(0.1, np.zeros(op.mesh.n_boundary))


def test_resolvent_spectral_mapping(op):
    w, V = op.eig()
    M = op.mass_dense()
    k = 3
    phi = V[:, k]
    for s in (0.5, 10.0):
        y = op.resolvent_apply(-s, M @ phi)
        np.testing.assert_allclose(np.real(y), phi / (w[k] + s), atol=1e-9)


def test_adjoint_symmetric_family_is_identity(op):
    A = op.matrix()
    Aadj = op.adjoint().matrix()
    np.testing.assert_allclose(Aadj, A, atol=1e-12 * np.max(np.abs(A)))


def test_adjoint_transpose_identity(op_drift):
    A = op_drift.matrix()
    Aadj = op_drift.adjoint().matrix()
    np.testing.assert_allclose(Aadj, A.T, atol=1e-11 * np.max(np.abs(A)))
    rng = np.random.default_rng(13)
    g = rng.standard_normal(op_drift.mesh.n_boundary)
    h = rng.standard_normal(op_drift.mesh.n_boundary)
    assert op_drift.apply(g) @ h == pytest.approx(op_drift.adjoint().apply(h) @ g,
                                                  rel=1e-9)


def test_adjoint_spectrum_coincides(op_drift):
    A = op_drift.matrix()
    assert np.max(np.abs(A - A.T)) > 1e-6 * np.max(np.abs(A))
    wa = np.sort_complex(la.eigvals(A))
    wb = np.sort_complex(la.eigvals(op_drift.adjoint().matrix()))
    np.testing.assert_allclose(wa, wb, atol=1e-8 * np.max(np.abs(wa)))


def test_fractional_composition_is_inverse(op):
    rng = np.random.default_rng(14)
    F = rng.standard_normal(op.mesh.n_boundary)
    half = op.fractional_power_apply(0.5, F)
    full = op.fractional_power_apply(0.5, op.M @ half)
    ref = op.inverse_apply(F)
    assert np.linalg.norm(full - ref) <= 1e-6 * np.linalg.norm(ref)


def test_fractional_methods_agree(op):
    rng = np.random.default_rng(15)
    F = rng.standard_normal(op.mesh.n_boundary)
    for theta in (0.25, 0.5, 0.75):
        b = op.fractional_power_apply(theta, F, method="balakrishnan")
        s = op.fractional_power_apply(theta, F, method="spectral")
        assert np.linalg.norm(b - s) <= 1e-6 * np.linalg.norm(s)


def test_fractional_eigenvector_scaling(op):
    w, V = op.eig()
    k = 2
    phi = V[:, k]
    for theta in (0.3, 0.7):
        y = op.fractional_power_apply(theta, op.M @ phi, method="spectral")
        np.testing.assert_allclose(y, w[k] ** (-theta) * phi, atol=1e-10)


def test_spectral_rejected_on_nonsymmetric(op_drift):
    with pytest.raises(UnsupportedMethodError):
        op_drift.fractional_power_apply(
            0.5, np.zeros(op_drift.mesh.n_boundary), method="spectral")


def test_fractional_theta_validated(op):
    with pytest.raises(ValueError):
        op.fractional_power_apply(0.0, np.zeros(op.mesh.n_boundary))
    with pytest.raises(ValueError):
        op.fractional_power_apply(1.0, np.zeros(op.mesh.n_boundary))


def test_schur_equivalence_on_every_test_mesh():
    for mesh in (msh.load_mesh(HEXAGON), msh.generate_square_mesh(1.0, 2),
                 msh.generate_disk_mesh(1.0, 0.45)):
        for fam in (coeffs.preset_laplace_shift(-1.0),
                    coeffs.preset_constant_drift(-1.0)):
            op = DtnOperator(mesh, fam, 0.0)
            S = oracle.dense_schur_dtn(op.K, mesh.boundary_vertices)
            assert np.max(np.abs(op.matrix() - S)) <= 1e-12 * np.max(np.abs(S))


def test_operator_at_infinity(disk):
    fam = coeffs.preset_oscillating(-1.0, 0.4, 1.0)
    opi = DtnOperator(disk, fam, TIME_INF)
    ref = DtnOperator(disk, coeffs.preset_laplace_shift(-1.0), 0.0)
    np.testing.assert_array_equal(opi.matrix(), ref.matrix())
