"""P1 finite element assembly of the bulk forms and boundary pairings.

Conventions used throughout the package:

* bulk vectors are indexed by mesh vertices;
* a *boundary field* ``g`` holds values at ``mesh.boundary_vertices``
  (an H^{1/2} / L^2 representative);
* a *boundary dual* ``F`` holds coefficients against the boundary nodal
  basis, F_b = <F, phi_b> (an H^{-1/2} representative).  The two are linked
  by the boundary mass matrix: ``F = M @ g`` embeds L^2 into the dual side,
  ``dual_to_field`` inverts it.

Matrices are scipy CSR; assembly is deterministic (fixed element order,
fixed duplicate reduction), so identical inputs give bit-identical results.
"""

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .coeffs import preset_laplace_shift


class AssemblyError(RuntimeError):
    """Coefficient evaluation failed during assembly."""


def _quad_points(mesh):
    """Edge-midpoint quadrature points, shape (nt, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    return 0.5 * (p + np.roll(p, -1, axis=1))


def assemble_form(mesh, family, t):
    """Bulk matrix K(t) with K[p, q] = a_t(phi_q, phi_p), real CSR.

    Coefficients are sampled at the edge-midpoint quadrature points (exact
    for the mass part and, with constant a, for the stiffness part).
    """
    coords = mesh.vertices[mesh.triangles]
    areas, grads = _kernels.element_geometry(coords)
    qp = _quad_points(mesh).reshape(-1, 2)
    try:
        aq, bq, cq, dq = family.eval_all(t, qp)
    except Exception as exc:
        raise AssemblyError(
            f"coefficient evaluation failed at t={t} near point "
            f"{qp[0]}: {exc}") from exc
    nt = mesh.nt
    local = _kernels.element_matrices(
        areas, grads,
        np.asarray(aq, dtype=np.float64).reshape(nt, 3, 2, 2),
        np.asarray(bq, dtype=np.float64).reshape(nt, 3, 2),
        np.asarray(cq, dtype=np.float64).reshape(nt, 3, 2),
        np.asarray(dq, dtype=np.float64).reshape(nt, 3))

    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    K = sp.coo_matrix((local.ravel(), (rows, cols)),
                      shape=(mesh.nv, mesh.nv)).tocsr()
    K.sum_duplicates()
    return K


def assemble_boundary_mass(mesh):
    """Boundary mass M with M[p, q] = int_bdry phi_q phi_p ds, CSR of size
    n_boundary (indexed by position in mesh.boundary_vertices).

    Exact for P1 traces: an edge of length L contributes L/3 on the diagonal
    and L/6 off it (two-point Gauss on each edge reproduces this exactly).
    """
    lengths = mesh.boundary_edge_lengths()
    ii = mesh.boundary_pos[mesh.boundary_edges[:, 0]]
    jj = mesh.boundary_pos[mesh.boundary_edges[:, 1]]
    rows = np.concatenate([ii, jj, ii, jj])
    cols = np.concatenate([ii, jj, jj, ii])
    data = np.concatenate([lengths / 3.0, lengths / 3.0,
                           lengths / 6.0, lengths / 6.0])
    nb = mesh.n_boundary
    M = sp.coo_matrix((data, (rows, cols)), shape=(nb, nb)).tocsr()
    M.sum_duplicates()
    return M


def assemble_h1_gram(mesh):
    """H^1 Gram matrix: int grad u . grad v + u v  (= K of the reference
    family a = I, d = 1)."""
    return assemble_form(mesh, preset_laplace_shift(-1.0), 0.0)


def boundary_mass_bulk(mesh, M=None):
    """The boundary mass lifted to bulk size: T^t M T with T the trace
    selection.  Used to build the spectrally shifted forms."""
    if M is None:
        M = assemble_boundary_mass(mesh)
    Mc = M.tocoo()
    bv = mesh.boundary_vertices
    return sp.coo_matrix((Mc.data, (bv[Mc.row], bv[Mc.col])),
                         shape=(mesh.nv, mesh.nv)).tocsr()


def assemble_form_shifted(mesh, family, t, lam, M=None):
    """Matrix of the shifted form a_t(u, v) - lam (trace u, trace v)_bdry.

    Requires Re(lam) <= 0 (the sector where the shifted form stays
    coercive).  Returns a real matrix for real lam, complex otherwise.
    """
    lam = complex(lam)
    if lam.real > 0:
        raise ValueError("Re(lam) must be <= 0 (outside the resolvent sector)")
    K = assemble_form(mesh, family, t)
    B = boundary_mass_bulk(mesh, M)
    if lam.imag == 0.0:
        return (K - lam.real * B).tocsr()
    return (K.astype(np.complex128) - lam * B).tocsr()


def embed_k(mesh, F):
    """Bulk functional vector of the dual F: boundary entries F, rest 0.

    Realizes <k(F), v> = <F, trace(v)> for every bulk vector v.
    """
    F = np.asarray(F)
    out = np.zeros(mesh.nv, dtype=F.dtype)
    out[mesh.boundary_vertices] = F
    return out


def dual_to_field(M, F):
    """L^2 representative of a dual: solve M g = F."""
    import scipy.sparse.linalg as spla
    return spla.spsolve(M.tocsc(), F)


def dump_matrix_market(K, path):
    """Write a matrix in Matrix Market coordinate format."""
    from scipy.io import mmwrite
    mmwrite(str(path), K)
