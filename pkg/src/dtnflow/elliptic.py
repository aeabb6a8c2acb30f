"""Discrete elliptic solution maps: trace lift, Dirichlet and Neumann
solves, and the weak conormal derivative.

The Dirichlet solve eliminates the interior block exactly (no penalty), so
it matches the abstract construction: u = lift(g) minus the interior
correction.  The weak conormal derivative of a bulk vector u is the dual
with coefficients (K u) at boundary rows; for discretely harmonic u this is
the discrete conormal derivative, for general u it is a generalized one
(a warning is issued, not an error).
"""

import threading
import warnings

import numpy as np
import scipy.sparse.linalg as spla

from ._config import CG_MAXITER_FACTOR, CG_RTOL, RESIDUAL_TOL
from .assembly import embed_k


class SolverError(RuntimeError):
    """Linear solve failed or produced an unacceptable residual."""


def lift(mesh, g):
    """Extension by zero: boundary entries g, interior entries 0.

    trace(lift(g)) == g exactly (a right inverse of the trace).
    """
    g = np.asarray(g)
    out = np.zeros(mesh.nv, dtype=g.dtype)
    out[mesh.boundary_vertices] = g
    return out


def trace(mesh, u):
    """Boundary values of a bulk vector, in boundary-vertex order."""
    return np.asarray(u)[mesh.boundary_vertices]


class Factorization:
    """Cached sparse LU factors of a bulk matrix and of its interior block.

    Creation of each factor is lazy and serialized with a lock so immutable
    operators can be shared across concurrent sweeps.
    """

    def __init__(self, mesh, K):
        self.mesh = mesh
        self.K = K.tocsr()
        self._lock = threading.Lock()
        self._lu_full = None
        self._lu_interior = None
        self._K_ib = None
        self._norm = None

    @property
    def matrix_norm(self):
        if self._norm is None:
            self._norm = spla.norm(self.K, np.inf)
        return self._norm

    def lu_full(self):
        with self._lock:
            if self._lu_full is None:
                try:
                    self._lu_full = spla.splu(self.K.tocsc())
                except RuntimeError as exc:
                    raise SolverError(f"bulk factorization failed: {exc}") from exc
            return self._lu_full

    def lu_interior(self):
        with self._lock:
            if self._lu_interior is None:
                idx = self.mesh.interior_vertices
                bdx = self.mesh.boundary_vertices
                Kii = self.K[np.ix_(idx, idx)].tocsc()
                self._K_ib = self.K[np.ix_(idx, bdx)].tocsr()
                try:
                    self._lu_interior = spla.splu(Kii)
                except RuntimeError as exc:
                    raise SolverError(
                        "interior block factorization failed (is the family "
                        f"coercive?): {exc}") from exc
            return self._lu_interior, self._K_ib


def solve_dirichlet(mesh, K, g, factors=None, method="direct"):
    """Bulk vector with trace g and zero residual at interior rows.

    method="cg" runs conjugate gradients on the (SPD) interior block with
    relative tolerance 1e-12; the default is a sparse direct factorization.
    """
    g = np.asarray(g)
    if factors is None:
        factors = Factorization(mesh, K)
    u = np.zeros(mesh.nv, dtype=np.promote_types(g.dtype, K.dtype))
    u[mesh.boundary_vertices] = g
    if len(mesh.interior_vertices):
        lu, K_ib = factors.lu_interior()
        rhs = -K_ib @ g
        if method == "cg":
            idx = mesh.interior_vertices
            Kii = factors.K[np.ix_(idx, idx)]
            n = Kii.shape[0]
            ui, info = spla.cg(Kii, rhs, rtol=CG_RTOL,
                               maxiter=int(CG_MAXITER_FACTOR * np.sqrt(n)))
            if info != 0:
                raise SolverError(f"CG did not converge (info={info})")
        elif method == "direct":
            ui = lu.solve(rhs)
        else:
            raise ValueError(f"unknown method {method!r}")
        u[mesh.interior_vertices] = ui

    res = np.abs((K @ u)[mesh.interior_vertices])
    scale = factors.matrix_norm * max(np.linalg.norm(u, np.inf), 1e-300)
    if res.size and res.max() > RESIDUAL_TOL * scale:
        raise SolverError(
            f"interior residual {res.max():.3e} exceeds {RESIDUAL_TOL:.0e} "
            "* |K| * |u|; check the coercivity of the family")
    return u


def solve_neumann(mesh, K, F, factors=None):
    """Bulk vector u with K u = embed_k(F), relative residual <= 1e-10."""
    if factors is None:
        factors = Factorization(mesh, K)
    rhs = embed_k(mesh, np.asarray(F, dtype=np.promote_types(
        np.asarray(F).dtype, K.dtype)))
    u = factors.lu_full().solve(rhs)
    rnorm = np.linalg.norm(K @ u - rhs)
    scale = max(np.linalg.norm(rhs), factors.matrix_norm
                * np.linalg.norm(u), 1e-300)
    if rnorm > RESIDUAL_TOL * scale:
        raise SolverError(f"Neumann solve residual {rnorm:.3e} too large")
    return u


def weak_conormal(mesh, K, u, warn_nonharmonic=True):
    """Dual coefficients of the weak conormal derivative: (K u) at boundary
    rows.

    For u with nonzero interior residual this returns the generalized
    conormal (the formula is still well defined); a warning points this out.
    """
    r = K @ u
    if warn_nonharmonic and len(mesh.interior_vertices):
        inner = np.abs(r[mesh.interior_vertices]).max()
        scale = max(np.abs(r).max(), 1e-300)
        if inner > 1e-8 * scale:
            warnings.warn(
                "weak_conormal called on a vector that is not discretely "
                "harmonic; returning the generalized conormal",
                stacklevel=2)
    return r[mesh.boundary_vertices]
