"""Element-matrix kernels: numba-jitted loop with a pure-numpy fallback.

The active path is chosen once at import time: numba unless it is
unavailable or ``DTNFLOW_PURE_NUMPY=1`` is set.  Both paths are
deterministic; they agree to rounding (not bit-for-bit, since the summation
order differs), so a fixed configuration always reproduces itself exactly.
"""

import numpy as np

from ._config import PURE_NUMPY

# P1 shape function values at the edge-midpoint quadrature points
# rows: midpoints of edges (0,1), (1,2), (2,0); columns: vertices
_S = np.array([[0.5, 0.5, 0.0],
               [0.0, 0.5, 0.5],
               [0.5, 0.0, 0.5]])


def element_geometry(coords):
    """Areas and constant P1 gradients for a batch of triangles.

    coords: (nt, 3, 2) vertex coordinates.  Returns (areas (nt,),
    grads (nt, 3, 2)) with grads[e, p] = grad lambda_p on element e.
    """
    x = coords[:, :, 0]
    y = coords[:, :, 1]
    det = ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
           - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    areas = 0.5 * det
    grads = np.empty((len(coords), 3, 2))
    for p in range(3):
        q, r = (p + 1) % 3, (p + 2) % 3
        grads[:, p, 0] = (y[:, q] - y[:, r]) / det
        grads[:, p, 1] = (x[:, r] - x[:, q]) / det
    return areas, grads


def _element_matrices_numpy(areas, grads, aq, bq, cq, dq):
    w = areas / 3.0
    aw = aq * w[:, None, None, None]
    out = np.einsum("tpi,tmij,tqj->tpq", grads, aw, grads)
    out += np.einsum("tmj,tqj,mp,t->tpq", bq, grads, _S, w)
    out += np.einsum("tmj,tpj,mq,t->tpq", cq, grads, _S, w)
    out += np.einsum("tm,mp,mq,t->tpq", dq, _S, _S, w)
    return out


def _element_matrices_loop(areas, grads, aq, bq, cq, dq, S):
    nt = areas.shape[0]
    out = np.zeros((nt, 3, 3))
    for e in range(nt):
        w = areas[e] / 3.0
        for m in range(3):
            am = aq[e, m]
            bm = bq[e, m]
            cm = cq[e, m]
            dm = dq[e, m]
            for p in range(3):
                gp0 = grads[e, p, 0]
                gp1 = grads[e, p, 1]
                sp = S[m, p]
                for q in range(3):
                    gq0 = grads[e, q, 0]
                    gq1 = grads[e, q, 1]
                    sq = S[m, q]
                    diff = (gp0 * (am[0, 0] * gq0 + am[0, 1] * gq1)
                            + gp1 * (am[1, 0] * gq0 + am[1, 1] * gq1))
                    conv = (bm[0] * gq0 + bm[1] * gq1) * sp
                    conv += (cm[0] * gp0 + cm[1] * gp1) * sq
                    out[e, p, q] += w * (diff + conv + dm * sp * sq)
    return out


if PURE_NUMPY:
    USING_NUMBA = False
else:
    try:
        import numba

        _element_matrices_jit = numba.njit(cache=True)(_element_matrices_loop)
        USING_NUMBA = True
    except ImportError:
        USING_NUMBA = False


def element_matrices(areas, grads, aq, bq, cq, dq):
    """Local 3x3 form matrices for every element (edge-midpoint rule).

    aq (nt,3,2,2), bq/cq (nt,3,2), dq (nt,3) are coefficient samples at the
    three quadrature points.  Entry [p, q] pairs test function p with trial
    function q.
    """
    if USING_NUMBA:
        return _element_matrices_jit(areas, grads,
                                     np.ascontiguousarray(aq),
                                     np.ascontiguousarray(bq),
                                     np.ascontiguousarray(cq),
                                     np.ascontiguousarray(dq), _S)
    return _element_matrices_numpy(areas, grads, aq, bq, cq, dq)
