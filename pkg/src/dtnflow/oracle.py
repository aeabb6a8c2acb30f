"""Independent analytic and brute-force references.

Modified Bessel functions by power series, the exact boundary-operator
spectrum of the shifted Laplacian on the unit disk, closed-form mode decay,
and a dense Schur complement.  Everything here is deliberately disjoint from
the finite element pipeline so it can serve as an oracle for it.
"""

from math import exp, sqrt

import numpy as np


def bessel_I(k, x):
    """Modified Bessel function I_k(x) by its power series.

    Series: sum_m (x/2)^(2m+k) / (m! (m+k)!), truncated once a term drops
    below 1e-16 of the partial sum.  Restricted to 0 <= x <= 30 where the
    series is comfortably convergent in double precision.
    """
    if k < 0 or int(k) != k:
        raise ValueError("order k must be a nonnegative integer")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x > 30:
        raise ValueError("x > 30 is outside the series regime")
    k = int(k)
    half = 0.5 * x
    # term for m = 0: (x/2)^k / k!
    term = 1.0
    for i in range(1, k + 1):
        term *= half / i
    total = term
    m = 1
    while True:
        term *= half * half / (m * (m + k))
        total += term
        if term <= 1e-16 * total:
            return total
        m += 1


def disk_dtn_eigenvalue(lam, k):
    """Boundary-operator eigenvalue mu_k on the unit disk for the bulk
    operator -Laplace + (-lam), lam < 0.

    mu_k = kappa I_k'(kappa) / I_k(kappa) with kappa = sqrt(-lam) and
    I_k' = I_{k-1} - (k/kappa) I_k  (I_{-1} = I_1).
    """
    if lam >= 0:
        raise ValueError("lam must be negative")
    kappa = sqrt(-lam)
    ik = bessel_I(k, kappa)
    ikm1 = bessel_I(1, kappa) if k == 0 else bessel_I(k - 1, kappa)
    dik = ikm1 - (k / kappa) * ik
    return kappa * dik / ik


def exact_mode_decay(lam, k, t):
    """exp(-mu_k t): the exact decay factor of mode k under du/dt + Au = 0."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return exp(-disk_dtn_eigenvalue(lam, k) * t)


def dense_schur_dtn(K, boundary_idx):
    """Brute-force boundary reduction K_bb - K_bi K_ii^{-1} K_ib, dense.

    K may be a dense array or any scipy sparse matrix; total size is capped
    because everything is done with dense factorizations.
    """
    K = np.asarray(K.toarray() if hasattr(K, "toarray") else K)
    n = K.shape[0]
    if n > 2000:
        raise ValueError(f"dense Schur oracle capped at 2000 DOF, got {n}")
    boundary_idx = np.asarray(boundary_idx, dtype=np.int64)
    interior_idx = np.setdiff1d(np.arange(n), boundary_idx)
    Kbb = K[np.ix_(boundary_idx, boundary_idx)]
    if len(interior_idx) == 0:
        return Kbb.copy()
    Kbi = K[np.ix_(boundary_idx, interior_idx)]
    Kib = K[np.ix_(interior_idx, boundary_idx)]
    Kii = K[np.ix_(interior_idx, interior_idx)]
    return Kbb - Kbi @ np.linalg.solve(Kii, Kib)
