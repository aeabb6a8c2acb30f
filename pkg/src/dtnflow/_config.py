"""Repo-wide numeric constants and feature switches.

All solver/test tolerances live here so there is a single source of truth.
The numba/pure-numpy switch for the assembly kernels is read from the
environment once at import time (set ``DTNFLOW_PURE_NUMPY=1`` to force the
numpy fallback).
"""

import os

# Relative residual accepted from linear solves (Dirichlet/Neumann/resolvent).
RESIDUAL_TOL = 1e-10

# Schur complement vs. brute force, symmetry-of-matrix checks.
MATRIX_MATCH_TOL = 1e-12

# Agreement demanded between Balakrishnan and spectral fractional powers.
FRACTIONAL_AGREE_TOL = 1e-6

# Largest boundary DOF count for which dense materialization is allowed.
DENSE_BOUNDARY_CAP = 4096

# Largest total DOF count accepted by the brute-force dense Schur oracle.
DENSE_SCHUR_CAP = 2000

# Largest bulk DOF count for dense generalized eigensolves (coercivity).
DENSE_BULK_EIG_CAP = 1500

# Optional CG path for SPD systems.
CG_RTOL = 1e-12
CG_MAXITER_FACTOR = 10  # max iterations = factor * sqrt(DOF)

# Stability margins used by the verification sweeps ("stable" = relative
# change below these across one refinement / pair-spacing halving).
SECTORIALITY_REFINE_PCT = 0.10
HOLDER_STABILITY_PCT = 0.20
YAGI_STABILITY_PCT = 0.50

# Balakrishnan quadrature: rho = exp(s), composite Gauss-Legendre on unit
# panels of s in [-S_MAX, S_MAX], plus analytic series corrections for both
# truncated tails (3 terms each).  The corrections are what push the
# truncation error below FRACTIONAL_AGREE_TOL for theta near 0 or 1.
BALAKRISHNAN_S_MAX = 12.0
BALAKRISHNAN_PTS_PER_UNIT = 32
BALAKRISHNAN_TAIL_TERMS = 3

# Finite-difference step for coefficient-field derivatives, relative to the
# reference domain diameter.
MOTION_FD_STEP_REL = 1e-6

PURE_NUMPY = os.environ.get("DTNFLOW_PURE_NUMPY", "") not in ("", "0")
