"""Time-dependent coefficient families for the bulk sesquilinear forms.

A family packages vectorized evaluators for the matrix coefficient ``a``,
the first-order coefficients ``b`` and ``c``, the zeroth-order coefficient
``d``, the Hölder exponent in time, and the t = infinity snapshot.  The
distinguished time ``TIME_INF`` (= math.inf) is accepted by every evaluator
and returns the limit values exactly.

Evaluator contract (all vectorized over points, pure and re-entrant):
    a(t, pts) -> (n, 2, 2);  b(t, pts), c(t, pts) -> (n, 2);  d(t, pts) -> (n,)
with ``pts`` of shape (n, 2) and ``t`` a float or TIME_INF.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

TIME_INF = math.inf


class CoefficientError(ValueError):
    """Invalid coefficient-family parameters."""


@dataclass(frozen=True)
class CoefficientFamily:
    a: callable
    b: callable
    c: callable
    d: callable
    alpha: float                  # Hölder exponent in ]0, 1]
    coercivity_floor: float       # claimed constant, verified at runtime
    time_constant: bool = False
    symmetric: bool = False       # a symmetric and b == c (real case)

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise CoefficientError("alpha must lie in ]0, 1]")

    def eval_all(self, t, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        return (self.a(t, pts), self.b(t, pts), self.c(t, pts),
                self.d(t, pts))

    def adjoint(self):
        """Family of the adjoint form: a -> a^T, b and c swapped, d kept.

        For real coefficients the assembled matrix of the adjoint family is
        exactly the transpose of the original one.
        """
        a, b, c = self.a, self.b, self.c
        return replace(self,
                       a=lambda t, p: np.swapaxes(a(t, p), -1, -2),
                       b=lambda t, p: c(t, p),
                       c=lambda t, p: b(t, p))


def _const_fields(amp_fn, lam):
    """Evaluators for a = amp(t)*I, b = c = 0, d = -lam (amp scalar in t)."""

    def a(t, pts):
        n = len(pts)
        out = np.zeros((n, 2, 2))
        out[:, 0, 0] = out[:, 1, 1] = amp_fn(t)
        return out

    def bc(t, pts):
        return np.zeros((len(pts), 2))

    def d(t, pts):
        return np.full(len(pts), -lam)

    return a, bc, d


def preset_laplace_shift(lam):
    """Time-constant family a = I, b = c = 0, d = -lam (lam < 0).

    This is the reference family of the stationary limit problem; its
    assembled matrix doubles as the H^1 Gram matrix when lam = -1.
    """
    if lam >= 0:
        raise CoefficientError("lam must be negative (coercivity would fail)")
    a, bc, d = _const_fields(lambda t: 1.0, lam)
    return CoefficientFamily(a=a, b=bc, c=bc, d=d, alpha=1.0,
                             coercivity_floor=min(1.0, -lam),
                             time_constant=True, symmetric=True)


def preset_oscillating(lam, eps, decay):
    """Family a(t) = (1 + eps e^{-decay t} sin t) I, b = c = 0, d = -lam.

    Smooth in t with Lipschitz constant |eps| (1 + decay); the infinity
    snapshot is the Laplace-shift family.  Requires |eps| < 1 so the
    uniform coercivity floor stays positive.
    """
    if lam >= 0:
        raise CoefficientError("lam must be negative")
    if abs(eps) >= 1:
        raise CoefficientError("|eps| must be < 1 to keep uniform coercivity")
    if decay <= 0:
        raise CoefficientError("decay must be positive")

    def amp(t):
        if t == TIME_INF:
            return 1.0
        return 1.0 + eps * math.exp(-decay * t) * math.sin(t)

    a, bc, d = _const_fields(amp, lam)
    return CoefficientFamily(a=a, b=bc, c=bc, d=d, alpha=1.0,
                             coercivity_floor=(1 - abs(eps)) * min(1.0, -lam),
                             time_constant=False, symmetric=True)


def preset_constant_drift(lam, b_vec=(0.3, 0.1)):
    """Nonsymmetric family: a = I, b = b_vec constant, c = 0, d = -lam.

    Coercive as long as |b_vec| < 2 min(1, -lam); used to exercise the
    adjoint paths (b != c means the boundary operator is nonsymmetric).
    """
    if lam >= 0:
        raise CoefficientError("lam must be negative")
    b_vec = np.asarray(b_vec, dtype=np.float64)
    floor = min(1.0, -lam) - 0.5 * float(np.hypot(*b_vec))
    if floor <= 0:
        raise CoefficientError("drift too strong for coercivity")

    a, zero, d = _const_fields(lambda t: 1.0, lam)

    def b(t, pts):
        return np.broadcast_to(b_vec, (len(pts), 2)).copy()

    return CoefficientFamily(a=a, b=b, c=zero, d=d, alpha=1.0,
                             coercivity_floor=floor,
                             time_constant=True, symmetric=False)


def _default_sample_points():
    # deterministic spatial sample set in the unit disk
    r = np.array([0.0, 0.3, 0.6, 0.9, 1.0])
    th = np.linspace(0.0, 2 * np.pi, 8, endpoint=False)
    pts = [(ri * math.cos(t), ri * math.sin(t)) for ri in r for t in th]
    return np.unique(np.array(pts), axis=0)


def holder_modulus_estimate(family, times, points=None):
    """max over sampled time pairs of ||coef(t,.) - coef(s,.)||_inf / |t-s|^alpha.

    The max runs over all four coefficient fields on a fixed spatial sample
    set (defaults to a deterministic grid in the unit disk).
    """
    times = sorted(set(float(t) for t in times))
    if len(times) < 2:
        raise CoefficientError("need at least two distinct times")
    pts = _default_sample_points() if points is None else np.atleast_2d(points)

    evals = [family.eval_all(t, pts) for t in times]
    worst = 0.0
    for i in range(len(times)):
        for j in range(i + 1, len(times)):
            dt = abs(times[j] - times[i]) ** family.alpha
            for fi, fj in zip(evals[i], evals[j]):
                worst = max(worst, np.max(np.abs(fi - fj)) / dt)
    return worst
