"""Moving-domain machinery: diffeomorphism families h(t, .), the positive
normal-extension factor, synthesis of the pulled-back coefficient family,
data transport between the moving and the reference frame, and numerical
verification of the motion hypotheses.

All presets live on the unit disk.  Motion evaluators are formula-based and
must stay well defined in a small neighborhood of the closed disk (the
generic derivative path samples slightly outside the boundary).  The time
argument accepts TIME_INF and must then return the limit values exactly;
this is what makes the infinity snapshot of a transformed family coincide
bit-for-bit with the reference Laplace-shift family.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._config import MOTION_FD_STEP_REL
from .coeffs import TIME_INF, CoefficientFamily


class GeometryError(RuntimeError):
    """Degenerate geometry (singular Jacobian or vanishing normal field)."""


@dataclass(frozen=True)
class DomainMotion:
    """A family of diffeomorphisms of the reference domain.

    h, jac (entries dh_i/dy_j), dh_dt are vectorized over points; c is the
    scalar normal speed (the boundary velocity is c(t) times the outward
    normal).  nu_normal is a C^1 extension of the outward normal to the
    closed domain; chi is a cutoff equal to 1 on the boundary and supported
    where nu_normal does not vanish.  t_star marks the earliest admissible
    start time (|c| <= 1/2 and coercivity from there on).

    N_closed / div_GN_closed are optional exact shortcuts for the normal
    extension and for the divergence field D_j = sum_l d_l((jac^-1)_lj N);
    presets with simple geometry provide them, the generic path falls back
    to central finite differences.
    """

    h: callable
    jac: callable
    dh_dt: callable
    c: callable
    alpha: float
    t_star: float
    nu_normal: callable
    chi: callable
    domain_diameter: float = 2.0
    time_constant: bool = False
    coercivity_floor_hint: float = 0.25
    N_closed: callable = None
    div_GN_closed: callable = None


def inv2x2(mats):
    """Vectorized adjugate inverse of (n, 2, 2) matrices."""
    det = mats[:, 0, 0] * mats[:, 1, 1] - mats[:, 0, 1] * mats[:, 1, 0]
    if np.any(det == 0):
        raise GeometryError("singular Jacobian (not a diffeomorphism)")
    out = np.empty_like(mats)
    out[:, 0, 0] = mats[:, 1, 1]
    out[:, 1, 1] = mats[:, 0, 0]
    out[:, 0, 1] = -mats[:, 0, 1]
    out[:, 1, 0] = -mats[:, 1, 0]
    return out / det[:, None, None]


def _weighted_normal(motion, t, pts):
    """w_j = sum_k (jac^-1)_kj nu_k: the transposed-inverse-Jacobian image
    of the normal field."""
    G = inv2x2(motion.jac(t, pts))
    nu = motion.nu_normal(pts)
    return np.einsum("nkj,nk->nj", G, nu)


def normal_extension_N(motion, t, pts):
    """Strictly positive interior extension of the boundary metric factor:
    N = chi |w|^{-1} + 1 - chi with w the weighted normal."""
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    if motion.N_closed is not None:
        return motion.N_closed(t, pts)
    chi = motion.chi(pts)
    w = _weighted_normal(motion, t, pts)
    s = np.einsum("nj,nj->n", w, w)
    bad = (s <= 1e-28) & (chi > 0)
    if np.any(bad):
        raise GeometryError(
            f"normal field vanishes inside the cutoff support at "
            f"{pts[bad][0]}")
    inv = np.where(s > 1e-28, 1.0 / np.sqrt(np.where(s > 1e-28, s, 1.0)), 0.0)
    return chi * inv + 1.0 - chi


def moving_normal(motion, t, pts):
    """Unit outward normal of the moving boundary at h(t, y): w / |w|."""
    w = _weighted_normal(motion, t, pts)
    norm = np.sqrt(np.einsum("nj,nj->n", w, w))
    if np.any(norm == 0):
        raise GeometryError("weighted normal vanished on the boundary")
    return w / norm[:, None]


def _div_GN(motion, t, pts):
    """D_j = sum_l d_l((jac^-1)_lj N): closed form if the preset has one,
    otherwise central differences of the product field."""
    if motion.div_GN_closed is not None:
        return motion.div_GN_closed(t, pts)
    step = MOTION_FD_STEP_REL * motion.domain_diameter

    def product(q):
        G = inv2x2(motion.jac(t, q))
        return G * normal_extension_N(motion, t, q)[:, None, None]

    out = np.zeros((len(pts), 2))
    for axis in range(2):
        dq = np.zeros((1, 2))
        dq[0, axis] = step
        plus = product(pts + dq)
        minus = product(pts - dq)
        out += (plus[:, axis, :] - minus[:, axis, :]) / (2.0 * step)
    return out


def transformed_family(motion, lam):
    """Coefficient family of the pulled-back bulk problem.

    a_kl = sum_j G_kj G_lj (1-c) N,  b_k = (1-c) sum_j G_kj D_j,  c_j = 0,
    d = -lam (1-c) N, with G the inverse Jacobian and N the normal
    extension.  The infinity snapshot is exactly the Laplace-shift family.
    """
    if lam >= 0:
        raise ValueError("lam must be negative")

    def a(t, pts):
        G = inv2x2(motion.jac(t, pts))
        f = (1.0 - motion.c(t)) * normal_extension_N(motion, t, pts)
        return np.einsum("nkj,nlj->nkl", G, G) * f[:, None, None]

    def b(t, pts):
        G = inv2x2(motion.jac(t, pts))
        D = _div_GN(motion, t, pts)
        return (1.0 - motion.c(t)) * np.einsum("nkj,nj->nk", G, D)

    def c_coef(t, pts):
        return np.zeros((len(pts), 2))

    def d(t, pts):
        f = (1.0 - motion.c(t)) * normal_extension_N(motion, t, pts)
        return -lam * f

    return CoefficientFamily(
        a=a, b=b, c=c_coef, d=d, alpha=motion.alpha,
        coercivity_floor=motion.coercivity_floor_hint * min(1.0, -lam),
        time_constant=motion.time_constant, symmetric=False)


def strong_conormal_eval(motion, t, mesh, v):
    """Pointwise transformed conormal derivative at boundary vertices:
    sum_jk G_kj (1-c) n_j dv/dy_k, with the P1 gradient averaged over the
    triangles adjacent to each boundary vertex."""
    from ._kernels import element_geometry
    coords = mesh.vertices[mesh.triangles]
    _, grads = element_geometry(coords)
    vals = np.asarray(v, dtype=np.float64)
    tri_grad = np.einsum("tp,tpd->td", vals[mesh.triangles], grads)

    nv = mesh.nv
    acc = np.zeros((nv, 2))
    cnt = np.zeros(nv)
    for p in range(3):
        np.add.at(acc, mesh.triangles[:, p], tri_grad)
        np.add.at(cnt, mesh.triangles[:, p], 1.0)
    vertex_grad = acc / cnt[:, None]

    bpts = mesh.vertices[mesh.boundary_vertices]
    G = inv2x2(motion.jac(t, bpts))
    n = moving_normal(motion, t, bpts)
    gb = vertex_grad[mesh.boundary_vertices]
    return (1.0 - motion.c(t)) * np.einsum("nkj,nj,nk->n", G, n, gb)


def pullback_boundary_data(motion, t, mesh, f, M=None):
    """Dual of the moving-frame boundary function f: sample f at the mapped
    boundary vertices, then weight by the boundary mass."""
    from .assembly import assemble_boundary_mass
    if M is None:
        M = assemble_boundary_mass(mesh)
    pts = motion.h(t, mesh.vertices[mesh.boundary_vertices])
    return M @ np.asarray(f(pts), dtype=np.float64)


def pushforward_field(motion, t, mesh, v):
    """Vertex positions on the moving domain plus the field values."""
    return motion.h(t, mesh.vertices), np.asarray(v)


# -- presets ------------------------------------------------------------------

def quintic_smoothstep(r, lo=0.5, hi=0.75):
    """C^2 cutoff: 0 below lo, 1 above hi, quintic blend in between."""
    s = np.clip((np.asarray(r, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)
    return s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)


def quintic_smoothstep_deriv(r, lo=0.5, hi=0.75):
    s = np.clip((np.asarray(r, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)
    return 30.0 * s * s * (1.0 - s) ** 2 / (hi - lo)


def disk_normal_field(pts):
    """C^1 extension of the outward normal of the unit circle: y/|y| for
    r >= 1/2, smoothly continued (and vanishing only at 0) below."""
    pts = np.atleast_2d(pts)
    r = np.hypot(pts[:, 0], pts[:, 1])
    # q(r) = 1/r outside, 3 - 4 r^2 inside: C^1 match at r = 1/2
    q = np.where(r >= 0.5, 1.0 / np.where(r > 0, r, 1.0), 3.0 - 4.0 * r * r)
    return pts * q[:, None]


def disk_cutoff(pts):
    pts = np.atleast_2d(pts)
    return quintic_smoothstep(np.hypot(pts[:, 0], pts[:, 1]))


def identity_motion():
    """The trivial motion; its transformed family reproduces the reference
    Laplace-shift coefficients exactly (bit-for-bit)."""

    def h(t, pts):
        return np.array(np.atleast_2d(pts), dtype=np.float64, copy=True)

    def jac(t, pts):
        n = len(np.atleast_2d(pts))
        out = np.zeros((n, 2, 2))
        out[:, 0, 0] = out[:, 1, 1] = 1.0
        return out

    def dh_dt(t, pts):
        return np.zeros((len(np.atleast_2d(pts)), 2))

    return DomainMotion(
        h=h, jac=jac, dh_dt=dh_dt, c=lambda t: 0.0, alpha=1.0, t_star=0.0,
        nu_normal=disk_normal_field, chi=disk_cutoff, time_constant=True,
        coercivity_floor_hint=1.0,
        N_closed=lambda t, pts: np.ones(len(np.atleast_2d(pts))),
        div_GN_closed=lambda t, pts: np.zeros((len(np.atleast_2d(pts)), 2)))


def radial_dilation(rho, drho, t_star=0.0, alpha=1.0):
    """h(t, y) = rho(t) y on the unit disk; normal speed c(t) = rho'(t).

    rho and drho must handle TIME_INF (returning 1 and 0 exactly for
    motions that relax to the identity).  Closed forms are supplied for the
    normal extension and the divergence field.
    """

    def h(t, pts):
        return rho(t) * np.atleast_2d(np.asarray(pts, dtype=np.float64))

    def jac(t, pts):
        n = len(np.atleast_2d(pts))
        out = np.zeros((n, 2, 2))
        out[:, 0, 0] = out[:, 1, 1] = rho(t)
        return out

    def dh_dt(t, pts):
        return drho(t) * np.atleast_2d(np.asarray(pts, dtype=np.float64))

    def N_closed(t, pts):
        pts = np.atleast_2d(pts)
        r = np.hypot(pts[:, 0], pts[:, 1])
        return 1.0 + quintic_smoothstep(r) * (rho(t) - 1.0)

    def div_GN_closed(t, pts):
        # G = rho^-1 I, so D_j = rho^-1 d_j N with N = 1 + chi(r)(rho - 1)
        pts = np.atleast_2d(pts)
        r = np.hypot(pts[:, 0], pts[:, 1])
        rad = (rho(t) - 1.0) * quintic_smoothstep_deriv(r) / rho(t)
        safe_r = np.where(r > 0, r, 1.0)
        return pts * (rad / safe_r)[:, None]

    return DomainMotion(
        h=h, jac=jac, dh_dt=dh_dt, c=drho, alpha=alpha, t_star=t_star,
        nu_normal=disk_normal_field, chi=disk_cutoff,
        N_closed=N_closed, div_GN_closed=div_GN_closed)


def dilation_exp(amp=0.1, decay=1.0):
    """radial_dilation with rho(t) = 1 + amp e^{-decay t}."""

    def rho(t):
        if t == TIME_INF:
            return 1.0
        return 1.0 + amp * math.exp(-decay * t)

    def drho(t):
        if t == TIME_INF:
            return 0.0
        return -amp * decay * math.exp(-decay * t)

    return radial_dilation(rho, drho, t_star=0.0)


def collar_normal(f, df, t_star, alpha=1.0):
    """Collar motion on the unit disk: h(t, y) = y + f(t) chi(r) y / r.

    Translates a boundary collar along the normals by f(t); the normal
    speed is c(t) = f'(t).  Requires sup |f| < 1/4 so h stays injective.
    No closed derivative forms: the generic finite-difference path is used.
    """

    def _q(r):
        # chi(r)/r, extended by 0 inside the cutoff's dead zone
        chi = quintic_smoothstep(r)
        return np.where(r > 0.25, chi / np.where(r > 0.25, r, 1.0), 0.0)

    def h(t, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        r = np.hypot(pts[:, 0], pts[:, 1])
        return pts * (1.0 + f(t) * _q(r))[:, None]

    def jac(t, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        r = np.hypot(pts[:, 0], pts[:, 1])
        chi = quintic_smoothstep(r)
        dchi = quintic_smoothstep_deriv(r)
        q = _q(r)
        # q'(r) = (chi' r - chi) / r^2 where the field is active
        qp = np.where(r > 0.25, (dchi * r - chi) / np.where(r > 0.25, r * r,
                                                            1.0), 0.0)
        out = np.zeros((len(pts), 2, 2))
        diag = 1.0 + f(t) * q
        out[:, 0, 0] = out[:, 1, 1] = diag
        safe_r = np.where(r > 0, r, 1.0)
        outer = f(t) * qp / safe_r
        for i in range(2):
            for j in range(2):
                out[:, i, j] += outer * pts[:, i] * pts[:, j]
        return out

    def dh_dt(t, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        r = np.hypot(pts[:, 0], pts[:, 1])
        return pts * (df(t) * _q(r))[:, None]

    return DomainMotion(
        h=h, jac=jac, dh_dt=dh_dt, c=df, alpha=alpha, t_star=t_star,
        nu_normal=disk_normal_field, chi=disk_cutoff)


def collar_oscillating(eps=0.05, beta=2.0, alpha_exp=1.25, t_star=2.0):
    """Collar motion with f(t) = eps t^-beta sin(t^alpha_exp); admissible
    oscillatory relaxation whenever 2 (alpha_exp - 1) < beta."""
    if not 2.0 * (alpha_exp - 1.0) < beta:
        raise ValueError("need 2 (alpha_exp - 1) < beta for admissibility")

    def f(t):
        if t == TIME_INF:
            return 0.0
        if t <= 0:
            raise ValueError("collar_oscillating defined for t > 0")
        return eps * t ** (-beta) * math.sin(t ** alpha_exp)

    def df(t):
        if t == TIME_INF:
            return 0.0
        if t <= 0:
            raise ValueError("collar_oscillating defined for t > 0")
        return eps * (-beta * t ** (-beta - 1) * math.sin(t ** alpha_exp)
                      + alpha_exp * t ** (alpha_exp - beta - 1)
                      * math.cos(t ** alpha_exp))

    return collar_normal(f, df, t_star=t_star, alpha=1.0)


# -- assumption verification --------------------------------------------------

def _default_interior_samples():
    radii = np.array([0.0, 0.2, 0.4, 0.6, 0.8, 0.95])
    angles = np.linspace(0.0, 2.0 * np.pi, 12, endpoint=False)
    pts = [(r * math.cos(a), r * math.sin(a)) for r in radii for a in angles]
    return np.unique(np.array(pts), axis=0)


def _default_boundary_samples():
    angles = np.linspace(0.0, 2.0 * np.pi, 24, endpoint=False)
    return np.column_stack([np.cos(angles), np.sin(angles)])


def verify_motion_assumptions(motion, times, points=None,
                              boundary_points=None):
    """Numerical report on the motion hypotheses.

    Returns a dict with the sampled maxima of |jac - I|, second differences
    of h (proxy for the second spatial derivative), |dh/dt|, |c|, the
    residual |dh/dt - c n| on the boundary, Hölder moduli of h and dh/dt,
    and pass flags (normal-speed structure, |c| < 1 beyond t_star).
    Failures are reported, not raised.
    """
    times = [float(t) for t in times]
    pts = _default_interior_samples() if points is None else np.atleast_2d(points)
    bpts = (_default_boundary_samples() if boundary_points is None
            else np.atleast_2d(boundary_points))
    eye = np.eye(2)

    jac_dev = 0.0
    second_diff = 0.0
    dh_max = 0.0
    c_max = 0.0
    residual = 0.0
    delta = 1e-3 * motion.domain_diameter
    for t in times:
        jac_dev = max(jac_dev, np.max(np.abs(motion.jac(t, pts) - eye)))
        dh_max = max(dh_max, np.max(np.abs(motion.dh_dt(t, pts))))
        c_max = max(c_max, abs(motion.c(t)))
        for axis in range(2):
            dq = np.zeros((1, 2))
            dq[0, axis] = delta
            dd = (motion.h(t, pts + dq) - 2.0 * motion.h(t, pts)
                  + motion.h(t, pts - dq)) / delta ** 2
            second_diff = max(second_diff, np.max(np.abs(dd)))
        n = moving_normal(motion, t, bpts)
        res = motion.dh_dt(t, bpts) - motion.c(t) * n
        residual = max(residual, np.max(np.abs(res)))

    holder_h = 0.0
    holder_dh = 0.0
    for i, t in enumerate(times):
        for s in times[i + 1:]:
            den = abs(s - t) ** motion.alpha
            holder_h = max(holder_h, np.max(np.abs(
                motion.h(t, pts) - motion.h(s, pts))) / den)
            holder_dh = max(holder_dh, np.max(np.abs(
                motion.dh_dt(t, pts) - motion.dh_dt(s, pts))) / den)

    c_ok = all(motion.c(t) < 1.0 for t in times if t >= motion.t_star)
    normal_ok = residual <= 1e-8 * max(1.0, dh_max)
    return {
        "max_jac_deviation": jac_dev,
        "max_second_difference": second_diff,
        "max_dh_dt": dh_max,
        "max_c": c_max,
        "normal_speed_residual": residual,
        "holder_h": holder_h,
        "holder_dh_dt": holder_dh,
        "normal_speed_ok": bool(normal_ok),
        "c_below_one_ok": bool(c_ok),
        "passed": bool(normal_ok and c_ok),
    }
