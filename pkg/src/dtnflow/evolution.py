"""Time integration of the boundary evolution du/dt + A(t) u = f(t) and the
stationary limit solve.

Each implicit step is one bulk solve with the spectrally shifted form
(shift -1/dt for backward Euler, -2/dt with halved scaling for the
trapezoidal rule), so the stepping exercises exactly the resolvent sector
the operator theory covers.  Time steps are uniform; factorizations are
cached and reused whenever the family is constant in time.
"""

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .assembly import (assemble_boundary_mass, assemble_form,
                       assemble_form_shifted, assemble_h1_gram, embed_k)
from .coeffs import TIME_INF
from .elliptic import Factorization, solve_dirichlet, solve_neumann, trace, weak_conormal


@dataclass
class EvolutionSeries:
    times: np.ndarray          # (N+1,)
    states: np.ndarray         # (N+1, nb) boundary fields
    l2_boundary: np.ndarray    # boundary L2 norm per step
    h1_bulk: np.ndarray        # H1 norm of the harmonic representative
    dist_h1: np.ndarray        # H1 distance to the stationary solution (nan
                               # when no limit was supplied)
    snapshots: list = field(default_factory=list)  # (step, bulk vector)

    def __len__(self):
        return len(self.times)

    def to_csv(self, path):
        """CSV time series; floats via repr so reruns are byte-identical."""
        with open(path, "w", newline="") as fh:
            fh.write("t,u_l2_boundary,u_h1_bulk,dist_h1_to_uinf\n")
            for i in range(len(self.times)):
                d = self.dist_h1[i]
                dtxt = "" if np.isnan(d) else repr(float(d))
                fh.write(f"{float(self.times[i])!r},"
                         f"{float(self.l2_boundary[i])!r},"
                         f"{float(self.h1_bulk[i])!r},{dtxt}\n")


class _FactorCache:
    """Small LRU of Factorization objects keyed by (tag, time, shift)."""

    def __init__(self, mesh, family, M, maxsize=4):
        self.mesh = mesh
        self.family = family
        self.M = M
        self.maxsize = maxsize
        self._store = OrderedDict()

    def _key(self, tag, t, lam):
        if self.family.time_constant:
            t = 0.0
        return (tag, t, lam)

    def form(self, t):
        key = self._key("form", t, None)
        if key not in self._store:
            K = assemble_form(self.mesh, self.family, t)
            self._insert(key, Factorization(self.mesh, K))
        self._store.move_to_end(key)
        return self._store[key]

    def shifted(self, t, lam):
        key = self._key("shift", t, lam)
        if key not in self._store:
            K = assemble_form_shifted(self.mesh, self.family, t, lam, M=self.M)
            self._insert(key, Factorization(self.mesh, K))
        self._store.move_to_end(key)
        return self._store[key]

    def _insert(self, key, value):
        self._store[key] = value
        while len(self._store) > self.maxsize:
            self._store.popitem(last=False)


def step_implicit_euler(mesh, family, u_n, t_next, dt, f_next, M=None,
                        cache=None):
    """One backward Euler step: u_{n+1} = (A(t_next) + 1/dt)^{-1}(u_n/dt + f).

    f_next is a boundary dual; u_n enters the dual side through the boundary
    mass.  Realized as the trace of a single bulk solve with the shifted
    form (shift -1/dt).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if M is None:
        M = assemble_boundary_mass(mesh)
    if cache is None:
        cache = _FactorCache(mesh, family, M)
    factors = cache.shifted(t_next, -1.0 / dt)
    rhs = (M @ u_n) / dt + f_next
    u = factors.lu_full().solve(embed_k(mesh, rhs))
    return trace(mesh, u)


def step_crank_nicolson(mesh, family, u_n, t_n, t_next, dt, f_mid, M=None,
                        cache=None):
    """One trapezoidal step:
    (1/dt + A(t_next)/2) u_{n+1} = (1/dt - A(t_n)/2) u_n + f_mid.

    The left side is half the shifted form with shift -2/dt; the right side
    costs one explicit operator application at t_n.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if M is None:
        M = assemble_boundary_mass(mesh)
    if cache is None:
        cache = _FactorCache(mesh, family, M)

    form_n = cache.form(t_n)
    v = solve_dirichlet(mesh, form_n.K, u_n, factors=form_n)
    Au_n = weak_conormal(mesh, form_n.K, v, warn_nonharmonic=False)
    rhs = (M @ u_n) / dt - 0.5 * Au_n + f_mid

    factors = cache.shifted(t_next, -2.0 / dt)
    # lhs operator = 0.5 * (K - (-2/dt) T'MT); scale the rhs instead of the
    # cached factorization
    u = factors.lu_full().solve(embed_k(mesh, 2.0 * rhs))
    return trace(mesh, u)


def stationary_solve(mesh, family, f_inf):
    """Boundary field solving A(infinity) u = f_inf (one Neumann solve at the
    infinity snapshot)."""
    K = assemble_form(mesh, family, TIME_INF)
    return trace(mesh, solve_neumann(mesh, K, np.asarray(f_inf, dtype=np.float64)))


def run_evolution(mesh, family, t0, T, dt, u0, forcing=None,
                  scheme="implicit-euler", u_inf=None, snapshot_interval=0):
    """Integrate the boundary evolution on [t0, T] with uniform steps.

    forcing(t) must return a boundary dual (None means f = 0); u_inf, when
    given, is a boundary field whose harmonic representative at the infinity
    snapshot anchors the per-step H1 distance diagnostic.  Deterministic:
    identical inputs produce identical series.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if T < t0:
        raise ValueError("T must be >= t0")
    nb = mesh.n_boundary
    u0 = np.asarray(u0, dtype=np.float64)
    if u0.shape != (nb,):
        raise ValueError(f"u0 must have one value per boundary vertex ({nb})")

    n_steps = int(round((T - t0) / dt))
    if abs(t0 + n_steps * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError("T - t0 must be an integer multiple of dt")

    M = assemble_boundary_mass(mesh)
    gram = assemble_h1_gram(mesh)
    cache = _FactorCache(mesh, family, M)

    v_inf = None
    if u_inf is not None:
        K_inf = assemble_form(mesh, family, TIME_INF)
        fac_inf = Factorization(mesh, K_inf)
        v_inf = solve_dirichlet(mesh, K_inf,
                                np.asarray(u_inf, dtype=np.float64),
                                factors=fac_inf)

    zero = np.zeros(nb)

    def f_at(t):
        return zero if forcing is None else np.asarray(forcing(t),
                                                       dtype=np.float64)

    times = t0 + dt * np.arange(n_steps + 1)
    times[-1] = t0 + n_steps * dt
    states = np.empty((n_steps + 1, nb))
    l2 = np.empty(n_steps + 1)
    h1 = np.empty(n_steps + 1)
    dist = np.full(n_steps + 1, np.nan)
    snapshots = []

    u = u0.copy()
    for n in range(n_steps + 1):
        t = times[n]
        states[n] = u
        l2[n] = np.sqrt(u @ (M @ u))
        form_t = cache.form(t)
        v = solve_dirichlet(mesh, form_t.K, u, factors=form_t)
        h1[n] = np.sqrt(v @ (gram @ v))
        if v_inf is not None:
            dv = v - v_inf
            dist[n] = np.sqrt(dv @ (gram @ dv))
        if snapshot_interval and n % snapshot_interval == 0:
            snapshots.append((n, v.copy()))

        if n == n_steps:
            break
        t_next = times[n + 1]
        if scheme == "implicit-euler":
            u = step_implicit_euler(mesh, family, u, t_next, dt,
                                    f_at(t_next), M=M, cache=cache)
        elif scheme == "crank-nicolson":
            u = step_crank_nicolson(mesh, family, u, t, t_next, dt,
                                    f_at(t + 0.5 * dt), M=M, cache=cache)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")

    return EvolutionSeries(times=times, states=states, l2_boundary=l2,
                           h1_bulk=h1, dist_h1=dist, snapshots=snapshots)


def asymptotic_report(mesh, family, series, u_inf):
    """Table of (t, H1 distance of the harmonic representative of u(t) to
    the one of u_inf).  Empty series gives an empty table."""
    if len(series.times) == 0:
        return np.zeros((0, 2))
    gram = assemble_h1_gram(mesh)
    K_inf = assemble_form(mesh, family, TIME_INF)
    fac_inf = Factorization(mesh, K_inf)
    v_inf = solve_dirichlet(mesh, K_inf, np.asarray(u_inf, dtype=np.float64),
                            factors=fac_inf)
    cache = _FactorCache(mesh, family, None)
    out = np.empty((len(series.times), 2))
    for n, (t, u) in enumerate(zip(series.times, series.states)):
        form_t = cache.form(t)
        v = solve_dirichlet(mesh, form_t.K, u, factors=form_t)
        dv = v - v_inf
        out[n] = (t, np.sqrt(dv @ (gram @ dv)))
    return out
