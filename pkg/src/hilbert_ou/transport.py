"""Characteristics of a drift F and the transport / continuity equations.

* ``flow`` integrates dX/dt = F(t, X) for many particles at once;
* ``BackwardSolution`` solves  d_t u + <F, Du> = f,  u(T) = 0  along
  characteristics;
* ``push_forward`` transports an initial law as an ensemble, and
  ``weak_residual`` checks the weak form of the continuity equation on it;
* ``range_probe`` splits K_F(P_eps u_n) - f into its three error terms.

Only the coordinates a drift moves are integrated; the others are constant
along characteristics.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

from .cylinder import (
    constant_field,
    constant_function,
    cylinder_function,
    project_smooth,
    sine_field,
    sp_bump,
    sp_gauss,
    sp_linear,
    sp_poly_trig,
    sp_quadratic,
    sp_sine,
    sp_tanh,
    zero_field,
)
from .errors import ConventionError, ShapeError, StiffnessError, TestClassError
from .estimation import Estimate, lp_norm, mean_se, trapezoid_weights
from .semigroup import _broadcast_nodes, expectation
from .spectral import ou_operators, sample_gaussian


@dataclass(frozen=True)
class ODEOptions:
    method: str = "RK45"
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float = np.inf

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.max_step > 0):
            raise ValueError("ODE tolerances and max step must be positive")


DEFAULT_ODE = ODEOptions()


def _solve(fun, y0, span, opts, t_eval=None):
    sol = solve_ivp(
        fun, span, y0, method=opts.method, rtol=opts.rtol, atol=opts.atol,
        max_step=opts.max_step, t_eval=t_eval,
    )
    if sol.status != 0:
        raise StiffnessError(f"characteristics solver stopped: {sol.message}")
    return sol


def _nonfinite_particle(Z, N):
    bad = np.flatnonzero(~np.all(np.isfinite(Z.reshape(-1, N)), axis=1))
    return int(bad[0]) if bad.size else None


# ---------------------------------------------------------------------------
# flow map


def flow(F, spec, t0, t1, x, opts=DEFAULT_ODE):
    """Position at time ``t1`` of the characteristic through ``x`` at time ``t0``.

    ``x`` has shape ``(..., d)`` with ``d >= F.base_dim``; coordinates beyond
    the field's base are returned unchanged.
    """
    x = np.array(x, dtype=float)
    N = F.base_dim
    if x.ndim == 0 or x.shape[-1] < N:
        raise ShapeError(f"points need at least {N} coordinates")
    if t0 == t1:
        return x
    lead = x.shape[:-1]
    z0 = x[..., :N].reshape(-1)

    def rhs(t, z):
        return F(t, z.reshape(-1, N)).reshape(-1)

    sol = _solve(rhs, z0, (float(t0), float(t1)), opts)
    out = x.copy()
    z = sol.y[:, -1]
    if not np.all(np.isfinite(z)):
        raise StiffnessError(f"characteristic of particle {_nonfinite_particle(z, N)} left the finite range")
    out[..., :N] = z.reshape(lead + (N,))
    return out


# ---------------------------------------------------------------------------
# backward transport equation


CONVENTIONS = ((-1.0, False), (1.0, False), (-1.0, True), (1.0, True))


def _convention_label(conv):
    sign, shifted = conv
    arg = "s - t" if shifted else "s"
    return f"u = {'+' if sign > 0 else '-'}int_t^T f({arg}, xi(s, t, x)) ds"


class BackwardSolution:
    """u(t, x) = sign * int_t^T f(s', xi(s, t, x)) ds with s' = s or s - t.

    The integral is carried as an extra ODE component.  Time is rescaled to
    ``theta in [0, 1]`` via ``s = t + theta (T - t)`` so points with different
    start times share one solver call, and with it one step sequence; finite
    differences of u are then free of step-selection noise.
    """

    terminal_zero = True
    differentiable = True
    bounded = True
    compact = False
    integrable_order = np.inf

    def __init__(self, f, F, spec, opts=DEFAULT_ODE, convention=None, horizon=None):
        self.f = f
        self.F = F
        self.spec = spec
        self.opts = opts
        self.convention = resolve_convention().chosen if convention is None else tuple(convention)
        self.horizon = float(f.horizon if horizon is None else horizon)
        self.base_dim = max(f.base_dim, F.base_dim)
        self.name = f"backward({f.name}; {F.name})"

    def __call__(self, t, X):
        X = np.asarray(X, dtype=float)
        d, N, T = self.base_dim, self.F.base_dim, self.horizon
        if X.ndim == 0 or X.shape[-1] < d:
            raise ShapeError(f"points need at least {d} coordinates")
        lead = X.shape[:-1]
        Xf = X[..., :d].reshape(-1, d)
        P = Xf.shape[0]
        ts = np.broadcast_to(np.asarray(t, dtype=float), lead).reshape(-1)
        span = T - ts
        if np.all(span == 0) or P == 0:
            return np.zeros(lead)
        sign, shifted = self.convention
        groups, inv = np.unique(ts, return_inverse=True)
        members = [np.flatnonzero(inv == g) for g in range(groups.size)]
        rest = Xf[:, N:]

        def rhs(theta, z):
            xi = z[: P * N].reshape(P, N)
            dz = np.empty(P * N + P)
            dxi = dz[: P * N].reshape(P, N)
            full = np.concatenate([xi, rest], axis=1) if d > N else xi
            for g, idx in enumerate(members):
                s = groups[g] + theta * (T - groups[g])
                dxi[idx] = (T - groups[g]) * self.F(s, xi[idx])
                tf = s - groups[g] if shifted else s
                dz[P * N + idx] = (T - groups[g]) * self.f(tf, full[idx])
            return dz

        z0 = np.concatenate([Xf[:, :N].reshape(-1), np.zeros(P)])
        sol = _solve(rhs, z0, (0.0, 1.0), self.opts)
        val = sign * sol.y[P * N :, -1]
        if not np.all(np.isfinite(val)):
            raise StiffnessError("backward characteristics produced non-finite values")
        return val.reshape(lead)

    def grad(self, t, X, full=None, h=1e-4):
        """Central differences in the first ``base_dim`` coordinates (one solver call)."""
        X = np.asarray(X, dtype=float)
        d = self.base_dim
        stencil = [X]
        for k in range(d):
            for sgn in (1.0, -1.0):
                Y = X.copy()
                Y[..., k] += sgn * h
                stencil.append(Y)
        tt = np.broadcast_to(np.asarray(t, dtype=float), X.shape[:-1])
        vals = self(np.stack([tt] * len(stencil)), np.stack(stencil))
        g = np.stack([(vals[1 + 2 * k] - vals[2 + 2 * k]) / (2 * h) for k in range(d)], axis=-1)
        if full is not None and full > d:
            g = np.concatenate([g, np.zeros(g.shape[:-1] + (full - d,))], axis=-1)
        return g

    def dt(self, t, X, h=1e-4):
        X = np.asarray(X, dtype=float)
        tt = np.broadcast_to(np.asarray(t, dtype=float), X.shape[:-1])
        hi = np.minimum(tt + h, self.horizon)
        lo = np.maximum(tt - h, 0.0)
        v = self(np.stack([hi, lo]), np.stack([X, X]))
        return (v[0] - v[1]) / (hi - lo)


def backward_solution(f, F, spec, t, x, opts=DEFAULT_ODE, convention=None):
    """u(t, x) for d_t u + <F, Du> = f, u(T) = 0, by characteristics."""
    return BackwardSolution(f, F, spec, opts, convention)(t, x)


# ---------------------------------------------------------------------------
# residual of the transport equation


@dataclass(frozen=True)
class ResidualReport:
    max: float
    mean: float
    values: np.ndarray


def _eval(fn, t, X):
    """Evaluate ``fn`` at per-point times, grouping points that share a time."""
    if isinstance(fn, BackwardSolution):
        return fn(t, X)
    t = np.broadcast_to(np.asarray(t, dtype=float), X.shape[:-1])
    out = np.empty(X.shape[:-1])
    for tv in np.unique(t):
        m = t == tv
        out[m] = fn(float(tv), X[m])
    return out


def pde_residual(u, F, f, spec, t_probe, x_probe, h=1e-4, hx=1e-4):
    """``|d_t u + <F, Du> - f|`` on probe points ``(t_probe[i], x_probe[i])``.

    d_t u by central differences with step ``h`` (one-sided at the ends of
    [0, T]); Du analytic when ``u`` provides it, otherwise central differences
    with step ``hx``.  All stencil evaluations of a backward solution share one
    solver call.
    """
    t = np.asarray(t_probe, dtype=float).reshape(-1)
    X = np.asarray(x_probe, dtype=float)
    d = max(u.base_dim, F.base_dim, f.base_dim)
    X = X[:, :d] if X.shape[1] >= d else np.pad(X, ((0, 0), (0, d - X.shape[1])))
    T = u.horizon
    hi = np.minimum(t + h, T)
    lo = np.maximum(t - h, 0.0)
    analytic = getattr(u, "grad_fn", None) is not None
    ts, Xs = [hi, lo], [X, X]
    if not analytic:
        for k in range(u.base_dim):
            for sgn in (1.0, -1.0):
                Y = X.copy()
                Y[:, k] += sgn * hx
                ts.append(t)
                Xs.append(Y)
    vals = _eval(u, np.concatenate(ts), np.concatenate(Xs)).reshape(len(ts), -1)
    du_dt = (vals[0] - vals[1]) / (hi - lo)
    if analytic:
        Du = np.stack([u.grad(tv, X[i : i + 1], full=d)[0] for i, tv in enumerate(t)])
    else:
        Du = np.zeros((X.shape[0], d))
        for k in range(u.base_dim):
            Du[:, k] = (vals[2 + 2 * k] - vals[3 + 2 * k]) / (2 * hx)
    Fx = np.stack([F(tv, X[i : i + 1], full=d)[0] for i, tv in enumerate(t)])
    fx = _eval(f, t, X)
    res = np.abs(du_dt + np.sum(Fx * Du, axis=1) - fx)
    return ResidualReport(float(res.max()), float(res.mean()), res)


def residual_probes(spec, count, horizon=1.0, dims=2, seed=12345):
    """``count`` probe points: times uniform in [0, T], positions from mu."""
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, horizon, count)
    X = rng.standard_normal((count, dims)) * np.sqrt(spec.lambdas[:dims])
    return t, X


@dataclass(frozen=True)
class ConventionReport:
    chosen: tuple
    label: str
    residuals: dict


def convention_cases(horizon=1.0):
    """(f, F) pairs on which the residual oracle decides the convention."""
    return [
        ("f=1, F=e1", constant_function(1.0, horizon), constant_field([1.0], horizon=horizon)),
        ("f=x1, F=0", cylinder_function(sp_linear([1.0]), horizon=horizon), zero_field(1, horizon)),
        (
            "f=(1+t) sin(x1), F=sin",
            cylinder_function(sp_sine([1.0]), "ramp", horizon),
            sine_field([0.7], [[1.0]], [0.3], horizon=horizon),
        ),
    ]


@lru_cache(maxsize=None)
def resolve_convention(tol=1e-3, probes=16):
    """Pick the sign and time argument of the characteristics formula by the residual oracle.

    Every candidate is tried on the cases of :func:`convention_cases`; exactly
    one must keep the residual below ``tol`` on all of them.
    """
    from .spectral import build_spectrum

    spec = build_spectrum("power-law", 4)
    t, X = residual_probes(spec, probes, dims=1, seed=99)
    table, passing = {}, []
    for conv in CONVENTIONS:
        worst = 0.0
        for name, f, F in convention_cases():
            u = BackwardSolution(f, F, spec, DEFAULT_ODE, conv)
            r = pde_residual(u, F, f, spec, t, X).max
            table[(_convention_label(conv), name)] = r
            worst = max(worst, r)
        if worst <= tol:
            passing.append(conv)
    if len(passing) != 1:
        raise ConventionError(f"residual oracle accepted {len(passing)} conventions: {table}")
    return ConventionReport(passing[0], _convention_label(passing[0]), table)


# ---------------------------------------------------------------------------
# maximum principle


@dataclass(frozen=True)
class MaxPrinciple:
    u_max: float
    f_max: float
    ratio: float
    ratio_over_T: float
    passed: bool


def max_principle_check(u, f, t_probe, x_probe, horizon=None):
    """``max |u|`` against ``T max |f|`` over the probes; both ratios reported."""
    T = float(u.horizon if horizon is None else horizon)
    t = np.asarray(t_probe, dtype=float).reshape(-1)
    X = np.asarray(x_probe, dtype=float)
    if t.size == 0:
        raise ValueError("probe grid is empty")
    um = float(np.max(np.abs(_eval(u, t, X))))
    fm = float(np.max(np.abs(_eval(f, t, X))))
    ratio = um / fm if fm > 0 else 0.0
    return MaxPrinciple(um, fm, ratio, ratio / T, bool(ratio <= T * (1 + 1e-6)))


# ---------------------------------------------------------------------------
# particles


@dataclass(frozen=True)
class ParticleEnsemble:
    """Particle positions along ``times``.

    ``initial`` holds all stored coordinates at ``times[0]``; ``path`` holds the
    first ``active`` coordinates at every time.  Coordinates beyond ``active``
    do not move.
    """

    times: np.ndarray
    initial: np.ndarray
    path: np.ndarray
    seed: int | None = None
    provenance: str = ""

    @property
    def m(self):
        return self.initial.shape[0]

    @property
    def active(self):
        return self.path.shape[2]

    @property
    def weights(self):
        return np.full(self.m, 1.0 / self.m)

    def positions(self, j, dims=None):
        dims = self.initial.shape[1] if dims is None else int(dims)
        if dims > self.initial.shape[1]:
            raise ShapeError(f"ensemble stores {self.initial.shape[1]} coordinates, {dims} requested")
        X = self.initial[:, :dims].copy()
        k = min(dims, self.active)
        X[:, :k] = self.path[j][:, :k]
        return X

    def frozen(self):
        """Same particles held at their initial positions (a non-solution)."""
        path = np.broadcast_to(self.initial[None, :, : self.active], self.path.shape)
        return replace(self, path=path, provenance=self.provenance + " (frozen)")


def initial_ensemble(spec, m, seed, dims=8, shift=None):
    """Particles at time 0 drawn from mu, optionally shifted by a mean vector."""
    X = np.array(sample_gaussian(spec, m, seed, dims=dims).data)
    prov = "mu"
    if shift is not None:
        s = np.asarray(shift, dtype=float)
        X[:, : s.size] += s
        prov = f"mu shifted by {s.tolist()}"
    return ParticleEnsemble(np.zeros(1), X, X[None, :, :0].copy(), int(seed), prov)


def push_forward(zeta, F, spec, time_grid, opts=DEFAULT_ODE):
    """Carry ``zeta`` along the flow of F; returns positions at every grid time."""
    grid = np.asarray(time_grid, dtype=float)
    N = F.base_dim
    X0 = zeta.initial
    if X0.shape[1] < N:
        raise ShapeError(f"ensemble stores {X0.shape[1]} coordinates, field needs {N}")
    m = X0.shape[0]
    if F.name == "zero":
        path = np.broadcast_to(X0[None, :, :N], (grid.size, m, N)).copy()
    else:

        def rhs(t, z):
            return F(t, z.reshape(m, N)).reshape(-1)

        sol = _solve(rhs, X0[:, :N].reshape(-1), (grid[0], grid[-1]), opts, t_eval=grid)
        path = sol.y.T.reshape(grid.size, m, N)
        if not np.all(np.isfinite(path)):
            raise StiffnessError(f"particle {_nonfinite_particle(path[-1], N)} left the finite range")
    return ParticleEnsemble(grid, X0, path, zeta.seed, zeta.provenance)


# ---------------------------------------------------------------------------
# weak form of the continuity equation


@dataclass(frozen=True)
class WeakResidual:
    estimate: Estimate
    floor: float
    z: float
    passed: bool


def weak_residual(traj, u, F, spec, k=3.0):
    """``int_0^T int K_F u d mu_s ds + int u(0, .) d zeta`` along a particle trajectory.

    Per particle the time integral uses the trapezoid rule on the trajectory
    grid; the quadrature bound is the Richardson estimate ``|I_h - I_2h| / 3``.
    ``passed`` means ``|value| <= k (SE + bound) + floor`` with ``floor`` a
    rounding allowance.
    """
    if not u.terminal_zero:
        raise TestClassError(f"{u.name}: u(T, .) must vanish for the weak form")
    times = traj.times
    T = u.horizon
    if abs(times[0]) > 1e-12 or abs(times[-1] - T) > 1e-9:
        raise ValueError("trajectory must span [0, T]")
    d = max(u.base_dim, F.base_dim)
    K = np.empty((times.size, traj.m))
    for j, t in enumerate(times):
        X = traj.positions(j, d)
        K[j] = u.dt(t, X) + np.sum(F(t, X, full=d) * u.grad(t, X, full=d), axis=-1)
    u0 = u(times[0], traj.positions(0, d))
    fine = np.tensordot(trapezoid_weights(times), K, axes=(0, 0)) + u0
    est = mean_se(fine)
    bound = 0.0
    if times.size >= 3 and (times.size - 1) % 2 == 0:
        coarse = np.tensordot(trapezoid_weights(times[::2]), K[::2], axes=(0, 0)) + u0
        bound = abs(float(est.value) - float(np.mean(coarse))) / 3.0
    est = Estimate(float(est.value), float(est.se), bound)
    floor = 64 * np.finfo(float).eps * (float(np.mean(np.abs(u0))) + T * float(np.mean(np.abs(K))))
    err = float(est.err)
    z = abs(float(est.value)) / err if err > 0 else (np.inf if abs(float(est.value)) > floor else 0.0)
    return WeakResidual(est, floor, z, bool(abs(float(est.value)) <= k * err + floor))


def dt_battery(horizon=1.0):
    """Twelve test functions vanishing at t = T."""
    T = float(horizon)
    rng = np.random.default_rng(2024)
    specs = [
        (sp_linear([1.0]), "vanish"),
        (sp_linear([0.0, 1.0]), "cos"),
        (sp_quadratic([[1.0, 0.2], [0.2, 0.5]]), "vanish"),
        (sp_sine([1.0, 0.5]), "vanish"),
        (sp_sine([0.3, 1.2], 0.4), "cos"),
        (sp_tanh([1.0, -0.7]), "vanish2"),
        (sp_gauss([0.0, 0.0], 0.8), "vanish"),
        (sp_gauss([0.5, -0.2], 1.2, 2.0), "cos"),
        (sp_bump([0.0, 0.0], 1.5), "vanish"),
        (sp_bump([0.4], 1.0), "vanish2"),
        (sp_poly_trig(rng.normal(size=2), 0.5, rng.normal(size=2), 1.0, 0.2 * rng.normal(size=(2, 2))), "vanish"),
        (sp_sine([2.0]), "vanish2"),
    ]
    return [cylinder_function(sp, prof, T) for sp, prof in specs]


# ---------------------------------------------------------------------------
# range probe


# rows of the outer batch used to average out the dropped coordinates of F
PROJ_ROWS = 64


@dataclass
class RangeProbe:
    eps: float
    approx_dim: int
    smoothing: Estimate
    drift_gap: Estimate
    commutator: Estimate
    total: Estimate
    middle_exact_zero: bool
    notes: list = field(default_factory=list)


def range_probe(f, F, spec, eps, approx_dim, batch, exps, time_grid, q, opts=None, proj_batch=None, convention=None):
    """L^{p'}(dt x mu) norms of the three terms of ``K_F(P_eps u_n) - f``.

    ``u_n`` solves the backward equation with drift ``F_n = project_smooth(F,
    approx_dim)``, averaged over the first ``PROJ_ROWS`` rows of ``batch``
    unless ``proj_batch`` is given.  The terms are ``P_eps f - f``, ``<F - F_n, D P_eps u_n>`` and
    ``B_eps(u_n, F_n)``.  D P_eps u_n uses the weight form and B_eps the
    representation through div_Q F_n, so only values of u_n are needed; one
    characteristics solve per time node serves all inner nodes and samples.
    """
    opts = opts or ODEOptions(rtol=1e-7, atol=1e-9)
    pd = exps.p_dual
    grid = np.asarray(time_grid, dtype=float)
    tw = trapezoid_weights(grid)
    if proj_batch is None:
        proj_batch = replace(batch, m=min(PROJ_ROWS, batch.m), data=batch.data[:PROJ_ROWS], log_weights=None)
    Fn = project_smooth(F, approx_dim, spec, proj_batch)
    same = Fn is F
    un = BackwardSolution(f, Fn, spec, opts, convention, horizon=f.horizon)
    d = max(F.base_dim, f.base_dim, Fn.base_dim)
    dn = un.base_dim
    X = batch.data[:, :d]
    ops = ou_operators(spec, eps).head(dn)
    A = ops.qinv_t_over_s()
    lam = spec.lambdas[:dn]
    a_rows, b_rows, c_rows, s_rows = [], [], [], []
    Xn = X[:, :dn]
    for t in grid:
        Pf = _mehler_values(f, spec, eps, t, X, q)
        a = Pf - f(t, X)
        Fx = Fn(t, Xn, full=dn)

        def integrand(Y):
            Yb = _broadcast_nodes(Y, Xn)
            x1 = ops.tau * Xn + ops.sigma * Yb
            y1 = -ops.sigma * Xn + ops.tau * Yb
            x1b = np.broadcast_to(x1, (Y.shape[0],) + Xn.shape)
            u1 = un(t, x1b)
            F1 = Fn(t, x1b, full=dn)
            divq = Fn.divergence(t, x1b) - np.sum(x1b * F1 / lam, axis=-1)
            g1 = np.sum(A * F1 * y1, axis=-1)
            g0 = np.sum(A * Fx * Yb, axis=-1)
            comm = (divq - (g1 - g0)) * u1
            grad = u1[..., None] * (A * Yb)
            return np.concatenate([grad, comm[..., None]], axis=-1)

        est = expectation(integrand, spec, dn, q)
        DPu = est.value[:, :dn]
        c = est.value[:, dn]
        gap = F(t, X, full=d)[:, :dn] - Fx
        b = np.zeros(X.shape[0]) if same else np.sum(gap * DPu, axis=-1)
        a_rows.append(a)
        b_rows.append(b)
        c_rows.append(c)
        s_rows.append(a + b + c)
    norm = lambda rows: lp_norm(np.array(rows), tw, pd)  # noqa: E731
    notes = []
    if same:
        notes.append("drift already based on the retained modes: middle term is zero")
    return RangeProbe(
        float(eps), int(approx_dim), norm(a_rows), norm(b_rows), norm(c_rows), norm(s_rows), same, notes
    )


def _mehler_values(f, spec, eps, t, X, q):
    if f.base_dim == 0:
        return f(t, X)
    from .semigroup import mehler_apply

    return np.asarray(mehler_apply(f, spec, eps, t, X, q).value)
