"""The commutator B_eps(u, F) = <F, D P_eps u> - P_eps <F, Du>.

Three evaluations of the same quantity are provided so they can check each
other:

* ``commutator_direct``: the definition, with D P_eps u in smooth form;
* ``commutator_rep``: the integration-by-parts form B1 + B2, which only needs
  values of u and the Q-divergence of F;
* ``commutator_b2_split``: B2 rewritten as an integral along the rotation
  (x, y) -> (x_xi, y_xi), split into a trace part B21 and a Q-divergence part B22.

All inner Gaussian integrals run over the ``max(u.base_dim, F.base_dim)``
leading modes, which is exact because nothing else depends on the others.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cylinder import function_lr_norm, qhalf_inverse_norm, schatten_trace_norm, sobolev_norm
from .errors import DomainError, ShapeError
from .estimation import Estimate, lp_norm, simpson_weights, trapezoid_weights
from .semigroup import _broadcast_nodes, expectation
from .spectral import ou_operators

XI_NODES = 33


@dataclass(frozen=True)
class ExponentTriple:
    """Exponents with ``1/p' = 1/r + 1/s``; ``p' = p / (p - 1)``."""

    p: float
    r: float
    s: float

    def __post_init__(self):
        p, r, s = float(self.p), float(self.r), float(self.s)
        if not p > 2:
            raise ValueError("p must exceed 2")
        if not r >= 1 or not np.isfinite(r):
            raise ValueError("r must lie in [1, inf)")
        if not 1 < s <= 2:
            raise ValueError("s must lie in (1, 2]")
        if abs(1.0 / self.p_dual - (1.0 / r + 1.0 / s)) > 1e-12:
            raise ValueError(f"exponents violate 1/p' = 1/r + 1/s: 1/p' = {1 / self.p_dual:.6g}, 1/r + 1/s = {1 / r + 1 / s:.6g}")

    @property
    def p_dual(self):
        return self.p / (self.p - 1.0)


@dataclass(frozen=True)
class CommutatorValue(Estimate):
    """Estimate of B_eps with a flag raised when its error exceeds 10% of the term scale."""

    scale: np.ndarray | float = 0.0
    accuracy_warning: bool = False


def _dims(u, F, x):
    d = max(u.base_dim, F.base_dim)
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] < d:
        raise ShapeError(f"points need at least {d} coordinates")
    return d, x[..., :d]


def _split(est, k):
    """Component ``k`` of an estimate whose value has a trailing stacking axis."""
    pick = lambda a: np.asarray(a)[..., k] if np.ndim(a) else a  # noqa: E731
    return Estimate(pick(est.value), pick(est.se), pick(est.bound))


def _check_eps(eps):
    eps = float(eps)
    if not eps > 0:
        raise DomainError("the commutator needs eps > 0")
    return eps


def commutator_direct(u, F, spec, eps, t, x, q, rel_tol=0.1):
    """``<F(t,x), D P_eps u(t,.)(x)> - P_eps <F(t,.), Du(t,.)>(x)``.

    Both terms are integrated on the same nodes, so the standard error accounts
    for their correlation.
    """
    eps = _check_eps(eps)
    d, xd = _dims(u, F, x)
    if u.base_dim == 0:
        zero = np.zeros(xd.shape[:-1])
        return CommutatorValue(zero, zero, 0.0, zero, False)
    ops = ou_operators(spec, eps).head(d)
    Fx = F(t, xd, full=d)

    def integrand(Y):
        x1 = ops.tau * xd + ops.sigma * _broadcast_nodes(Y, xd)
        Du1 = u.grad(t, x1, full=d)
        a = np.sum(Fx * ops.tau * Du1, axis=-1)
        b = np.sum(F(t, x1, full=d) * Du1, axis=-1)
        return np.stack([a - b, a, b], axis=-1)

    est = expectation(integrand, spec, d, q)
    b = _split(est, 0)
    scale = np.abs(_split(est, 1).value) + np.abs(_split(est, 2).value)
    warn = bool(np.any(b.err > rel_tol * np.maximum(scale, 1e-300)) and np.any(scale > 0))
    return CommutatorValue(b.value, b.se, b.bound, scale, warn)


@dataclass(frozen=True)
class Representation:
    """B1, B2 and their sum (estimated from the same nodes)."""

    b1: Estimate
    b2: Estimate
    total: Estimate

    def __iter__(self):
        return iter((self.b1, self.b2))


def commutator_rep(u, F, spec, eps, t, x, q):
    """B1 = E[div_Q F(x1) u(x1)], B2 = -E[(g(x1, y1) - g(x, y)) u(x1)].

    Here ``x1 = T x + S y``, ``y1 = -S x + T y`` and ``g(x, y) = <Q^{-1} T/S F(x), y>``.
    """
    eps = _check_eps(eps)
    d, xd = _dims(u, F, x)
    ops = ou_operators(spec, eps).head(d)
    A = ops.qinv_t_over_s()
    lam = spec.lambdas[:d]
    Fx = F(t, xd, full=d)

    def integrand(Y):
        Yb = _broadcast_nodes(Y, xd)
        x1 = ops.tau * xd + ops.sigma * Yb
        y1 = -ops.sigma * xd + ops.tau * Yb
        ux1 = u(t, x1)
        F1 = F(t, x1, full=d)
        divq = F.divergence(t, x1) - np.sum(x1 * F1 / lam, axis=-1)
        b1 = divq * ux1
        g1 = np.sum(A * F1 * y1, axis=-1)
        g0 = np.sum(A * Fx * Yb, axis=-1)
        b2 = -(g1 - g0) * ux1
        return np.stack([b1, b2, b1 + b2], axis=-1)

    est = expectation(integrand, spec, d, q)
    return Representation(_split(est, 0), _split(est, 1), _split(est, 2))


def _xi_factors(spec_head, eps, w):
    """Per-mode ``tau_xi``, ``sigma_xi`` and ``c = 2 w tau_xi / sigma_xi`` on the w-grid.

    ``c`` is the Jacobian ``2w`` of ``xi = w**2`` times T/S at ``eps*xi``; it
    has the finite limit ``2 sqrt(lambda / eps)`` at ``w = 0``.
    """
    lam = spec_head.lambdas
    xi = w[:, None] ** 2
    ratio = eps * xi / lam
    tau = np.exp(-0.5 * ratio)
    sigma = np.sqrt(-np.expm1(-ratio))
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(w[:, None] > 0, 2.0 * w[:, None] * tau / sigma, 2.0 * np.sqrt(lam / eps))
    return tau, sigma, c


@dataclass(frozen=True)
class B2Split:
    """B21, B22, their sum, and the pathwise gap B2 - (B21 + B22) on shared nodes."""

    b21: Estimate
    b22: Estimate
    total: Estimate
    gap: Estimate

    def __iter__(self):
        return iter((self.b21, self.b22))


def b21_integrand(u, F, spec, eps, xi, t, x, y, x1):
    """Integrand of the trace part at a single xi: ``(<A DF(x_xi) B y_xi, y_xi> - div G(x_xi)) u(x1)``.

    ``x``, ``y`` hold the leading ``d`` modes; ``B = Q^{-1} T/S`` at ``eps*xi``
    and ``G = A T/S F`` with ``A = Q^{-1} T/S`` at ``eps``.
    """
    d = x.shape[-1]
    head = spec.head(d)
    ops = ou_operators(head, eps)
    A = ops.qinv_t_over_s()
    tx, sx, c = _xi_factors(head, eps, np.array([np.sqrt(xi)]))
    bx = c[0] / (2.0 * np.sqrt(xi)) / head.lambdas
    xx = tx[0] * x + sx[0] * y
    yx = -sx[0] * x + tx[0] * y
    J = _jac(F, t, xx, d)
    quad = np.einsum("...i,...ij,...j->...", A * yx, J, bx * yx)
    divG = np.einsum("i,...ii->...", A * bx * head.lambdas, J)
    return (quad - divG) * u(t, x1)


def _jac(F, t, X, d):
    J = F.jacobian(t, X)
    if J.shape[-1] == d:
        return J
    out = np.zeros(J.shape[:-2] + (d, d))
    out[..., : F.base_dim, : F.base_dim] = J
    return out


def commutator_b2_split(u, F, spec, eps, t, x, q, xi_nodes=XI_NODES):
    """Split B2 along the rotation path into B21 (trace part) and B22 (Q-divergence part).

    The xi-integral is taken in ``w = sqrt(xi)`` with composite Simpson on
    ``xi_nodes`` uniform nodes; the rule on every other node gives the
    quadrature error bound.
    """
    eps = _check_eps(eps)
    if xi_nodes < 5 or xi_nodes % 4 != 1:
        raise ValueError("xi quadrature needs 4k+1 nodes so the coarse rule is also Simpson")
    d, xd = _dims(u, F, x)
    head = spec.head(d)
    ops = ou_operators(head, eps)
    A = ops.qinv_t_over_s()
    lam = head.lambdas
    w = np.linspace(0.0, 1.0, xi_nodes)
    tw, sw, cw = _xi_factors(head, eps, w)
    wf = simpson_weights(xi_nodes)
    wc = simpson_weights((xi_nodes + 1) // 2)
    Fx = F(t, xd, full=d)

    def integrand(Y):
        Yb = _broadcast_nodes(Y, xd)
        x1 = ops.tau * xd + ops.sigma * Yb
        ux1 = u(t, x1)
        p21 = np.zeros((xi_nodes,) + ux1.shape)
        p22 = np.zeros_like(p21)
        for j in range(xi_nodes):
            xx = tw[j] * xd + sw[j] * Yb
            yx = -sw[j] * xd + tw[j] * Yb
            J = _jac(F, t, xx, d)
            Fxx = F(t, xx, full=d)
            Bc = cw[j] / lam  # 2w * Q^{-1} T/S at eps*xi
            quad = np.einsum("...i,...ij,...j->...", A * yx, J, Bc * yx)
            Gc = A * cw[j] * Fxx  # 2w * G
            divG = np.einsum("i,...ii->...", A * cw[j], J)
            divqG = divG - np.sum(xx * Gc / lam, axis=-1)
            p21[j] = quad - divG
            p22[j] = divqG
        k = -0.5 * eps * ux1
        b21 = k * np.tensordot(wf, p21, axes=(0, 0))
        b22 = k * np.tensordot(wf, p22, axes=(0, 0))
        c21 = k * np.tensordot(wc, p21[::2], axes=(0, 0))
        c22 = k * np.tensordot(wc, p22[::2], axes=(0, 0))
        y1 = -ops.sigma * xd + ops.tau * Yb
        b2 = -(np.sum(A * F(t, x1, full=d) * y1, axis=-1) - np.sum(A * Fx * Yb, axis=-1)) * ux1
        return np.stack([b21, b22, b21 + b22, b2 - b21 - b22, c21, c22], axis=-1)

    est = expectation(integrand, spec, d, q)
    parts = [_split(est, k) for k in range(6)]
    b21, b22, tot, gap, c21, c22 = parts
    xb21 = np.abs(b21.value - c21.value)
    xb22 = np.abs(b22.value - c22.value)
    add = lambda e, b: Estimate(e.value, e.se, np.asarray(e.bound) + b)  # noqa: E731
    return B2Split(add(b21, xb21), add(b22, xb22), add(tot, xb21 + xb22), add(gap, xb21 + xb22))


# ---------------------------------------------------------------------------
# operator-norm bound


def operator_sup(spec, eps, xi):
    """``max_k 2 a e^{-a eps} e^{-a eps xi} / (sqrt(1 - e^{-2 a eps}) sqrt(1 - e^{-2 a eps xi}))``, a = 1/(2 lambda_k)."""
    eps, xi = float(eps), float(xi)
    if not eps > 0:
        raise DomainError("eps must be > 0")
    if not 0 < xi <= 1:
        raise DomainError("xi must lie in (0, 1]")
    a = 0.5 / spec.lambdas
    num = 2 * a * np.exp(-a * eps) * np.exp(-a * eps * xi)
    den = np.sqrt(-np.expm1(-2 * a * eps)) * np.sqrt(-np.expm1(-2 * a * eps * xi))
    return float(np.max(num / den))


def operator_norm_scan(spec, eps, xi):
    """Spectral norm of Q^{-1} (T/S)(eps) (T/S)(eps xi) assembled as explicit matrices."""
    o1 = ou_operators(spec, eps)
    o2 = ou_operators(spec, eps * xi)
    Qinv = np.diag(1.0 / spec.lambdas)
    M = Qinv @ np.diag(o1.t_over_s()) @ np.diag(o2.t_over_s())
    return float(np.linalg.norm(M, 2))


@dataclass(frozen=True)
class OperatorBound:
    sup_value: float
    bound_rhs: float
    scaled: float
    holds: bool


def operator_bound_check(spec, eps, xi, C=None):
    """Compare the mode-wise sup against ``C / (eps sqrt(xi))``."""
    if C is None:
        from .calibration import OPERATOR_C

        C = OPERATOR_C
    sup = operator_sup(spec, eps, xi)
    rhs = C / (eps * np.sqrt(xi))
    return OperatorBound(sup, rhs, sup * eps * np.sqrt(xi), bool(sup <= rhs))


# ---------------------------------------------------------------------------
# L^{p'} norm sweep


@dataclass
class CommutatorSweep:
    eps: np.ndarray
    lhs: list
    rhs_core: Estimate
    u_norm: Estimate
    f_sobolev: Estimate
    f_qhalf: Estimate
    trace_term: Estimate
    C: float | None
    ratios: np.ndarray
    bound_holds: np.ndarray
    decreasing: bool
    decay_slope: float
    pieces: dict = field(default_factory=dict)
    accuracy_warning: bool = False
    notes: list = field(default_factory=list)


def _lp_from_values(vals, bounds, tw, p):
    """L^p(dt x mu) norm from per-(time, sample) values and inner quadrature bounds."""
    est = lp_norm(vals, tw, p)
    if np.any(bounds):
        extra = float(lp_norm(bounds, tw, p).value)
        est = Estimate(est.value, est.se, np.asarray(est.bound) + extra)
    return est


def norm_sweep(u, F, spec, exps, eps_grid, batch, time_grid, q, C=None, decompose=False, decompose_samples=256):
    """``||B_eps(u, F)||_{L^{p'}(dt x mu)}`` along ``eps_grid`` against the bound's right-hand side.

    The outer integral over H_T uses ``batch`` and the trapezoid rule on
    ``time_grid``; the inner integral of each B_eps(t, x) uses ``q``.
    ``C`` multiplies ``||u||_{L^r} (||F||_{1,s,T} + ||Q^{-1/2} F||_{L^s})``;
    ratios LHS / RHS-core are always reported.
    """
    eps_grid = np.asarray(eps_grid, dtype=float)
    if np.any(eps_grid <= 0):
        raise DomainError("eps grid must be positive")
    grid = np.asarray(time_grid, dtype=float)
    tw = trapezoid_weights(grid)
    pd = exps.p_dual
    u_norm = function_lr_norm(u, exps.r, batch, grid)
    f_sob = sobolev_norm(F, exps.s, spec, batch, grid)
    f_qh = qhalf_inverse_norm(F, exps.s, spec, batch, grid)
    trace_term = schatten_trace_norm(F, exps.s, batch, grid)
    inner = f_sob + f_qh
    rhs = Estimate(
        float(u_norm.value) * float(inner.value),
        float(np.hypot(float(u_norm.value) * float(inner.se), float(inner.value) * float(u_norm.se))),
        float(u_norm.value) * float(inner.bound) + float(inner.value) * float(u_norm.bound),
    )
    X = batch.data
    lhs, pieces, warn = [], {"b1": [], "b2": [], "b21": [], "b22": []}, False
    Xs = X[:decompose_samples]
    for eps in eps_grid:
        vals, bnds = [], []
        for t in grid:
            b = commutator_direct(u, F, spec, eps, t, X, q)
            warn |= b.accuracy_warning
            vals.append(b.value)
            bnds.append(np.asarray(b.bound) + np.zeros_like(b.value))
        lhs.append(_lp_from_values(np.array(vals), np.array(bnds), tw, pd))
        if decompose:
            rows = {k: ([], []) for k in pieces}
            for t in grid:
                rep = commutator_rep(u, F, spec, eps, t, Xs, q)
                spl = commutator_b2_split(u, F, spec, eps, t, Xs, q)
                for k, e in (("b1", rep.b1), ("b2", rep.b2), ("b21", spl.b21), ("b22", spl.b22)):
                    rows[k][0].append(e.value)
                    rows[k][1].append(np.asarray(e.bound) + np.zeros_like(e.value))
            for k in pieces:
                pieces[k].append(_lp_from_values(np.array(rows[k][0]), np.array(rows[k][1]), tw, pd))
    lhs_v = np.array([float(e.value) for e in lhs])
    lhs_e = np.array([float(e.err) for e in lhs])
    rhs_v = float(rhs.value)
    ratios = lhs_v / rhs_v if rhs_v > 0 else np.where(lhs_v > 0, np.inf, 0.0)
    holds = ratios <= C if C is not None else np.ones_like(ratios, dtype=bool)
    order = np.argsort(eps_grid)[::-1]
    v, e = lhs_v[order], lhs_e[order]
    decreasing = bool(np.all(v[:-1] - v[1:] > 3.0 * np.hypot(e[:-1], e[1:])))
    slope = float("nan")
    if np.all(lhs_v > 0) and eps_grid.size >= 2:
        slope = float(np.polyfit(np.log(eps_grid), np.log(lhs_v), 1)[0])
    notes = ["fractional trace power Tr[(DF)^s] read as a Schatten s-norm of DF"]
    return CommutatorSweep(
        eps_grid, lhs, rhs, u_norm, f_sob, f_qh, trace_term, C, ratios, np.asarray(holds),
        decreasing, slope, pieces if decompose else {}, warn, notes,
    )
