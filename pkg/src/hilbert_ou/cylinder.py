"""Finitely based functions and vector fields with hand-derived derivatives.

A cylinder function depends on ``(t, x_1, ..., x_N)`` only; a cylinder vector
field takes values in ``span(e_1, ..., e_N)``.  Points are arrays whose last
axis holds (at least the first ``N``) eigen-coordinates, so the same object can
be evaluated on full ``n``-dimensional samples or on marginal ones.

Catalog entries are built as ``profile(t) * spatial(x)``; sums, scalar
multiples and compositions with linear maps give the rest.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateError, IntegrabilityError, ShapeError
from .estimation import lp_norm, trapezoid_weights

# ---------------------------------------------------------------------------
# time profiles


@dataclass(frozen=True)
class TimeProfile:
    name: str
    horizon: float = 1.0

    def __call__(self, t):
        T = self.horizon
        if self.name == "one":
            return 1.0
        if self.name == "vanish":
            return T - t
        if self.name == "cos":
            return np.cos(0.5 * np.pi * t / T)
        if self.name == "ramp":
            return 1.0 + t
        if self.name == "vanish2":
            return (T - t) * (1.0 + t)
        raise ValueError(f"unknown time profile {self.name!r}")

    def deriv(self, t):
        T = self.horizon
        if self.name == "one":
            return 0.0
        if self.name == "vanish":
            return -1.0
        if self.name == "cos":
            return -0.5 * np.pi / T * np.sin(0.5 * np.pi * t / T)
        if self.name == "ramp":
            return 1.0
        if self.name == "vanish2":
            return T - 1.0 - 2.0 * t
        raise ValueError(f"unknown time profile {self.name!r}")

    @property
    def terminal_zero(self):
        return self.name in ("vanish", "cos", "vanish2")


PROFILES = ("one", "vanish", "cos", "ramp", "vanish2")

# ---------------------------------------------------------------------------
# finite differences (test oracles and fallback for numeric functions)


def fd_gradient(fn, t, X, dim, h=1e-5):
    """Central differences of ``fn(t, X)`` in the first ``dim`` coordinates."""
    X = np.asarray(X, dtype=float)
    out = np.empty(X.shape[:-1] + (dim,))
    for k in range(dim):
        step = h * np.maximum(1.0, np.abs(X[..., k]))
        Xp = X.copy()
        Xm = X.copy()
        Xp[..., k] += step
        Xm[..., k] -= step
        out[..., k] = (fn(t, Xp) - fn(t, Xm)) / (2 * step)
    return out


def fd_time(fn, t, X, horizon, h=1e-4):
    lo, hi = max(0.0, t - h), min(horizon, t + h)
    return (fn(hi, X) - fn(lo, X)) / (hi - lo)


def _check_points(X, base_dim):
    X = np.asarray(X, dtype=float)
    if X.ndim == 0 or X.shape[-1] < base_dim:
        raise ShapeError(f"points need at least {base_dim} coordinates, got shape {X.shape}")
    return X


def _pad(v, dim):
    """Zero-pad the last axis of ``v`` to length ``dim``."""
    if v.shape[-1] == dim:
        return v
    pad = [(0, 0)] * (v.ndim - 1) + [(0, dim - v.shape[-1])]
    return np.pad(v, pad)


# ---------------------------------------------------------------------------
# spatial building blocks: phi(z) and its gradient, z = x[..., :N]


@dataclass(frozen=True)
class Spatial:
    base_dim: int
    value: Callable
    grad: Optional[Callable]
    bounded: bool = True
    compact: bool = False
    integrable_order: float = np.inf
    label: str = ""
    differentiable: bool = True


def sp_constant(c=1.0):
    c = float(c)
    return Spatial(
        0,
        lambda z: np.full(z.shape[:-1], c),
        lambda z: np.zeros(z.shape[:-1] + (0,)),
        label=f"const({c:g})",
    )


def sp_linear(a):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    N = a.size
    return Spatial(
        N,
        lambda z: z[..., :N] @ a,
        lambda z: np.broadcast_to(a, z.shape[:-1] + (N,)).copy(),
        bounded=False,
        label="linear",
    )


def sp_quadratic(A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    N = A.shape[0]
    S = A + A.T
    return Spatial(
        N,
        lambda z: np.einsum("...i,ij,...j->...", z[..., :N], A, z[..., :N]),
        lambda z: z[..., :N] @ S.T,
        bounded=False,
        label="quadratic",
    )


def sp_sine(w, phase=0.0, amp=1.0):
    w = np.atleast_1d(np.asarray(w, dtype=float))
    N = w.size

    def value(z):
        return amp * np.sin(z[..., :N] @ w + phase)

    def grad(z):
        return (amp * np.cos(z[..., :N] @ w + phase))[..., None] * w

    return Spatial(N, value, grad, label="sine")


def sp_tanh(w, shift=0.0, amp=1.0):
    w = np.atleast_1d(np.asarray(w, dtype=float))
    N = w.size

    def value(z):
        return amp * np.tanh(z[..., :N] @ w + shift)

    def grad(z):
        th = np.tanh(z[..., :N] @ w + shift)
        return (amp * (1 - th**2))[..., None] * w

    return Spatial(N, value, grad, label="tanh")


def sp_sign(k=1):
    """sign(x_k): bounded, discontinuous; its a.e. gradient is zero."""
    k = int(k)

    def grad(z):
        return np.zeros(z.shape[:-1] + (k,))

    return Spatial(k, lambda z: np.sign(z[..., k - 1]), grad, label=f"sign(x{k})", differentiable=False)


def sp_gauss(center, width=1.0, amp=1.0):
    c = np.atleast_1d(np.asarray(center, dtype=float))
    N = c.size
    s2 = float(width) ** 2

    def value(z):
        d = z[..., :N] - c
        return amp * np.exp(-0.5 * np.sum(d * d, axis=-1) / s2)

    def grad(z):
        d = z[..., :N] - c
        return -(value(z)[..., None]) * d / s2

    return Spatial(N, value, grad, label="gauss")


def sp_bump(center, radius=1.0, amp=1.0):
    """Smooth compactly supported bump exp(1 - 1/(1 - r^2)), r = |z - c|/radius."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    N = c.size
    R = float(radius)

    def _parts(z):
        d = (z[..., :N] - c) / R
        r2 = np.sum(d * d, axis=-1)
        inside = r2 < 1.0
        one_m = np.where(inside, 1.0 - r2, 1.0)
        val = np.where(inside, amp * np.exp(1.0 - 1.0 / one_m), 0.0)
        return d, one_m, val

    def value(z):
        return _parts(z)[2]

    def grad(z):
        d, one_m, val = _parts(z)
        # d/dz exp(1 - 1/(1-r2)) = val * (-1/(1-r2)^2) * 2 d / R
        return (val * (-2.0 / one_m**2))[..., None] * d / R

    return Spatial(N, value, grad, compact=True, label="bump")


def sp_poly_trig(a, b0, w, phase, Aq):
    """(a.z + b0) sin(w.z + phase) + z^T Aq z, the generic polynomial-trig piece."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    Aq = np.atleast_2d(np.asarray(Aq, dtype=float))
    N = a.size
    S = Aq + Aq.T

    def value(z):
        zz = z[..., :N]
        return (zz @ a + b0) * np.sin(zz @ w + phase) + np.einsum("...i,ij,...j->...", zz, Aq, zz)

    def grad(z):
        zz = z[..., :N]
        lin = zz @ a + b0
        arg = zz @ w + phase
        return (
            np.sin(arg)[..., None] * a + (lin * np.cos(arg))[..., None] * w + zz @ S.T
        )

    bounded = not (np.any(a) or np.any(Aq))
    return Spatial(N, value, grad, bounded=bounded, label="poly_trig")


def sp_exp_quadratic(lambdas, c):
    """exp(c/2 * sum z_k^2 / lambda_k): in L^p(mu) only for p < 1/c."""
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    N = lam.size
    c = float(c)

    def value(z):
        return np.exp(0.5 * c * np.sum(z[..., :N] ** 2 / lam, axis=-1))

    def grad(z):
        return value(z)[..., None] * c * z[..., :N] / lam

    order = np.inf if c <= 0 else 1.0 / c
    return Spatial(N, value, grad, bounded=c <= 0, integrable_order=order, label="exp_quadratic")


# ---------------------------------------------------------------------------
# cylinder functions


@dataclass(frozen=True)
class CylinderFunction:
    """u(t, x) = u_N(t, x_1..x_N) with optional analytic gradient and time derivative.

    ``grad_fn``/``dt_fn`` set to ``None`` mark a numeric function; derivatives
    then fall back to central differences.
    """

    base_dim: int
    value_fn: Callable
    grad_fn: Optional[Callable] = None
    dt_fn: Optional[Callable] = None
    horizon: float = 1.0
    terminal_zero: bool = False
    bounded: bool = True
    differentiable: bool = True
    integrable_order: float = np.inf
    compact: bool = False
    name: str = ""

    def __call__(self, t, X):
        X = _check_points(X, self.base_dim)
        return np.asarray(self.value_fn(float(t), X), dtype=float)

    def grad(self, t, X, full=None):
        """Gradient in the first ``base_dim`` coordinates (zero-padded to ``full``)."""
        X = _check_points(X, self.base_dim)
        if self.grad_fn is not None:
            g = np.asarray(self.grad_fn(float(t), X), dtype=float)
        else:
            g = fd_gradient(self.value_fn, float(t), X, self.base_dim)
        return g if full is None else _pad(g, full)

    def dt(self, t, X):
        X = _check_points(X, self.base_dim)
        if self.dt_fn is not None:
            return np.asarray(self.dt_fn(float(t), X), dtype=float)
        return fd_time(self.value_fn, float(t), X, self.horizon)

    # combinators ------------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = constant_function(other, horizon=self.horizon)
        N = max(self.base_dim, other.base_dim)
        a, b = self, other
        grad = None
        if a.grad_fn is not None and b.grad_fn is not None:
            grad = lambda t, X: _pad(a.grad_fn(t, X), N) + _pad(b.grad_fn(t, X), N)
        dt = None
        if a.dt_fn is not None and b.dt_fn is not None:
            dt = lambda t, X: a.dt_fn(t, X) + b.dt_fn(t, X)
        return CylinderFunction(
            N,
            lambda t, X: a.value_fn(t, X) + b.value_fn(t, X),
            grad,
            dt,
            horizon=self.horizon,
            terminal_zero=a.terminal_zero and b.terminal_zero,
            bounded=a.bounded and b.bounded,
            differentiable=a.differentiable and b.differentiable,
            integrable_order=min(a.integrable_order, b.integrable_order),
            compact=a.compact and b.compact,
            name=f"({a.name}+{b.name})",
        )

    __radd__ = __add__

    def __mul__(self, c):
        c = float(c)
        a = self
        return replace(
            self,
            value_fn=lambda t, X: c * a.value_fn(t, X),
            grad_fn=None if a.grad_fn is None else (lambda t, X: c * a.grad_fn(t, X)),
            dt_fn=None if a.dt_fn is None else (lambda t, X: c * a.dt_fn(t, X)),
            terminal_zero=a.terminal_zero or c == 0.0,
            name=f"{c:g}*{a.name}",
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def precompose(self, A):
        """x -> u(t, A x) for an N x N matrix acting on the leading block."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        N = max(A.shape[0], self.base_dim)
        if A.shape[0] < self.base_dim:
            raise ShapeError("linear map must cover the function's base dimension")
        a = self

        def mapped(X):
            return X[..., :N] @ A.T

        grad = None
        if a.grad_fn is not None:
            grad = lambda t, X: _pad(a.grad_fn(t, mapped(X)), N) @ A
        dt = None if a.dt_fn is None else (lambda t, X: a.dt_fn(t, mapped(X)))
        return replace(
            self,
            base_dim=N,
            value_fn=lambda t, X: a.value_fn(t, mapped(X)),
            grad_fn=grad,
            dt_fn=dt,
            name=f"{a.name}@A",
        )


def cylinder_function(spatial, profile="one", horizon=1.0, name=None):
    h = TimeProfile(profile, float(horizon))
    sp = spatial
    return CylinderFunction(
        base_dim=sp.base_dim,
        value_fn=lambda t, X: h(t) * sp.value(X),
        grad_fn=None if sp.grad is None else (lambda t, X: h(t) * sp.grad(X)),
        dt_fn=lambda t, X: h.deriv(t) * sp.value(X),
        horizon=float(horizon),
        terminal_zero=h.terminal_zero,
        bounded=sp.bounded,
        differentiable=sp.differentiable,
        integrable_order=sp.integrable_order,
        compact=sp.compact,
        name=name or (sp.label if profile == "one" else f"{profile}*{sp.label}"),
    )


def constant_function(c, horizon=1.0):
    return cylinder_function(sp_constant(c), horizon=horizon)


def numeric_function(fn, base_dim, horizon=1.0, terminal_zero=False, name="numeric"):
    """Wrap a plain callable ``fn(t, X)``; derivatives by central differences."""
    return CylinderFunction(
        base_dim, fn, None, None, horizon=horizon, terminal_zero=terminal_zero, name=name
    )


# ---------------------------------------------------------------------------
# cylinder vector fields


@dataclass(frozen=True)
class CylinderVectorField:
    """F(t, x) = sum_{i<=N} g_i(t, x_1..x_N) e_i with analytic Jacobian block."""

    base_dim: int
    value_fn: Callable
    jac_fn: Optional[Callable]
    horizon: float = 1.0
    bounded: bool = True
    compact: bool = False
    integrable_order: float = np.inf
    name: str = ""
    se_fn: Optional[Callable] = field(default=None, compare=False)

    def __call__(self, t, X, full=None):
        X = _check_points(X, self.base_dim)
        v = np.asarray(self.value_fn(float(t), X), dtype=float)
        return v if full is None else _pad(v, full)

    def jacobian(self, t, X):
        """N x N block of DF; the full operator is zero outside it."""
        X = _check_points(X, self.base_dim)
        if self.jac_fn is not None:
            return np.asarray(self.jac_fn(float(t), X), dtype=float)
        cols = [
            fd_gradient(lambda s, Y, i=i: self.value_fn(s, Y)[..., i], float(t), X, self.base_dim)
            for i in range(self.base_dim)
        ]
        return np.stack(cols, axis=-2)

    def jacobian_full(self, t, X, n):
        J = self.jacobian(t, X)
        out = np.zeros(J.shape[:-2] + (n, n))
        out[..., : self.base_dim, : self.base_dim] = J
        return out

    def divergence(self, t, X):
        """Tr[DF(t, x)]."""
        return np.trace(self.jacobian(t, X), axis1=-2, axis2=-1)

    # combinators ------------------------------------------------------------
    def __add__(self, other):
        N = max(self.base_dim, other.base_dim)
        a, b = self, other

        def jac(t, X):
            out = np.zeros(X.shape[:-1] + (N, N))
            out[..., : a.base_dim, : a.base_dim] += a.jacobian(t, X)
            out[..., : b.base_dim, : b.base_dim] += b.jacobian(t, X)
            return out

        return CylinderVectorField(
            N,
            lambda t, X: _pad(a.value_fn(t, X), N) + _pad(b.value_fn(t, X), N),
            jac,
            horizon=self.horizon,
            bounded=a.bounded and b.bounded,
            compact=a.compact and b.compact,
            integrable_order=min(a.integrable_order, b.integrable_order),
            name=f"({a.name}+{b.name})",
        )

    def __mul__(self, c):
        c = float(c)
        a = self
        return replace(
            self,
            value_fn=lambda t, X: c * a.value_fn(t, X),
            jac_fn=lambda t, X: c * a.jacobian(t, X),
            name=f"{c:g}*{a.name}",
            se_fn=None if a.se_fn is None else (lambda t, X: abs(c) * a.se_fn(t, X)),
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def apply_matrix(self, M):
        """x -> M F(t, x) for an N x N matrix M (values stay in the leading block)."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        N = M.shape[0]
        if N < self.base_dim:
            raise ShapeError("matrix must cover the field's base dimension")
        a = self
        Mb = M[:, : a.base_dim]
        return CylinderVectorField(
            N,
            lambda t, X: a.value_fn(t, X) @ Mb.T,
            lambda t, X: _pad(Mb @ a.jacobian(t, X), N),
            horizon=a.horizon,
            bounded=a.bounded,
            compact=a.compact,
            integrable_order=a.integrable_order,
            name=f"M*{a.name}",
        )


def field_from_components(components, profile="one", horizon=1.0, name=None):
    """Field whose i-th component is ``profile(t) * components[i](x)``."""
    comps = list(components)
    N = max([len(comps)] + [c.base_dim for c in comps])
    h = TimeProfile(profile, float(horizon))

    def value(t, X):
        vals = [c.value(X) for c in comps]
        out = np.stack(vals, axis=-1) * h(t)
        return _pad(out, N)

    def jac(t, X):
        out = np.zeros(X.shape[:-1] + (N, N))
        for i, c in enumerate(comps):
            g = c.grad(X)
            out[..., i, : g.shape[-1]] = g
        return out * h(t)

    return CylinderVectorField(
        N,
        value,
        jac,
        horizon=float(horizon),
        bounded=all(c.bounded for c in comps),
        compact=all(c.compact for c in comps),
        integrable_order=min(c.integrable_order for c in comps),
        name=name or "components",
    )


def zero_field(N=1, horizon=1.0):
    return CylinderVectorField(
        N,
        lambda t, X: np.zeros(X.shape[:-1] + (N,)),
        lambda t, X: np.zeros(X.shape[:-1] + (N, N)),
        horizon=horizon,
        compact=True,
        name="zero",
    )


def constant_field(c, profile="one", horizon=1.0):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    N = c.size
    h = TimeProfile(profile, float(horizon))
    return CylinderVectorField(
        N,
        lambda t, X: np.broadcast_to(h(t) * c, X.shape[:-1] + (N,)).copy(),
        lambda t, X: np.zeros(X.shape[:-1] + (N, N)),
        horizon=float(horizon),
        name="constant",
    )


def linear_field(A, b=None, profile="one", horizon=1.0):
    """F(t, x) = h(t) (A x_N + b)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    N = A.shape[0]
    b = np.zeros(N) if b is None else np.asarray(b, dtype=float)
    h = TimeProfile(profile, float(horizon))
    return CylinderVectorField(
        N,
        lambda t, X: h(t) * (X[..., :N] @ A.T + b),
        lambda t, X: np.broadcast_to(h(t) * A, X.shape[:-1] + (N, N)).copy(),
        horizon=float(horizon),
        bounded=not np.any(A),
        name="linear",
    )


def sine_field(amp, W, phase=None, profile="one", horizon=1.0):
    """F_i = h(t) amp_i sin(W_i . x + phase_i)."""
    amp = np.atleast_1d(np.asarray(amp, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    N = max(W.shape)
    if W.shape != (N, N) or amp.size != N:
        raise ShapeError("sine field needs amp of length N and an N x N frequency matrix")
    phase = np.zeros(N) if phase is None else np.asarray(phase, dtype=float)
    h = TimeProfile(profile, float(horizon))

    def value(t, X):
        return h(t) * amp * np.sin(X[..., :N] @ W.T + phase)

    def jac(t, X):
        c = amp * np.cos(X[..., :N] @ W.T + phase)
        return h(t) * c[..., :, None] * W

    return CylinderVectorField(N, value, jac, horizon=float(horizon), name="sine_field")


def tanh_field(amp, W, shift=None, profile="one", horizon=1.0):
    amp = np.atleast_1d(np.asarray(amp, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    N = amp.size
    shift = np.zeros(N) if shift is None else np.asarray(shift, dtype=float)
    h = TimeProfile(profile, float(horizon))

    def value(t, X):
        return h(t) * amp * np.tanh(X[..., :N] @ W.T + shift)

    def jac(t, X):
        th = np.tanh(X[..., :N] @ W.T + shift)
        return h(t) * (amp * (1 - th**2))[..., :, None] * W

    return CylinderVectorField(N, value, jac, horizon=float(horizon), name="tanh_field")


def bump_field(c, center, radius=1.0, profile="one", horizon=1.0):
    """F = h(t) c psi(x) with psi a compactly supported smooth bump."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    psi = sp_bump(center, radius)
    N = max(c.size, psi.base_dim)
    c = _pad(c, N)
    h = TimeProfile(profile, float(horizon))

    def value(t, X):
        return h(t) * psi.value(X)[..., None] * c

    def jac(t, X):
        g = _pad(psi.grad(X), N)
        return h(t) * c[:, None] * g[..., None, :]

    return CylinderVectorField(
        N, value, jac, horizon=float(horizon), compact=True, name="bump_field"
    )


# ---------------------------------------------------------------------------
# named catalog (used by the config file)

FUNCTION_CATALOG = {
    # name: (builder(**params) -> Spatial, bounded)
    "constant": (lambda c=1.0: sp_constant(c), True),
    "linear": (lambda a=(1.0,): sp_linear(a), False),
    "quadratic": (lambda A=((1.0,),): sp_quadratic(A), False),
    "sine": (lambda w=(1.0,), phase=0.0, amp=1.0: sp_sine(w, phase, amp), True),
    "tanh": (lambda w=(1.0,), shift=0.0, amp=1.0: sp_tanh(w, shift, amp), True),
    "sign": (lambda k=1: sp_sign(k), True),
    "gauss": (lambda center=(0.0,), width=1.0, amp=1.0: sp_gauss(center, width, amp), True),
    "bump": (lambda center=(0.0,), radius=1.0, amp=1.0: sp_bump(center, radius, amp), True),
}

FIELD_CATALOG = {
    "zero": (lambda profile, horizon, N=1: zero_field(int(N), horizon), True),
    "constant": (lambda profile, horizon, c=(1.0,): constant_field(c, profile, horizon), True),
    "linear": (lambda profile, horizon, A=((1.0,),), b=None: linear_field(A, b, profile, horizon), False),
    "sine": (
        lambda profile, horizon, amp=(1.0,), W=((1.0,),), phase=None: sine_field(amp, W, phase, profile, horizon),
        True,
    ),
    "tanh": (
        lambda profile, horizon, amp=(1.0,), W=((1.0,),), shift=None: tanh_field(amp, W, shift, profile, horizon),
        True,
    ),
    "bump": (
        lambda profile, horizon, c=(1.0,), center=(0.0,), radius=1.0: bump_field(c, center, radius, profile, horizon),
        True,
    ),
}


def make_function(name, profile="one", horizon=1.0, **params):
    """Catalog lookup: ``make_function("sine", w=[1, 0.5], profile="vanish")``."""
    if name not in FUNCTION_CATALOG:
        raise KeyError(f"unknown function catalog entry {name!r}")
    builder, _ = FUNCTION_CATALOG[name]
    return cylinder_function(builder(**params), profile=profile, horizon=horizon, name=name)


def make_field(name, profile="one", horizon=1.0, **params):
    if name not in FIELD_CATALOG:
        raise KeyError(f"unknown field catalog entry {name!r}")
    builder, _ = FIELD_CATALOG[name]
    return builder(profile, float(horizon), **params)


def catalog_is_bounded(kind, name):
    table = FUNCTION_CATALOG if kind == "function" else FIELD_CATALOG
    return table[name][1]


# random generators for property tests ----------------------------------------


def random_poly_trig_function(rng, N, profile="one", horizon=1.0):
    sp = sp_poly_trig(
        rng.normal(size=N),
        rng.normal(),
        rng.normal(size=N),
        rng.uniform(0, 2 * np.pi),
        0.3 * rng.normal(size=(N, N)),
    )
    return cylinder_function(sp, profile, horizon, name="poly_trig")


def random_poly_trig_field(rng, N, profile="one", horizon=1.0):
    comps = [
        sp_poly_trig(
            rng.normal(size=N),
            rng.normal(),
            rng.normal(size=N),
            rng.uniform(0, 2 * np.pi),
            0.3 * rng.normal(size=(N, N)),
        )
        for _ in range(N)
    ]
    return field_from_components(comps, profile, horizon, name="poly_trig_field")


def random_bounded_function(rng, N, profile="one", horizon=1.0):
    """Bounded smooth u: sine plus Gaussian bump with random parameters."""
    s = sp_sine(rng.normal(size=N), rng.uniform(0, 2 * np.pi), rng.uniform(0.5, 1.5))
    g = sp_gauss(rng.normal(scale=0.5, size=N), rng.uniform(0.5, 1.5), rng.normal())
    return cylinder_function(s, profile, horizon) + cylinder_function(g, profile, horizon)


def random_bounded_field(rng, N, profile="one", horizon=1.0):
    return sine_field(
        rng.uniform(0.3, 1.0, size=N),
        rng.normal(scale=0.8, size=(N, N)),
        rng.uniform(0, 2 * np.pi, size=N),
        profile,
        horizon,
    )


# ---------------------------------------------------------------------------
# Gaussian calculus on fields


def div_q(F, spec, t, x):
    """Q-divergence Tr[DF] - <Q^{-1} x, F> at (t, x)."""
    x = _check_points(x, F.base_dim)
    N = F.base_dim
    lam = spec.lambdas[:N]
    return F.divergence(t, x) - np.sum(x[..., :N] * F(t, x) / lam, axis=-1)


def _grid(time_grid):
    grid = np.asarray(time_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        from .errors import ConfigError

        raise ConfigError("time grid must be a nonempty 1-d sequence")
    return grid


def default_time_grid(horizon=1.0, nodes=33):
    return np.linspace(0.0, horizon, nodes)


def _points(batch, dim):
    X = batch.data
    if X.shape[1] < dim:
        raise ShapeError(f"sample batch has {X.shape[1]} coordinates, need {dim}")
    return X[:, :dim]


def sobolev_norm(F, s, spec, batch, time_grid):
    """Monte Carlo ``||F||_{1,s,T}`` with a delta-method standard error."""
    if s < 1:
        raise ValueError("exponent s must be >= 1")
    if s >= F.integrable_order:
        raise IntegrabilityError("||F||_{1,s,T}")
    grid = _grid(time_grid)
    X = _points(batch, F.base_dim)
    vals = []
    for t in grid:
        J = F.jacobian(t, X)
        hs = np.sqrt(np.sum(J * J, axis=(-2, -1)))
        mod = np.linalg.norm(F(t, X), axis=-1)
        vals.append((hs**s + mod**s) ** (1.0 / s))
    return lp_norm(np.array(vals), trapezoid_weights(grid), s, batch.log_weights)


def qhalf_inverse_norm(F, s, spec, batch, time_grid):
    """Monte Carlo ``(int_0^T int |Q^{-1/2} F|^s dmu dt)^{1/s}``."""
    if s >= F.integrable_order:
        raise IntegrabilityError("||Q^{-1/2}F||_{L^s}")
    grid = _grid(time_grid)
    X = _points(batch, F.base_dim)
    root = np.sqrt(spec.lambdas[: F.base_dim])
    vals = [np.linalg.norm(F(t, X) / root, axis=-1) for t in grid]
    return lp_norm(np.array(vals), trapezoid_weights(grid), s, batch.log_weights)


def function_lr_norm(u, r, batch, time_grid):
    """``||u||_{L^r(H_T, dt x mu)}`` by Monte Carlo."""
    if r >= u.integrable_order:
        raise IntegrabilityError("||u||_{L^r}")
    grid = _grid(time_grid)
    X = _points(batch, u.base_dim)
    vals = [u(t, X) for t in grid]
    return lp_norm(np.array(vals), trapezoid_weights(grid), r, batch.log_weights)


def schatten_trace_norm(F, s, batch, time_grid):
    """``(int int sum_i sigma_i(DF)^s)^{1/s}``: the fractional trace power as a Schatten norm."""
    grid = _grid(time_grid)
    X = _points(batch, F.base_dim)
    vals = []
    for t in grid:
        sv = np.linalg.svd(F.jacobian(t, X), compute_uv=False)
        vals.append(np.sum(sv**s, axis=-1) ** (1.0 / s))
    return lp_norm(np.array(vals), trapezoid_weights(grid), s, batch.log_weights)


def project_smooth(F, target_dim, spec, batch):
    """Average F over the coordinates beyond ``target_dim`` and keep the leading components.

    G(x) = int F(pi x + (1 - pi) y) mu(dy), then pi G.  The y-integral uses the
    fixed sample ``batch``, so the result is a deterministic smooth field; its
    ``se_fn`` reports the Monte Carlo standard error of each component.
    """
    target_dim = int(target_dim)
    if target_dim < 1:
        raise DegenerateError("projection onto zero modes is degenerate")
    if target_dim > spec.n:
        raise ShapeError(f"target dimension {target_dim} exceeds truncation {spec.n}")
    NF = F.base_dim
    if NF <= target_dim:
        return F
    Y = _points(batch, NF)[:, target_dim:NF]
    K = Y.shape[0]
    Np = target_dim

    def lifted(X):
        Z = np.empty(X.shape[:-1] + (K, NF))
        Z[..., :Np] = X[..., None, :Np]
        Z[..., Np:] = Y
        return Z

    def value(t, X):
        return F(t, lifted(X))[..., :Np].mean(axis=-2)

    def jac(t, X):
        return F.jacobian(t, lifted(X))[..., :Np, :Np].mean(axis=-3)

    def se(t, X):
        return F(t, lifted(X))[..., :Np].std(axis=-2, ddof=1) / np.sqrt(K)

    return CylinderVectorField(
        Np,
        value,
        jac,
        horizon=F.horizon,
        bounded=F.bounded,
        compact=False,
        integrable_order=F.integrable_order,
        name=f"proj{Np}({F.name})",
        se_fn=se,
    )
