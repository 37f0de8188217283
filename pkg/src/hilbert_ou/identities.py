"""Closed-form Gaussian integrals of quadratic forms and their Monte Carlo oracles.

For x ~ N(0, Q) and a matrix L, with M = Q^{1/2} L Q^{1/2} and M_s its
symmetric part (eigenvalues beta_k):

* ``E exp(-eps <Lx, x>) = det(1 + 2 eps M_s)^{-1/2}``;
* ``S(eps) = E exp(-eps (<Lx, x> - Tr M))``, so S(0) = 1 and S'(0) = 0;
* the cumulants of ``Z = <Lx, x> - Tr M`` are ``2^{m-1} (m-1)! Tr M_s^m``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from .cylinder import div_q
from .errors import DivergentIntegralError, DomainError, IntegrabilityError, ShapeError
from .estimation import Estimate, mean_se
from .spectral import sample_gaussian

MAX_MOMENT = 12


@dataclass(frozen=True)
class QuadraticForm:
    """``L`` together with the derived sandwich ``M`` and symmetric part ``Ms``."""

    L: np.ndarray
    M: np.ndarray
    Ms: np.ndarray
    beta: np.ndarray
    root: np.ndarray

    @property
    def symmetric(self):
        return bool(np.allclose(self.L, self.L.T, rtol=0, atol=0))

    @property
    def support(self):
        """Number of leading coordinates L acts on (rows and columns past it are zero)."""
        nz = np.flatnonzero(np.any(self.L != 0, axis=0) | np.any(self.L != 0, axis=1))
        return int(nz[-1]) + 1 if nz.size else 1

    @property
    def trace(self):
        return float(np.trace(self.M))

    def trace_power(self, m):
        """Tr[Ms^m] by repeated matrix products."""
        return float(np.trace(np.linalg.matrix_power(self.Ms, int(m))))

    def check(self, spec):
        """Largest deviation between the stored M and one recomputed from L."""
        root = np.sqrt(spec.lambdas)
        return float(np.max(np.abs(root[:, None] * self.L * root[None, :] - self.M)))


def quadratic_form(L, spec):
    L = np.atleast_2d(np.asarray(L, dtype=float))
    n = spec.n
    if L.shape != (n, n):
        raise ShapeError(f"L must be {n} x {n}, got {L.shape}")
    root = np.sqrt(spec.lambdas)
    M = root[:, None] * L * root[None, :]
    Ms = 0.5 * (M + M.T)
    beta = np.linalg.eigvalsh(Ms)
    for a in (L, M, Ms, beta, root):
        a.setflags(write=False)
    return QuadraticForm(L, M, Ms, beta, root)


def _log_det_half(qf, eps):
    """``-1/2 log det(1 + 2 eps Ms)``; raises past the first eigenvalue with 1 + 2 eps beta <= 0."""
    eps = float(eps)
    arg = 1.0 + 2.0 * eps * qf.beta
    bad = np.flatnonzero(arg <= 0)
    if bad.size:
        k = int(bad[0])
        raise DivergentIntegralError(
            f"integral diverges: 1 + 2 eps beta_{k} = {arg[k]:.3g} <= 0 (beta = {qf.beta[k]:.6g})",
            index=k,
            eigenvalue=float(qf.beta[k]),
        )
    return -0.5 * np.sum(np.log1p(2.0 * eps * qf.beta))


def exp_quadratic_integral(qf, spec, eps):
    """``int exp(-eps <L x, x>) N_Q(dx) = det(1 + 2 eps Ms)^{-1/2}``."""
    return float(np.exp(_log_det_half(qf, eps)))


def log_laplace_S(qf, spec, eps):
    """``S(eps) = det(1 + 2 eps Ms)^{-1/2} exp(eps Tr Ms)``."""
    return float(np.exp(_log_det_half(qf, eps) + float(eps) * float(np.sum(qf.beta))))


def quadratic_cumulant(qf, spec, m):
    """m-th cumulant of ``<L x, x> - Tr M``: ``2^{m-1} (m-1)! Tr[Ms^m]`` (zero for m = 1)."""
    m = int(m)
    if m < 1:
        raise DomainError("cumulant order must be >= 1")
    if m == 1:
        return 0.0
    return float(2 ** (m - 1) * factorial(m - 1)) * qf.trace_power(m)


def moments_from_cumulants(kappa):
    """Raw moments ``mu_0..mu_m`` from cumulants ``kappa[1..m]`` (``kappa[0]`` unused).

    ``mu_j = sum_{k=1}^{j} C(j-1, k-1) kappa_k mu_{j-k}`` with integer binomials.
    """
    m = len(kappa) - 1
    mu = [1.0] + [0.0] * m
    for j in range(1, m + 1):
        mu[j] = sum(comb(j - 1, k - 1) * kappa[k] * mu[j - k] for k in range(1, j + 1))
    return mu


def central_moment(qf, spec, m):
    """Exact ``E[(<L x, x> - Tr M)^m]`` for ``1 <= m <= 12``."""
    m = int(m)
    if m < 1:
        raise DomainError("moment order must be >= 1")
    if m > MAX_MOMENT:
        raise DomainError(f"moment order {m} refused: only m <= {MAX_MOMENT} is supported")
    kappa = [0.0] + [quadratic_cumulant(qf, spec, k) for k in range(1, m + 1)]
    return moments_from_cumulants(kappa)[m]


@dataclass(frozen=True)
class SingleTraceCheck:
    """Fourth central moment against multiples of Tr[Ms^4] alone."""

    moment: float
    trace4: float
    trace2_sq: float
    ratio: float
    note: str


def single_trace_check(qf, spec):
    """The fourth moment is ``48 Tr Ms^4 + 12 (Tr Ms^2)^2``, not a fixed multiple of ``Tr Ms^4``."""
    mom = central_moment(qf, spec, 4)
    t4 = qf.trace_power(4)
    t2 = qf.trace_power(2)
    ratio = mom / t4 if t4 else float("inf")
    note = (
        f"E Z^4 = 48 Tr M^4 + 12 (Tr M^2)^2 = {mom:.17g}; "
        f"ratio to Tr M^4 is {ratio:.6g}, which depends on the form, so no single constant C_4 exists"
    )
    return SingleTraceCheck(mom, t4, t2 * t2, ratio, note)


# ---------------------------------------------------------------------------
# Monte Carlo oracles (never use the closed forms above)


def _quad(qf, X):
    d = X.shape[-1]
    return np.einsum("...i,ij,...j->...", X, qf.L[:d, :d], X)


def proposal_inflation(qf, eps):
    """Inflation of the sampling covariance that keeps the IS estimator's fourth moment finite.

    Sampling from N(0, kappa Q) the weighted integrand has finite fourth moment
    iff ``4 - 3/kappa + 8 eps beta_min > 0``; kappa is chosen with margin 1.
    """
    b = float(np.min(qf.beta)) * float(eps)
    if 1.0 + 8.0 * b >= 1.0:
        return 1.0
    if 3.0 + 8.0 * b <= 0:
        return 8.0
    return max(1.0, 3.0 / (3.0 + 8.0 * b))


def mc_exp_quadratic(qf, spec, eps, m=1_000_000, seed=0, inflation=None):
    """Monte Carlo ``E exp(-eps <L x, x>)`` with importance sampling when L is indefinite."""
    kappa = proposal_inflation(qf, eps) if inflation is None else float(inflation)
    batch = sample_gaussian(spec, m, seed, dims=qf.support, inflation=kappa)
    vals = np.exp(-float(eps) * _quad(qf, batch.data))
    return mean_se(vals, log_weights=batch.log_weights)


def mc_log_laplace_S(qf, spec, eps, m=1_000_000, seed=0):
    est = mc_exp_quadratic(qf, spec, eps, m, seed)
    return est.scale(np.exp(float(eps) * qf.trace))


def mc_central_moment(qf, spec, m_order, m=1_000_000, seed=0):
    batch = sample_gaussian(spec, m, seed, dims=qf.support)
    Z = _quad(qf, batch.data) - qf.trace
    return mean_se(Z ** int(m_order))


# ---------------------------------------------------------------------------
# L^p bound for the Q-divergence


@dataclass(frozen=True)
class DivergenceProbe:
    lhs: Estimate
    rhs_core: Estimate
    ratio: float
    C: float | None
    holds: bool


def divq_lp_probe(G, spec, p, batch, C=None, t=0.0):
    """``int |div_Q G|^p dmu`` against ``int (||DG||_HS^2 + |Q^{-1/2} G|^p) dmu``.

    With ``C`` given, ``holds`` reports ``lhs <= C * rhs_core`` (no error
    band: the calibrated constant already carries a 10% margin).
    """
    p = float(p)
    if not p > 1:
        raise DomainError("p must exceed 1")
    if p >= G.integrable_order:
        raise IntegrabilityError("int |div_Q G|^p dmu")
    N = G.base_dim
    X = batch.data[:, :N]
    dq = div_q(G, spec, t, X)
    J = G.jacobian(t, X)
    hs2 = np.sum(J * J, axis=(-2, -1))
    qh = np.linalg.norm(G(t, X) / np.sqrt(spec.lambdas[:N]), axis=-1)
    lhs = mean_se(np.abs(dq) ** p, log_weights=batch.log_weights)
    rhs = mean_se(hs2 + qh**p, log_weights=batch.log_weights)
    for name, e in (("int |div_Q G|^p dmu", lhs), ("int (||DG||^2 + |Q^{-1/2}G|^p) dmu", rhs)):
        if not np.isfinite(float(e.value)):
            raise IntegrabilityError(name)
    r = float(lhs.value) / float(rhs.value) if float(rhs.value) > 0 else 0.0
    holds = True if C is None else bool(float(lhs.value) <= C * float(rhs.value))
    return DivergenceProbe(lhs, rhs, r, C, holds)
