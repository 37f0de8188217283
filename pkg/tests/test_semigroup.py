import numpy as np
import pytest

from hilbert_ou.cylinder import constant_function, cylinder_function, make_function, sp_linear, sp_quadratic, sp_sign
from hilbert_ou.errors import AccuracyError, DomainError
from hilbert_ou.semigroup import (
    MC,
    density_apply,
    density_grad_x,
    density_grad_y,
    density_rho,
    expectation,
    gh,
    grad_mehler,
    log_density_rho,
    mehler_apply,
    smoothing_probe,
)
from hilbert_ou.spectral import ou_operators, sample_gaussian

x1 = cylinder_function(sp_linear([1.0]), name="x1")
x1sq = cylinder_function(sp_quadratic([[1.0]]), name="x1^2")
sign = cylinder_function(sp_sign(1), name="sign")


def test_expectation_of_second_moment(spec64):
    est = expectation(lambda Y: Y[..., 0] ** 2 + Y[..., 1] ** 2, spec64, 2, gh(8, 2))
    assert float(est.value) == pytest.approx(1.25, abs=1e-13)


def test_mehler_linear(unit1):
    est = mehler_apply(x1, unit1, 2.0, 0.0, np.array([1.0]), gh(8, 1))
    assert float(est.value) == pytest.approx(np.exp(-1.0), abs=1e-12)


def test_mehler_fixes_constants(spec64):
    est = mehler_apply(constant_function(2.5), spec64, 0.3, 0.0, np.zeros(3), MC(m=1000, seed=1))
    assert float(est.value) == 2.5


def test_mehler_square(unit1):
    est = mehler_apply(x1sq, unit1, 2.0, 0.0, np.array([0.0]), gh(8, 1))
    assert float(est.value) == pytest.approx(1 - np.exp(-2.0), abs=1e-12)


def test_mehler_gh_matches_mc(spec64):
    u = make_function("tanh", w=[1.0, -0.5])
    x = np.array([0.4, -0.3])
    a = mehler_apply(u, spec64, 0.2, 0.0, x, gh(16, 2))
    b = mehler_apply(u, spec64, 0.2, 0.0, x, MC(m=200_000, seed=3))
    assert abs(float(a.value) - float(b.value)) <= 3 * float(b.err) + float(a.err)


def test_invariance_of_mu(spec64):
    """E_mu[P_eps u] = E_mu[u]: mu is invariant for the semigroup."""
    u = make_function("sine", w=[1.0, 0.5], phase=0.3)
    X = sample_gaussian(spec64, 40_000, 9, dims=2).data
    pu = mehler_apply(u, spec64, 0.5, 0.0, X, gh(12, 2)).value
    ref = mehler_apply(u, spec64, 0.0, 0.0, np.zeros(2), gh(16, 2))
    lhs = np.mean(pu)
    # E_mu u computed from the eps -> infinity limit P_inf u = E_mu u
    full = mehler_apply(u, spec64, 60.0, 0.0, np.zeros(2), gh(16, 2))
    assert abs(lhs - float(full.value)) <= 3 * np.std(pu) / np.sqrt(pu.size)
    assert float(ref.value) == pytest.approx(float(u(0.0, np.zeros(2))))


def test_mehler_is_a_contraction(spec64, rng):
    u = make_function("sign")
    X = rng.normal(size=(50, 1))
    v = mehler_apply(u, spec64, 0.1, 0.0, X, gh(16, 1)).value
    assert np.max(np.abs(v)) <= 1.0 + 1e-12


def test_density_value_at_origin(unit1):
    # (1 - e^{-2})^{-1/2} = 1.0754156...
    val = density_rho(unit1, 2.0, np.zeros(1), np.zeros(1))
    assert float(val) == pytest.approx((1 - np.exp(-2.0)) ** -0.5, abs=1e-14)
    assert float(val) == pytest.approx(1.075415, abs=1e-6)


def test_density_domain(unit1):
    with pytest.raises(DomainError):
        log_density_rho(unit1, 0.0, np.zeros(1), np.zeros(1))


def test_density_gradients_vanish_at_origin(spec64):
    z = np.zeros(4)
    assert np.all(density_grad_x(spec64, 0.3, z, z) == 0)
    assert np.all(density_grad_y(spec64, 0.3, z, z) == 0)


def test_density_gradients_finite_differences(spec64, rng):
    for _ in range(16):
        eps = 10 ** rng.uniform(-2, 0.5)
        x, y = rng.normal(size=(2, 3)) * np.sqrt(spec64.lambdas[:3])
        h = 1e-6
        fx = [(log_density_rho(spec64, eps, x + h * e, y) - log_density_rho(spec64, eps, x - h * e, y)) / (2 * h) for e in np.eye(3)]
        gx = density_grad_x(spec64, eps, x, y)
        assert np.linalg.norm(gx - fx) <= 1e-6 * max(np.linalg.norm(gx), 1.0)


@pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
def test_mehler_matches_density(spec64, eps):
    u = make_function("gauss", center=[0.2, 0.0], width=0.8)
    x = np.array([0.3, -0.2])
    a = mehler_apply(u, spec64, eps, 0.0, x, MC(m=200_000, seed=31))
    b = density_apply(u, spec64, eps, 0.0, x, MC(m=200_000, seed=32))
    assert abs(float(a.value) - float(b.value)) <= 3 * np.hypot(float(a.err), float(b.err))


def test_density_normalized(spec64):
    m = 200_000
    Y = sample_gaussian(spec64, m, 33, dims=2).data
    r = density_rho(spec64, 0.1, np.array([0.3, -0.2]), Y)
    assert abs(r.mean() - 1.0) <= 3 * r.std() / np.sqrt(m)


@pytest.mark.parametrize("form", ["smooth", "weight"])
def test_gradient_of_linear_function(unit1, form):
    g = grad_mehler(x1, unit1, 0.5, 0.0, np.array([0.7]), gh(12, 1), form=form)
    tau = ou_operators(unit1, 0.5).tau[0]
    assert g.value[0] == pytest.approx(tau, abs=1e-10)


def test_gradient_of_constant(spec64):
    g = grad_mehler(constant_function(1.0), spec64, 0.5, 0.0, np.zeros(2), gh(4, 1), full=2)
    assert np.all(g.value == 0)


def test_gradient_of_sign_at_origin(unit1):
    g = grad_mehler(sign, unit1, 0.01, 0.0, np.zeros(1), MC(m=200_000, seed=5), form="weight")
    o = ou_operators(unit1, 0.01)
    exact = 2 * o.tau[0] / (o.sigma[0] * np.sqrt(2 * np.pi))
    assert exact == pytest.approx(7.96, abs=0.01)
    assert abs(g.value[0] - exact) <= 3 * float(g.err[0])
    padded = grad_mehler(sign, unit1, 0.01, 0.0, np.zeros(1), gh(20, 1), form="weight", full=3)
    assert np.all(padded.value[1:] == 0)


def test_weight_form_accuracy_error(unit1):
    with pytest.raises(AccuracyError):
        grad_mehler(sign, unit1, 1e-4, 0.0, np.array([2.0]), MC(m=500, seed=1), form="weight")


def test_weight_form_needs_positive_eps(unit1):
    with pytest.raises(DomainError):
        grad_mehler(sign, unit1, 0.0, 0.0, np.zeros(1), gh(4, 1), form="weight")


def test_smoothing_slope_sign(unit1):
    res = smoothing_probe(sign, unit1, np.logspace(-3, 0, 7), gh(20, 1))
    assert abs(res.slope + 0.5) <= 0.1


def test_smoothing_slope_smooth_function(spec64):
    # |D P_eps sin(x1)| = tau e^{-sigma^2/2} |cos| <= 1: bounded, no eps^-1/2 growth
    res = smoothing_probe(make_function("sine", w=[1.0]), spec64, np.logspace(-3, -1, 5), gh(12, 1))
    assert np.all(res.sup <= 1.0 + 1e-12)
    assert abs(res.slope) <= 0.1


def test_smoothing_degenerate_fit(spec64):
    with pytest.warns(UserWarning):
        res = smoothing_probe(constant_function(1.0), spec64, np.logspace(-3, 0, 5), gh(4, 1), probes=np.zeros((3, 1)))
    assert res.slope == 0.0 and res.warning
