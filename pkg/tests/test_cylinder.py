import numpy as np
import pytest

from hilbert_ou.cylinder import (
    PROFILES,
    bump_field,
    catalog_is_bounded,
    constant_field,
    constant_function,
    cylinder_function,
    div_q,
    fd_gradient,
    fd_time,
    field_from_components,
    function_lr_norm,
    linear_field,
    make_field,
    make_function,
    project_smooth,
    qhalf_inverse_norm,
    random_bounded_field,
    random_bounded_function,
    schatten_trace_norm,
    sine_field,
    sobolev_norm,
    sp_constant,
    sp_gauss,
    sp_poly_trig,
    sp_sine,
    tanh_field,
    zero_field,
)
from hilbert_ou.errors import ConfigError, DegenerateError, IntegrabilityError, ShapeError
from hilbert_ou.spectral import build_spectrum, sample_gaussian

GRID = np.linspace(0.0, 1.0, 5)


@pytest.fixture(scope="module")
def batch1():
    return sample_gaussian(build_spectrum("explicit", values=[1.0, 0.25]), 200_000, 21)


def within3(est, target):
    return abs(float(est.value) - target) <= 3 * float(est.err) + 1e-12


def test_div_q_linear_field_at_origin(unit1):
    F = linear_field([[1.0]])
    assert float(div_q(F, unit1, 0.0, np.array([0.0]))) == pytest.approx(1.0)


def test_div_q_linear_field_at_two(unit1):
    F = linear_field([[1.0]])
    assert float(div_q(F, unit1, 0.0, np.array([2.0]))) == pytest.approx(-3.0)


def test_div_q_constant_field(unit1):
    x = np.linspace(-2, 2, 9)[:, None]
    assert np.allclose(div_q(constant_field([2.5]), unit1, 0.0, x), -2.5 * x[:, 0])


def test_function_gradients_match_differences(rng):
    T = 1.0
    for prof in PROFILES:
        u = cylinder_function(sp_poly_trig(rng.normal(size=3), 0.3, rng.normal(size=3), 0.4, 0.1 * rng.normal(size=(3, 3))), prof, T)
        X = rng.normal(size=(20, 3))
        t = 0.37
        assert np.allclose(u.grad(t, X), fd_gradient(u, t, X, 3), atol=1e-7)
        assert np.allclose(u.dt(t, X), fd_time(u, t, X, T), atol=1e-6)


def test_terminal_zero_profiles():
    for prof in ("vanish", "cos", "vanish2"):
        u = cylinder_function(sp_sine([1.0]), prof, 2.0)
        assert u.terminal_zero
        assert np.allclose(u(2.0, np.array([[0.3], [1.2]])), 0.0, atol=1e-15)
    assert not cylinder_function(sp_sine([1.0]), "one").terminal_zero


def test_function_algebra(rng):
    a = cylinder_function(sp_sine([1.0]))
    b = cylinder_function(sp_gauss([0.0, 0.0]))
    X = rng.normal(size=(6, 3))
    c = (a + b) * 2.0 - b
    assert c.base_dim == 2
    assert np.allclose(c(0.0, X), 2 * a(0.0, X) + b(0.0, X))
    assert np.allclose(c.grad(0.0, X), fd_gradient(c, 0.0, X, 2), atol=1e-7)


def test_points_need_base_dim():
    u = cylinder_function(sp_gauss([0.0, 0.0]))
    with pytest.raises(ShapeError):
        u(0.0, np.zeros((3, 1)))


def test_field_jacobians_match_differences(rng):
    fields = [
        sine_field([1.0, 0.5], [[1.0, 0.3], [0.2, 1.0]]),
        tanh_field([0.8, 0.4], [[1.0, 0.0], [0.5, 1.0]], profile="cos"),
        bump_field([1.0, 0.5], [0.1, 0.0], 1.5),
        linear_field([[-1.0, 0.2], [0.0, -0.5]], [0.1, 0.2], profile="ramp"),
        random_bounded_field(rng, 2),
    ]
    X = rng.normal(size=(15, 2)) * 0.7
    for F in fields:
        J = F.jacobian(0.4, X)
        h = 1e-6
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            col = (F(0.4, X + e) - F(0.4, X - e)) / (2 * h)
            assert np.allclose(J[:, :, k], col, atol=1e-6), F.name


def test_field_from_components():
    F = field_from_components([sp_sine([1.0, 0.0]), sp_constant(2.0)])
    X = np.array([[0.5, 1.0]])
    assert np.allclose(F(0.0, X), [[np.sin(0.5), 2.0]])


def test_field_full_padding():
    F = constant_field([1.0])
    v = F(0.0, np.zeros((4, 3)), full=3)
    assert v.shape == (4, 3) and np.all(v[:, 1:] == 0)


def test_catalog_lookup_and_boundedness():
    assert make_function("sine", w=[1.0, 0.5]).base_dim == 2
    assert make_field("bump", c=[1.0], center=[0.0]).compact
    assert catalog_is_bounded("function", "tanh")
    assert not catalog_is_bounded("field", "linear")
    with pytest.raises(KeyError):
        make_function("no-such-function")


def test_random_bounded_draws_are_bounded(rng):
    X = rng.normal(size=(2000, 2)) * 10
    u = random_bounded_function(rng, 2)
    F = random_bounded_field(rng, 2)
    assert u.bounded and F.bounded
    assert np.all(np.isfinite(u(0.5, X))) and np.max(np.abs(F(0.5, X))) < 50


def test_sobolev_norm_zero_and_constant(batch1):
    assert float(sobolev_norm(zero_field(1), 2, None, batch1, GRID).value) == 0.0
    assert float(sobolev_norm(constant_field([1.0]), 2, None, batch1, GRID).value) == pytest.approx(1.0, abs=1e-12)


def test_sobolev_norm_linear_is_sqrt_two(batch1):
    assert within3(sobolev_norm(linear_field([[1.0]]), 2, None, batch1, GRID), np.sqrt(2.0))


def test_qhalf_norm_examples(batch1):
    spec = build_spectrum("explicit", values=[1.0, 0.25])
    assert float(qhalf_inverse_norm(zero_field(2), 2, spec, batch1, GRID).value) == 0.0
    F = constant_field([0.0, 1.0])
    assert float(qhalf_inverse_norm(F, 2, spec, batch1, GRID).value) == pytest.approx(2.0, abs=1e-12)
    assert within3(qhalf_inverse_norm(linear_field([[1.0]]), 2, spec, batch1, GRID), 1.0)


def test_function_norm_and_schatten(batch1):
    assert float(function_lr_norm(constant_function(3.0), 4, batch1, GRID).value) == pytest.approx(3.0)
    F = linear_field([[2.0, 0.0], [0.0, -1.0]])
    # singular values 2 and 1, so the Schatten 2-norm is sqrt(5) everywhere
    assert float(schatten_trace_norm(F, 2, batch1, GRID).value) == pytest.approx(np.sqrt(5.0))


def test_unbounded_norm_integrability_error(batch1):
    F = linear_field([[1.0]])
    F_bad = type(F)(**{**F.__dict__, "integrable_order": 2.0})
    with pytest.raises(IntegrabilityError):
        sobolev_norm(F_bad, 3, None, batch1, GRID)


def test_empty_time_grid_is_config_error(batch1):
    with pytest.raises(ConfigError):
        sobolev_norm(constant_field([1.0]), 2, None, batch1, [])


def test_projection_keeps_low_dimensional_field(spec64, batch1):
    F = sine_field([1.0], [[1.0]])
    assert project_smooth(F, 2, spec64, batch1) is F


def test_projection_integrates_out_second_coordinate(spec64):
    batch = sample_gaussian(spec64, 50_000, 8, dims=2)
    F = linear_field([[0.0, 1.0], [0.0, 0.0]])  # F(x) = x2 e1
    G = project_smooth(F, 1, spec64, batch)
    X = np.array([[0.3], [-1.0]])
    v = G(0.0, X)[:, 0]
    assert np.all(np.abs(v) <= 3 * G.se_fn(0.0, X)[:, 0])


def test_projection_of_constant_field(spec64, batch1):
    G = project_smooth(constant_field([1.5, 0.0, 2.0]), 1, spec64, sample_gaussian(spec64, 100, 1, dims=3))
    assert np.allclose(G(0.0, np.zeros((3, 1))), 1.5)


def test_projection_to_zero_modes(spec64, batch1):
    with pytest.raises(DegenerateError):
        project_smooth(sine_field([1.0, 1.0], np.eye(2)), 0, spec64, batch1)
