import numpy as np
import pytest

from hilbert_ou.commutator import ExponentTriple
from hilbert_ou.cylinder import (
    constant_field,
    constant_function,
    cylinder_function,
    linear_field,
    make_function,
    sine_field,
    sp_linear,
    sp_sine,
    zero_field,
)
from hilbert_ou.errors import TestClassError
from hilbert_ou.semigroup import gh
from hilbert_ou.spectral import build_spectrum, sample_gaussian
from hilbert_ou.transport import (
    BackwardSolution,
    backward_solution,
    dt_battery,
    flow,
    initial_ensemble,
    max_principle_check,
    pde_residual,
    push_forward,
    range_probe,
    resolve_convention,
    residual_probes,
    weak_residual,
)

SPEC = build_spectrum("power-law", 8)
GRID = np.linspace(0.0, 1.0, 33)


def test_flow_constant_field():
    x = np.array([0.2, -1.0])
    out = flow(constant_field([1.0]), SPEC, 0.25, 0.75, x)
    assert np.allclose(out, x + [0.5, 0.0], atol=1e-12)


def test_flow_linear_decay():
    out = flow(linear_field([[-1.0]]), SPEC, 0.0, 1.0, np.array([1.0]))
    assert abs(out[0] - np.exp(-1.0)) <= 1e-7 * np.exp(-1.0)


def test_convention_is_unique():
    rep = resolve_convention()
    assert rep.chosen == (-1.0, False)
    assert "-int_t^T" in rep.label


def test_backward_constant_data():
    u = BackwardSolution(constant_function(1.0), constant_field([1.0]), SPEC)
    X = np.array([[0.0], [2.0]])
    assert np.allclose(u(0.25, X), -0.75, atol=1e-12)
    assert np.all(u(1.0, X) == 0)


def test_backward_static_characteristics():
    f = cylinder_function(sp_linear([1.0]))
    X = np.array([[0.5], [-1.5]])
    assert np.allclose(backward_solution(f, zero_field(1), SPEC, 0.4, X), -0.6 * X[:, 0], atol=1e-12)


def test_residual_meter_calibration():
    t, X = residual_probes(SPEC, 8, dims=1, seed=1)
    zero = constant_function(0.0)
    assert pde_residual(zero, zero_field(1), zero, SPEC, t, X).max == 0.0
    r = pde_residual(zero, zero_field(1), constant_function(1.0), SPEC, t, X)
    assert np.allclose(r.values, 1.0)


def test_backward_residual_small():
    f = cylinder_function(sp_sine([1.0, 0.5]), "vanish")
    F = sine_field([1.0, 0.5], [[1.0, 0.3], [0.2, 1.0]])
    u = BackwardSolution(f, F, SPEC)
    t, X = residual_probes(SPEC, 64, dims=2, seed=4)
    assert pde_residual(u, F, f, SPEC, t, X).max <= 1e-3


def test_max_principle():
    t, X = residual_probes(SPEC, 32, dims=1, seed=6)
    t = np.concatenate([[0.0], t])
    X = np.concatenate([[[0.0]], X])
    one = constant_function(1.0)
    mp = max_principle_check(BackwardSolution(one, constant_field([0.7]), SPEC), one, t, X, 1.0)
    assert mp.u_max == pytest.approx(1.0) and mp.passed
    zero = constant_function(0.0)
    mp0 = max_principle_check(BackwardSolution(zero, constant_field([0.7]), SPEC), zero, t, X, 1.0)
    assert mp0.ratio == 0.0


def test_zero_field_keeps_particles_in_place():
    z = initial_ensemble(SPEC, 100, 1, dims=2)
    traj = push_forward(z, zero_field(2), SPEC, GRID)
    assert np.all(traj.path == traj.path[0])


def test_pushforward_passes_weak_form():
    z = initial_ensemble(SPEC, 4000, 2, dims=2)
    F = constant_field([1.0, 0.5])
    traj = push_forward(z, F, SPEC, GRID)
    for u in dt_battery():
        assert weak_residual(traj, u, F, SPEC).passed, u.name


def test_pushforward_passes_with_shifted_start():
    z = initial_ensemble(SPEC, 4000, 3, dims=2, shift=[0.5, -0.2])
    F = sine_field([1.0, 0.5], [[1.0, 0.3], [0.2, 1.0]])
    traj = push_forward(z, F, SPEC, GRID)
    for u in dt_battery()[:4]:
        assert weak_residual(traj, u, F, SPEC).passed, u.name


def test_frozen_particles_fail():
    z = initial_ensemble(SPEC, 4000, 5, dims=2)
    F = constant_field([1.0])
    traj = push_forward(z, F, SPEC, GRID).frozen()
    u = cylinder_function(sp_linear([1.0]), "vanish")  # <c, Du> = T - t > 0
    w = weak_residual(traj, u, F, SPEC)
    assert not w.passed and w.z >= 5


def test_weak_form_needs_terminal_zero():
    z = initial_ensemble(SPEC, 10, 1, dims=1)
    traj = push_forward(z, constant_field([1.0]), SPEC, GRID)
    with pytest.raises(TestClassError):
        weak_residual(traj, make_function("sine"), constant_field([1.0]), SPEC)


def test_battery_has_twelve_terminal_zero_functions():
    b = dt_battery(2.0)
    assert len(b) == 12 and all(u.terminal_zero for u in b)


@pytest.fixture(scope="module")
def range_setup():
    spec = build_spectrum("power-law", 64)
    batch = sample_gaussian(spec, 64, 12, dims=2)
    return spec, batch, ExponentTriple(4.0, 4.0, 2.0), np.linspace(0, 1, 5)


def test_range_probe_zero_source(range_setup):
    spec, batch, exps, grid = range_setup
    r = range_probe(constant_function(0.0), sine_field([1.0], [[1.0]]), spec, 0.1, 1, batch, exps, grid, gh(6, 1))
    assert float(r.total.value) == 0.0


def test_range_probe_decreases(range_setup):
    spec, batch, exps, grid = range_setup
    f = cylinder_function(sp_sine([1.0, 0.5]), "vanish")
    F = sine_field([1.0, 0.5], [[1.0, 0.3], [0.2, 1.0]])
    hi = range_probe(f, F, spec, 0.4, 2, batch, exps, grid, gh(8, 2))
    lo = range_probe(f, F, spec, 0.01, 2, batch, exps, grid, gh(8, 2))
    assert hi.middle_exact_zero
    assert float(hi.total.value) - float(lo.total.value) > 3 * np.hypot(float(hi.total.err), float(lo.total.err))
