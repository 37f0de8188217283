import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hilbert_ou.errors import DomainError, EmptyBatchError, InvalidSpectrumError, OrderingError, ShapeError
from hilbert_ou.spectral import build_spectrum, ou_operators, rotate_pair, sample_gaussian


def test_power_law_values():
    spec = build_spectrum("power-law", 3, gamma=2.0)
    assert np.allclose(spec.lambdas, [1.0, 0.25, 1.0 / 9.0], rtol=0, atol=1e-15)


def test_explicit_values():
    assert build_spectrum("explicit", values=[1.0]).lambdas.tolist() == [1.0]


def test_explicit_unsorted_is_ordering_error():
    with pytest.raises(OrderingError):
        build_spectrum("explicit", values=[0.25, 1.0])


@pytest.mark.parametrize("bad", [[1.0, 0.0], [1.0, -0.5], [np.inf], []])
def test_nonpositive_or_empty_spectrum_rejected(bad):
    with pytest.raises(InvalidSpectrumError):
        build_spectrum("explicit", values=bad)


def test_operators_lambda_one_t_two(unit1):
    o = ou_operators(unit1, 2.0)
    assert o.tau[0] == pytest.approx(np.exp(-1.0), abs=1e-15)
    # sigma = sqrt(1 - e^{-2}) = 0.9298734950...
    assert o.sigma[0] == pytest.approx(np.sqrt(1 - np.exp(-2.0)), abs=1e-15)
    assert o.sigma[0] == pytest.approx(0.929873, abs=1e-6)
    assert o.qt[0] == pytest.approx(0.864665, abs=1e-6)


def test_operators_two_modes():
    o = ou_operators(build_spectrum("explicit", values=[1.0, 0.25]), 1.0)
    assert np.allclose(o.tau, [0.606531, 0.135335], atol=1e-6)


def test_operators_at_zero_are_identity(spec64):
    o = ou_operators(spec64, 0.0)
    assert np.all(o.tau == 1.0) and np.all(o.sigma == 0.0) and np.all(o.qt == 0.0)


def test_negative_time_is_domain_error(spec64):
    with pytest.raises(DomainError):
        ou_operators(spec64, -1e-3)


@settings(max_examples=200, deadline=None)
@given(
    lam=st.floats(1e-4, 1e2),
    t=st.floats(0.0, 50.0),
)
def test_pythagoras_within_four_ulps(lam, t):
    o = ou_operators(build_spectrum("explicit", values=[lam]), t)
    assert abs(o.tau[0] ** 2 + o.sigma[0] ** 2 - 1.0) <= 4 * np.finfo(float).eps


@settings(max_examples=100, deadline=None)
@given(s=st.floats(0, 5), t=st.floats(0, 5))
def test_semigroup_composition(s, t):
    spec = build_spectrum("explicit", values=[2.0, 0.5, 0.1])
    a = ou_operators(spec, s).tau * ou_operators(spec, t).tau
    b = ou_operators(spec, s + t).tau
    assert np.all(np.abs(a - b) <= 1e-12 * b)


def test_variance_band_seed_seven(unit1):
    b = sample_gaussian(unit1, 100_000, 7)
    assert 0.985 <= np.var(b.data[:, 0]) <= 1.015


def test_covariance_band():
    spec = build_spectrum("explicit", values=[1.0, 0.25])
    m = 100_000
    X = sample_gaussian(spec, m, 3).data
    assert abs(np.mean(X[:, 0] * X[:, 1])) <= 3 * np.sqrt(0.25 / m)


def test_sampling_is_deterministic(spec64):
    a = sample_gaussian(spec64, 5000, 11).data
    b = sample_gaussian(spec64, 5000, 11).data
    assert np.array_equal(a, b)


def test_sampling_independent_of_worker_count(spec64):
    a = sample_gaussian(spec64, 40_000, 5, workers=1).data
    b = sample_gaussian(spec64, 40_000, 5, workers=3).data
    assert np.array_equal(a, b)


def test_leading_dims_are_a_prefix(spec64):
    full = sample_gaussian(spec64, 3000, 2).data
    head = sample_gaussian(spec64, 3000, 2, dims=5).data
    assert np.array_equal(full[:, :5], head)


def test_empty_batch_rejected(spec64):
    with pytest.raises(EmptyBatchError):
        sample_gaussian(spec64, 0, 1)


def test_inflated_batch_weights_average_to_one(unit1):
    b = sample_gaussian(unit1, 200_000, 4, inflation=2.0)
    w = np.exp(b.log_weights)
    assert abs(w.mean() - 1.0) <= 3 * w.std() / np.sqrt(w.size)


def test_rotation_at_zero_is_identity(spec64, rng):
    x, y = rng.normal(size=(2, 10, 64))
    x1, y1 = rotate_pair(x, y, ou_operators(spec64, 0.0))
    assert np.array_equal(x1, x) and np.array_equal(y1, y)


def test_rotation_large_eps_is_quarter_turn(unit1, rng):
    x, y = rng.normal(size=(2, 7, 1))
    x1, y1 = rotate_pair(x, y, ou_operators(unit1, 200.0))
    assert np.allclose(x1, y, atol=1e-12) and np.allclose(y1, -x, atol=1e-12)


def test_rotation_shape_mismatch(spec64):
    with pytest.raises(ShapeError):
        rotate_pair(np.zeros((3, 64)), np.zeros((3, 63)), ou_operators(spec64, 0.1))
