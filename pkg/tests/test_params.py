import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from waffle.params import (
    MiniBatch,
    ModelSpec,
    init_params,
    loss_and_gradient,
    parameter_count,
    predict_accuracy,
)

from conftest import central_difference, random_batch


def test_parameter_counts():
    assert init_params(ModelSpec("linear_softmax", 2, 3), seed=7).shape == (9,)
    assert init_params(ModelSpec("mlp", 2, 3, (4,)), seed=0).shape == (27,)
    assert parameter_count(ModelSpec("mlp", 5, 10, (8, 6))) == 5 * 8 + 8 + 8 * 6 + 6 + 6 * 10 + 10


def test_init_is_deterministic_and_fan_in_scaled():
    spec = ModelSpec("mlp", 16, 10, (8,))
    a = init_params(spec, seed=3)
    assert np.array_equal(a, init_params(spec, seed=3))
    assert not np.array_equal(a, init_params(spec, seed=4))
    w1 = a[: 16 * 8]
    b1 = a[16 * 8 : 16 * 8 + 8]
    assert np.all(np.abs(w1) <= 1 / math.sqrt(16))
    assert np.all(b1 == 0)


def test_zero_params_give_uniform_loss(rng):
    spec = ModelSpec("linear_softmax", 5, 3)
    loss, grad = loss_and_gradient(spec, np.zeros(spec.num_params), random_batch(rng, 5, 3, 11))
    assert loss == pytest.approx(math.log(3), abs=1e-12)
    assert grad.shape == (spec.num_params,)


def test_duplicated_batch_is_mean_invariant(rng):
    spec = ModelSpec("mlp", 3, 4, (5,))
    params = init_params(spec, 1)
    batch = random_batch(rng, 3, 4, 7)
    doubled = MiniBatch(np.vstack([batch.features] * 2), np.concatenate([batch.labels] * 2))
    l1, g1 = loss_and_gradient(spec, params, batch)
    l2, g2 = loss_and_gradient(spec, params, doubled)
    assert l1 == pytest.approx(l2, rel=1e-12)
    np.testing.assert_allclose(g1, g2, rtol=1e-12, atol=1e-15)


def _fd_check(spec, seed):
    rng = np.random.default_rng(seed)
    params = init_params(spec, seed) + 0.1 * rng.standard_normal(spec.num_params)
    batch = random_batch(rng, spec.input_dim, spec.num_classes, 6)
    _, grad = loss_and_gradient(spec, params, batch)
    fd = central_difference(lambda p: loss_and_gradient(spec, p, batch)[0], params)
    # relative error with a floor so coordinates whose derivative vanishes are not over-weighted
    rel = np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-3)
    return rel.max()


@pytest.mark.parametrize("seed", range(50))
def test_linear_gradient_matches_finite_differences(seed):
    assert _fd_check(ModelSpec("linear_softmax", 3, 4), seed) <= 1e-4


@pytest.mark.parametrize("seed", range(50))
def test_mlp_gradient_matches_finite_differences(seed):
    assert _fd_check(ModelSpec("mlp", 3, 4, (5, 3)), seed) <= 1e-4


def test_dimension_and_label_errors(rng):
    spec = ModelSpec("linear_softmax", 3, 4)
    params = np.zeros(spec.num_params)
    with pytest.raises(ValueError, match="length"):
        loss_and_gradient(spec, np.zeros(5), random_batch(rng, 3, 4, 2))
    with pytest.raises(ValueError, match="features"):
        loss_and_gradient(spec, params, random_batch(rng, 2, 4, 2))
    with pytest.raises(ValueError, match="label out of range"):
        loss_and_gradient(spec, params, MiniBatch(np.zeros((1, 3)), [4]))


def test_accuracy_tie_break_and_perfect_classifier():
    spec = ModelSpec("linear_softmax", 2, 3)
    data = MiniBatch(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]), [0, 0, 0])
    assert predict_accuracy(spec, np.zeros(spec.num_params), data) == 1.0
    # identity-like weights: class k scores feature k
    w = np.array([[5.0, 0.0, 0.0], [0.0, 5.0, 0.0]])
    b = np.array([0.0, 0.0, 1.0])
    params = np.concatenate([w.ravel(), b])
    data = MiniBatch(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]), [0, 1, 2])
    assert predict_accuracy(spec, params, data) == 1.0
    with pytest.raises(ValueError):
        predict_accuracy(spec, params, MiniBatch(np.zeros((0, 2)), []))


def test_accuracy_matches_rowwise_count(rng):
    spec = ModelSpec("mlp", 4, 5, (6,))
    params = init_params(spec, 9)
    batch = random_batch(rng, 4, 5, 50)
    hits = 0
    for row, label in zip(batch.features, batch.labels):
        single = MiniBatch(row[None, :], [label])
        hits += predict_accuracy(spec, params, single) == 1.0
    assert predict_accuracy(spec, params, batch) == hits / 50


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), hidden=st.sampled_from([(), (3,), (4, 2)]))
def test_loss_nonnegative_and_descends(seed, hidden):
    spec = ModelSpec("mlp" if hidden else "linear_softmax", 3, 4, hidden)
    rng = np.random.default_rng(seed)
    params = init_params(spec, seed)
    batch = random_batch(rng, 3, 4, 8)
    loss, grad = loss_and_gradient(spec, params, batch)
    assert loss >= 0 and np.isfinite(loss) and np.all(np.isfinite(grad))
    if np.linalg.norm(grad) > 1e-8:
        stepped, _ = loss_and_gradient(spec, params - 1e-3 * grad, batch)
        assert stepped < loss


def test_vector_algebra_is_reproducible():
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal(100), rng.standard_normal(100)
    first = a + 0.3 * b
    for _ in range(3):
        assert np.array_equal(first, a + 0.3 * b)
