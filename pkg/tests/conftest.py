import numpy as np
import pytest

from waffle.data import AgentDataBundle, LabeledDataset
from waffle.params import MiniBatch, ModelSpec


def central_difference(f, params, h=1e-5):
    """Per-coordinate central finite differences of a scalar function."""
    grad = np.zeros_like(params)
    for j in range(params.shape[0]):
        step = np.zeros_like(params)
        step[j] = h
        grad[j] = (f(params + step) - f(params - step)) / (2 * h)
    return grad


def random_batch(rng, input_dim, num_classes, n):
    return MiniBatch(rng.standard_normal((n, input_dim)), rng.integers(0, num_classes, size=n))


def make_bundle(rng, n_train=40, n_test=20, input_dim=4, num_classes=10):
    train = LabeledDataset(
        rng.standard_normal((n_train, input_dim)), rng.integers(0, num_classes, n_train), num_classes
    )
    test = LabeledDataset(
        rng.standard_normal((n_test, input_dim)), rng.integers(0, num_classes, n_test), num_classes
    )
    return AgentDataBundle(train=train, test=test)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_linear():
    return ModelSpec("linear_softmax", input_dim=4, num_classes=10)


# (criterion number, description, passed, detail) rows filled in by test_acceptance
ACCEPTANCE: list[tuple[int, str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, name, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}  ({detail})")
