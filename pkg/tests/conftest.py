import numpy as np
import pytest

from conicsvm.core import LabeledDataset


def random_instance(rng, n, p, noise=0.3, intercept=False):
    """Roughly separable data with a few labels flipped."""
    X = rng.normal(size=(n, p))
    w = rng.normal(size=p)
    y = np.where(X @ w >= 0, 1.0, -1.0)
    flip = rng.random(n) < noise
    y[flip] *= -1
    if intercept:
        X = np.hstack([np.ones((n, 1)), X])
    return LabeledDataset(X, y, intercept_embedded=intercept)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_points():
    # x = +-1, y = +-1, p = 1
    return LabeledDataset(np.array([[1.0], [-1.0]]), np.array([1.0, -1.0]))
