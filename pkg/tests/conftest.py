"""Shared fixtures: small closed-form functions on Gaussian space."""

import numpy as np
import pytest

from gauss_nisim.core.functions import vertex_function


@pytest.fixture
def halfspace():
    """e_0 where x_1 > 0, e_1 elsewhere (n=1, k=2)."""
    return vertex_function(1, 2, lambda x: np.where(x[:, 0] > 0, 0, 1), "halfspace")


@pytest.fixture
def halfspace_2d():
    """Halfspace split in the first coordinate of R^2."""
    return vertex_function(2, 2, lambda x: np.where(x[:, 0] > 0, 0, 1), "halfspace2")


@pytest.fixture
def three_way():
    """Plurality of three linear forms on R^2 (k=3)."""
    W = np.array([[1.0, 0.0], [-0.5, 0.8], [-0.5, -0.8]])
    return vertex_function(2, 3, lambda x: np.argmax(x @ W.T, axis=1), "three_way")
