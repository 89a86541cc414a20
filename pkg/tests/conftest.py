"""Shared fixtures: small flat spaces and reproducible random measures."""

import numpy as np
import pytest

from cdknlab.measure import DiscreteMeasure
from cdknlab.mmspace import Grid1D, PointedSpace1D


def flat_space(a=0.0, b=1.0, n=256, base=None):
    """Lebesgue measure on [a, b] as a pointed space without singularities."""
    grid = Grid1D.uniform(a, b, n)
    p = 0.5 * (a + b) if base is None else base
    return PointedSpace1D(grid=grid, density=np.ones(n), singular_points=(),
                          base_point=float(p))


def random_measure(grid, rng, sparsity=0.0, total=1.0):
    """Random nonnegative cell masses, optionally zeroed out at random."""
    w = rng.uniform(0.0, 1.0, grid.n)
    if sparsity > 0.0:
        w[rng.uniform(size=grid.n) < sparsity] = 0.0
    if w.sum() == 0.0:
        w[rng.integers(grid.n)] = 1.0
    return DiscreteMeasure(grid, w * (total / w.sum()))


@pytest.fixture
def lebesgue():
    return flat_space()


@pytest.fixture
def rng():
    return np.random.default_rng(20240814)
