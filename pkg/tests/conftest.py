"""
Shared fixtures for the RANDSMAP test suite
"""
import numpy as np
import pytest

from src.dmap import dm_fit


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def bump_pairs():
    """
    Unit-mass Gaussian bumps on 50 cells, driven by (centre, width)

    Returns latent parameters (2 x 120) and densities (50 x 120).
    """
    r = np.random.default_rng(7)
    n = 120
    centers = r.uniform(0.3, 0.7, n)
    widths = r.uniform(0.05, 0.1, n)
    x = np.linspace(0.0, 1.0, 50)
    X = np.exp(-((x[:, None] - centers[None, :]) ** 2) / (2 * widths[None, :] ** 2))
    X /= X.sum(axis=0)
    Y = np.vstack([4.0 * centers, 20.0 * widths])
    return Y, X


@pytest.fixture
def bump_dm(bump_pairs):
    """Diffusion Maps model of the bump densities with unit-RMS coordinates"""
    _, X = bump_pairs
    return dm_fit(X, alpha=1.0, w1=1.0, d=2, coord_scale="rms")


@pytest.fixture
def dirichlet_columns():
    """Random column-stochastic 5 x 6 matrix"""
    r = np.random.default_rng(11)
    return r.dirichlet(np.ones(5), size=6).T
