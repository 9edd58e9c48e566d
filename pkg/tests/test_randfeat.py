import numpy as np
import pytest
from scipy import integrate

from src.errors import DegenerateInputError, InvalidArgumentError, InvalidStateError
from src.randfeat import (
    bernstein_bound,
    expected_kernel,
    feature_matrix,
    induced_kernel,
    multiscale_bound,
    multiscale_kernel_limit,
    regenerate,
    sample_feature_map,
    sample_msrff,
    sample_rff,
    sample_sigmoid,
)


@pytest.fixture
def latent_points():
    return np.random.default_rng(2).uniform(-1.0, 1.0, (2, 12))


def test_sampling_is_seeded():
    a = sample_rff(2, 64, 0.5, seed=3)
    b = sample_rff(2, 64, 0.5, seed=3)
    c = sample_rff(2, 64, 0.5, seed=4)
    assert np.array_equal(a.W, b.W) and np.array_equal(a.b, b.b)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != c.fingerprint()


@pytest.mark.parametrize("fmap", [
    sample_rff(2, 40, 0.3, seed=1),
    sample_msrff(2, 40, 10, 6.0, seed=1),
    sample_sigmoid(np.array([[0.0, 1.0], [-2.0, 2.0]]), 40, 8.0, seed=1),
])
def test_regenerate_from_header(fmap):
    again = regenerate(fmap.to_header())
    assert np.array_equal(again.W, fmap.W)
    assert np.array_equal(again.b, fmap.b)


def test_regenerate_detects_tampered_header():
    header = sample_rff(2, 16, 0.3, seed=1).to_header()
    header["params"]["sigma_w"] = 0.31
    with pytest.raises(InvalidStateError):
        regenerate(header)


def test_msrff_needs_q_dividing_p():
    with pytest.raises(InvalidArgumentError):
        sample_msrff(2, 25, 10, 6.0, seed=0)
    with pytest.raises(InvalidArgumentError):
        sample_msrff(2, 20, 10, 0.0001, seed=0)


def test_msrff_rows_share_their_scale():
    fmap = sample_msrff(3, 30, 10, 6.0, seed=5)
    assert fmap.scales.shape == (10,)
    assert np.all((fmap.scales >= 0.001) & (fmap.scales < 6.0))


def test_sigmoid_centres_lie_in_training_box():
    Y = np.random.default_rng(0).normal(size=(2, 50))
    fmap = sample_sigmoid(Y, 200, 8.0, seed=2)
    lo, hi = Y.min(axis=1), Y.max(axis=1)
    assert np.all((fmap.centers >= lo) & (fmap.centers <= hi))
    assert np.all(np.abs(fmap.W) <= 8.0)
    # the inflection point of every unit sits at its centre
    np.testing.assert_allclose(np.sum(fmap.W * fmap.centers, axis=1) + fmap.b, 0.0, atol=1e-12)


def test_sigmoid_degenerate_box():
    with pytest.raises(DegenerateInputError):
        sample_sigmoid(np.ones((2, 5)), 10, 1.0, seed=0)


def test_sigmoid_dispatch_needs_training_embedding():
    with pytest.raises(InvalidArgumentError):
        sample_feature_map("sigmoid", 2, 10, {"c": 1.0}, seed=0)


def test_feature_matrix_layout(latent_points):
    fmap = sample_sigmoid(latent_points, 30, 4.0, seed=0)
    Phi = feature_matrix(fmap, latent_points)
    assert Phi.shape == (12, 31)
    assert np.all(Phi[:, 0] == 1.0)
    assert np.all((Phi[:, 1:] > 0) & (Phi[:, 1:] < 1))

    with pytest.raises(InvalidArgumentError):
        feature_matrix(fmap, np.zeros((3, 2)))


def test_rff_kernel_concentrates(latent_points):
    P = 10000
    fmap = sample_rff(2, P, 1.5, seed=7)
    err = np.abs(induced_kernel(fmap, latent_points) - expected_kernel(fmap, latent_points)).max()
    assert err <= 5 / np.sqrt(P)


def test_msrff_kernel_concentrates_on_scale_mixture(latent_points):
    P, Q = 10000, 10
    fmap = sample_msrff(2, P, Q, 6.0, seed=7)
    err = np.abs(induced_kernel(fmap, latent_points) - expected_kernel(fmap, latent_points)).max()
    assert err <= 5 / np.sqrt(P / Q)


def test_multiscale_limit_matches_quadrature():
    Y = np.array([[0.0, 0.7]])
    a, b = 0.001, 6.0
    K = multiscale_kernel_limit(Y, a, b)
    ref, _ = integrate.quad(lambda s: np.exp(-0.5 * (s * 0.7) ** 2), a, b)
    assert K[0, 1] == pytest.approx(ref / (b - a), rel=1e-8)
    assert K[0, 0] == 1.0


def test_sigmoid_has_no_expected_kernel(latent_points):
    fmap = sample_sigmoid(latent_points, 10, 1.0, seed=0)
    with pytest.raises(InvalidStateError):
        expected_kernel(fmap, latent_points)


def test_bounds_shrink_with_more_features():
    b = [bernstein_bound(50, 10.0, P) for P in (100, 1000, 10000)]
    assert all(x > 0 for x in b)
    assert b[0] > b[1] > b[2]
    assert multiscale_bound(50, 10.0, 1000, 10) > multiscale_bound(50, 10.0, 10000, 10)
