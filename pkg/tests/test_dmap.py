import numpy as np
import pytest

from src.dmap import (
    dm_encode,
    dm_fit,
    gaussian_kernel,
    load_dm_model,
    median_pairwise_distance,
    nystrom_weights,
    save_dm_model,
)
from src.errors import DegenerateInputError, EncodingError, InvalidArgumentError


def test_lower_median_of_pairwise_distances():
    assert median_pairwise_distance(np.array([[0.0, 1.0, 3.0]])) == 2.0
    # six distances 1,1,2,2,3,4: lower median is the third
    assert median_pairwise_distance(np.array([[0.0, 1.0, 2.0, 4.0]])) == 2.0


def test_gaussian_kernel_has_unit_diagonal(bump_pairs):
    _, X = bump_pairs
    K = gaussian_kernel(X, X, 0.1)
    np.testing.assert_allclose(np.diag(K), 1.0)
    np.testing.assert_array_equal(K, K.T)


def test_embedding_vectors_are_right_eigenvectors(bump_dm):
    T = bump_dm.transition_matrix()
    np.testing.assert_allclose(T.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(T @ bump_dm.V, bump_dm.V * bump_dm.xi[None, :], atol=1e-10)
    assert np.all(np.diff(bump_dm.xi) <= 0)
    assert bump_dm.extra["trivial_eigenvalue"] == pytest.approx(1.0, abs=1e-10)


def test_nystrom_on_training_points_reproduces_embedding(bump_pairs, bump_dm):
    _, X = bump_pairs
    Y = bump_dm.embedding().Y
    Y_again = dm_encode(bump_dm, X.copy()).Y
    np.testing.assert_allclose(Y_again, Y, atol=1e-8 * np.abs(Y).max())


def test_nystrom_rows_are_stochastic(bump_pairs, bump_dm):
    _, X = bump_pairs
    W = nystrom_weights(bump_dm, X[:, :5] + 1e-3)
    assert W.shape == (5, X.shape[1])
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)


def test_rms_scaling_multiplies_by_sqrt_n(bump_pairs):
    _, X = bump_pairs
    unit = dm_fit(X, d=2, coord_scale="unit").embedding().Y
    rms = dm_fit(X, d=2, coord_scale="rms").embedding().Y
    np.testing.assert_allclose(rms, np.sqrt(X.shape[1]) * unit, rtol=1e-12)


def test_isolated_point_cannot_be_encoded(bump_pairs, bump_dm):
    _, X = bump_pairs
    with pytest.raises(EncodingError):
        dm_encode(bump_dm, X[:, :1] + 1e3)


def test_wrong_ambient_dimension_rejected(bump_dm):
    with pytest.raises(InvalidArgumentError):
        dm_encode(bump_dm, np.zeros((3, 1)))


@pytest.mark.parametrize("kwargs", [
    {"d": 0},
    {"d": 200},
    {"alpha": 2.0},
    {"w1": 0.0},
    {"coord_scale": "max"},
])
def test_dm_fit_rejects_bad_arguments(bump_pairs, kwargs):
    _, X = bump_pairs
    with pytest.raises(InvalidArgumentError):
        dm_fit(X, **kwargs)


def test_identical_points_are_degenerate():
    with pytest.raises(DegenerateInputError):
        dm_fit(np.ones((4, 10)))


def test_saved_model_encodes_identically(tmp_path, bump_pairs, bump_dm):
    _, X = bump_pairs
    save_dm_model(tmp_path / "dm", bump_dm)
    loaded = load_dm_model(tmp_path / "dm")
    assert loaded.epsilon1 == bump_dm.epsilon1
    assert loaded.coord_scale == "rms"
    np.testing.assert_array_equal(dm_encode(loaded, X[:, :7]).Y, dm_encode(bump_dm, X[:, :7]).Y)


def test_fitted_and_loaded_eigenvectors_share_memory_layout(tmp_path, bump_dm):
    save_dm_model(tmp_path / "dm", bump_dm)
    loaded = load_dm_model(tmp_path / "dm")
    assert bump_dm.V.flags.c_contiguous
    assert loaded.V.flags.c_contiguous
    np.testing.assert_array_equal(loaded.V, bump_dm.V)
