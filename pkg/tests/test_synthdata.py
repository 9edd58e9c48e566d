import numpy as np
import pytest

from src.errors import DegenerateInputError, InvalidArgumentError
from src.synthdata import (
    SplitSpec,
    gen_phantom,
    gen_rotated_images,
    gen_scurve_20d,
    gen_swiss_roll,
    scurve_projection,
    split,
)


####################
# Swiss roll and S-curve
####################

def test_swiss_roll_pinned_parameters():
    ds = gen_swiss_roll(1, noise_sigma=0.0, theta=np.pi, z=0.0)
    np.testing.assert_allclose(ds.X[:, 0], [0.0, -np.pi / 4, 0.0], atol=1e-12)

    ds = gen_swiss_roll(2, noise_sigma=0.0, theta=[1.5 * np.pi, 2 * np.pi], z=[0.0, 0.0])
    np.testing.assert_allclose(ds.X[:, 0], [-3 * np.pi / 8, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(ds.X[:, 1], [0.0, np.pi / 2, 0.0], atol=1e-12)


def test_swiss_roll_ranges_and_determinism():
    a = gen_swiss_roll(500, seed=3)
    b = gen_swiss_roll(500, seed=3)
    assert np.array_equal(a.X, b.X)
    theta, z = a.intrinsic
    assert theta.min() >= np.pi and theta.max() < 4 * np.pi
    assert z.min() >= -5.0 and z.max() < 5.0
    assert a.mass_preserving is False


def test_swiss_roll_rejects_bad_arguments():
    with pytest.raises(InvalidArgumentError):
        gen_swiss_roll(0)
    with pytest.raises(InvalidArgumentError):
        gen_swiss_roll(10, noise_sigma=-1.0)


@pytest.mark.parametrize("gen", [gen_swiss_roll, gen_scurve_20d])
def test_sampled_intrinsics_need_four_points(gen):
    with pytest.raises(InvalidArgumentError, match="at least 4"):
        gen(3)
    assert gen(4).N == 4


def test_scurve_projection_is_orthonormal():
    R = scurve_projection(5)
    assert R.shape == (20, 3)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)


def test_scurve_origin_and_norm():
    ds = gen_scurve_20d(1, noise_sigma=0.0, theta=0.0, w=0.0)
    np.testing.assert_allclose(ds.X[:, 0], np.zeros(20), atol=1e-12)

    # z = (1, 0.5, -1) has norm 1.5 and R is an isometry
    ds = gen_scurve_20d(1, noise_sigma=0.0, theta=np.pi / 2, w=0.5)
    assert np.linalg.norm(ds.X[:, 0]) == pytest.approx(1.5, abs=1e-12)


####################
# Rotated images
####################

def test_first_column_is_unrotated_image():
    base = gen_phantom(32)
    ds = gen_rotated_images(base, 8)
    np.testing.assert_allclose(ds.X[:, 0], (base / base.sum()).ravel(order="F"), atol=1e-15)
    assert ds.intrinsic[0, 0] == 0.0


def test_centered_disk_is_invariant_under_quarter_turns():
    yy, xx = np.mgrid[0:33, 0:33]
    disk = ((xx - 16) ** 2 + (yy - 16) ** 2 <= 100).astype(float)
    ds = gen_rotated_images(disk, 4)
    for i in range(1, 4):
        np.testing.assert_allclose(ds.X[:, i], ds.X[:, 0], atol=1e-6)


def test_rotated_columns_have_unit_mass():
    ds = gen_rotated_images(gen_phantom(32), 6, seed=2, random_angles=True)
    np.testing.assert_allclose(ds.X.sum(axis=0), 1.0, atol=1e-12)
    assert ds.mass_preserving is True
    assert np.all((ds.intrinsic >= 0) & (ds.intrinsic < 2 * np.pi))


def test_phantom_is_not_rotation_symmetric():
    img = gen_phantom(64)
    assert img.max() == pytest.approx(1.0)
    rel = np.linalg.norm(np.rot90(img) - img) / np.linalg.norm(img)
    assert rel >= 0.05
    assert np.array_equal(img, gen_phantom(64))


def test_zero_image_is_degenerate():
    with pytest.raises(DegenerateInputError):
        gen_rotated_images(np.zeros((16, 16)), 3)


def test_negative_image_is_rejected():
    with pytest.raises(InvalidArgumentError):
        gen_rotated_images(-np.ones((16, 16)), 3)


####################
# Splits
####################

def test_split_is_a_seeded_partition():
    ds = gen_swiss_roll(50, seed=1)
    train, val, test = split(ds, SplitSpec(30, 5, seed=9))
    idx = train.meta["indices"] + val.meta["indices"] + test.meta["indices"]
    assert sorted(idx) == list(range(50))
    assert (train.N, val.N, test.N) == (30, 5, 15)

    again, _, _ = split(ds, SplitSpec(30, 5, seed=9))
    assert again.meta["indices"] == train.meta["indices"]


def test_split_rejects_inconsistent_counts():
    ds = gen_swiss_roll(10)
    with pytest.raises(InvalidArgumentError):
        split(ds, SplitSpec(8, 1, 5))
    with pytest.raises(InvalidArgumentError):
        split(ds, SplitSpec(11, 0))
