"""
Synthetic manifold datasets: Swiss roll, 20-D S-curve and rotated images

Every generator is a pure function of its parameters and seed.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from src.containers import DataSet
from src.errors import DegenerateInputError, InvalidArgumentError
from src.rng import gaussian, make_rng, uniform

logger = logging.getLogger(__name__)

# Sub-stream keys
_POINTS = 0
_PROJECTION = 1
_ANGLES = 2


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test counts; n_test=None takes the remainder"""
    n_train: int
    n_val: int = 0
    n_test: Optional[int] = None
    seed: int = 0


def _check_count(n, minimum=1, name="n"):
    if n is None or int(n) < minimum:
        raise InvalidArgumentError(f"{name} must be at least {minimum}, got {n}")
    return int(n)


def _check_sigma(noise_sigma):
    if noise_sigma < 0:
        raise InvalidArgumentError(f"noise_sigma must be non-negative, got {noise_sigma}")


def _fixed(values, n, name):
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size == 1:
        values = np.full(n, values[0])
    if values.size != n:
        raise InvalidArgumentError(f"{name} must have {n} entries, got {values.size}")
    return values


###############################################################################
# 1. Swiss roll and S-curve
###############################################################################

def gen_swiss_roll(n: int, noise_sigma: float = 0.05, seed: int = 0,
                   theta: Optional[np.ndarray] = None, z: Optional[np.ndarray] = None) -> DataSet:
    """
    Swiss roll in R^3

    x = ((θ + 0.1 z) sin θ / 4, (θ + 0.1 z) cos θ / 4, z) + noise with
    θ ~ U[π, 4π) and z ~ U[-5, 5). ``theta``/``z`` pin the intrinsic
    parameters instead of sampling them.
    """
    n = _check_count(n, 1 if theta is not None and z is not None else 4)
    _check_sigma(noise_sigma)

    rng = make_rng(seed, [_POINTS])
    th = uniform(rng, np.pi, 4 * np.pi, n)
    zz = uniform(rng, -5.0, 5.0, n)
    eta = gaussian(rng, (3, n), noise_sigma)
    if theta is not None:
        th = _fixed(theta, n, "theta")
    if z is not None:
        zz = _fixed(z, n, "z")

    r = (th + 0.1 * zz) / 4.0
    X = np.vstack([r * np.sin(th), r * np.cos(th), zz]) + eta

    meta = {
        "generator": "swiss_roll",
        "seed": int(seed),
        "noise_sigma": float(noise_sigma),
        "theta_range": [np.pi, 4 * np.pi],
        "z_range": [-5.0, 5.0],
        "intrinsic_names": ["theta", "z"],
    }
    return DataSet(X, False, np.vstack([th, zz]), meta).validate()


def scurve_projection(seed: int, ambient_dim: int = 20) -> np.ndarray:
    """Orthonormal ambient_dim x 3 projector from the SVD of a seeded Gaussian matrix"""
    _check_count(ambient_dim, 3, "ambient_dim")
    G = gaussian(make_rng(seed, [_PROJECTION]), (ambient_dim, 3))
    U, _, _ = np.linalg.svd(G, full_matrices=False)
    return U


def gen_scurve_20d(n: int, noise_sigma: float = 0.01, seed: int = 0,
                   theta: Optional[np.ndarray] = None, w: Optional[np.ndarray] = None,
                   ambient_dim: int = 20) -> DataSet:
    """
    S-curve lifted to R^20 by an orthonormal projection

    z = (sin θ, w, sign(θ)(cos θ - 1)) + noise, θ ~ U[-3π/2, 3π/2),
    w ~ U[0, 1); x = R z.
    """
    n = _check_count(n, 1 if theta is not None and w is not None else 4)
    _check_sigma(noise_sigma)

    rng = make_rng(seed, [_POINTS])
    th = uniform(rng, -1.5 * np.pi, 1.5 * np.pi, n)
    ww = uniform(rng, 0.0, 1.0, n)
    eta = gaussian(rng, (3, n), noise_sigma)
    if theta is not None:
        th = _fixed(theta, n, "theta")
    if w is not None:
        ww = _fixed(w, n, "w")

    Z = np.vstack([np.sin(th), ww, np.sign(th) * (np.cos(th) - 1.0)]) + eta
    R = scurve_projection(seed, ambient_dim)

    meta = {
        "generator": "scurve",
        "seed": int(seed),
        "projection_seed": int(seed),
        "noise_sigma": float(noise_sigma),
        "ambient_dim": int(ambient_dim),
        "theta_range": [-1.5 * np.pi, 1.5 * np.pi],
        "w_range": [0.0, 1.0],
        "intrinsic_names": ["theta", "w"],
    }
    return DataSet(R @ Z, False, np.vstack([th, ww]), meta).validate()


###############################################################################
# 2. Images
###############################################################################

# (intensity, semi-axis a, semi-axis b, x0, y0, angle in degrees)
_PHANTOM_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
    # off-axis lesion: breaks the left/right mirror symmetry
    (0.3, 0.09, 0.05, 0.38, 0.42, 30.0),
)


def gen_phantom(size: int = 128) -> np.ndarray:
    """Deterministic multi-ellipse head phantom in [0, 1] with unit maximum"""
    size = _check_count(size, 16, "size")
    coords = np.linspace(-1.0, 1.0, size)
    Xg, Yg = np.meshgrid(coords, -coords)  # row 0 is the top edge

    img = np.zeros((size, size))
    for value, a, b, x0, y0, deg in _PHANTOM_ELLIPSES:
        phi = np.deg2rad(deg)
        dx, dy = Xg - x0, Yg - y0
        xr = dx * np.cos(phi) + dy * np.sin(phi)
        yr = -dx * np.sin(phi) + dy * np.cos(phi)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += value

    img = np.clip(img, 0.0, None)
    return img / img.max()


def rotate_image(img: np.ndarray, theta: float) -> np.ndarray:
    """
    Rotate about the image centre by theta radians

    Inverse-mapped bilinear interpolation, zero outside the support.
    """
    img = np.asarray(img, dtype=np.float64)
    if np.mod(theta, 2 * np.pi) == 0.0:
        return img.copy()
    c, s = np.round([np.cos(theta), np.sin(theta)], 15)
    rot = np.array([[c, s], [-s, c]])
    centre = (np.array(img.shape, dtype=np.float64) - 1.0) / 2.0
    offset = centre - rot @ centre
    return ndimage.affine_transform(img, rot, offset=offset, order=1, mode="constant", cval=0.0)


def gen_rotated_images(base: np.ndarray, n_angles: int, seed: int = 0,
                       random_angles: bool = False) -> DataSet:
    """
    In-plane rotations of a grayscale image, each normalized to unit mass

    Angles are the grid 2πi/n_angles unless random_angles draws them from
    U[0, 2π) with the seed. Columns are the rotated images flattened in
    column-major order.
    """
    n_angles = _check_count(n_angles, 1, "n_angles")
    base = np.asarray(base, dtype=np.float64)
    if base.ndim != 2:
        raise InvalidArgumentError(f"base image must be 2-D, got shape {base.shape}")
    if np.any(base < 0) or not np.all(np.isfinite(base)):
        raise InvalidArgumentError("base image must be finite and nonnegative")
    if not np.any(base > 0):
        raise DegenerateInputError("base image is identically zero")

    if random_angles:
        angles = uniform(make_rng(seed, [_ANGLES]), 0.0, 2 * np.pi, n_angles)
    else:
        angles = 2 * np.pi * np.arange(n_angles) / n_angles

    X = np.empty((base.size, n_angles))
    for i, theta in enumerate(angles):
        rot = rotate_image(base, theta)
        total = rot.sum()
        if total <= 0:
            raise DegenerateInputError(f"rotation by {theta:.4f} rad leaves no intensity")
        X[:, i] = (rot / total).ravel(order="F")

    meta = {
        "generator": "rotated_images",
        "seed": int(seed),
        "shape": list(base.shape),
        "random_angles": bool(random_angles),
        "intrinsic_names": ["angle"],
    }
    return DataSet(X, True, angles.reshape(1, -1), meta).validate()


###############################################################################
# 3. Splits
###############################################################################

def split(ds: DataSet, spec: SplitSpec) -> Tuple[DataSet, DataSet, DataSet]:
    """Disjoint seeded random train/val/test subsets (Fisher-Yates shuffle)"""
    n = ds.N
    counts = [spec.n_train, spec.n_val]
    if any(c is None or c < 0 for c in counts):
        raise InvalidArgumentError(f"split counts must be non-negative: {spec}")
    n_test = n - spec.n_train - spec.n_val if spec.n_test is None else spec.n_test
    if n_test < 0 or spec.n_train + spec.n_val + n_test != n:
        raise InvalidArgumentError(
            f"split counts ({spec.n_train}, {spec.n_val}, {spec.n_test}) inconsistent with N={n}"
        )

    perm = make_rng(spec.seed).permutation(n)
    a, b = spec.n_train, spec.n_train + spec.n_val
    parts = (perm[:a], perm[a:b], perm[b:])
    logger.debug(f"🔄 Split N={n} into {a}/{spec.n_val}/{n_test} with seed {spec.seed}")
    return tuple(ds.subset(idx, label) for idx, label in zip(parts, ("train", "val", "test")))
