"""
Diffusion Maps encoder with Nystrom out-of-sample extension

Points are matrix columns throughout (M x N).
"""
import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist, pdist

from src.containers import load_blobs, save_blobs
from src.errors import DegenerateInputError, EncodingError, InvalidArgumentError

logger = logging.getLogger(__name__)

GAP_TOL = 1e-12
ISOLATION_TOL = 1e-300
COORD_SCALES = ("unit", "rms")


@dataclass
class Embedding:
    """Latent coordinates, one column per point"""
    Y: np.ndarray

    @property
    def d(self) -> int:
        return int(self.Y.shape[0])


@dataclass
class DmModel:
    """Fitted Diffusion Maps encoder"""
    X_train: np.ndarray
    epsilon1: float
    alpha: float
    w1: float
    d: int
    xi: np.ndarray                 # d nontrivial eigenvalues, descending
    V: np.ndarray                  # N x d right eigenvectors, unit norm
    deg1: np.ndarray               # degrees of the Gaussian kernel
    deg1a: np.ndarray              # degrees of the alpha-normalized kernel
    coord_scale: str = "unit"
    degenerate_gap: bool = False
    extra: Dict[str, float] = field(default_factory=dict)

    @property
    def N(self) -> int:
        return int(self.X_train.shape[1])

    @property
    def scale(self) -> float:
        return float(np.sqrt(self.N)) if self.coord_scale == "rms" else 1.0

    def embedding(self) -> Embedding:
        return Embedding(self.scale * (self.xi[:, None] * self.V.T))

    def transition_matrix(self) -> np.ndarray:
        """Row-stochastic T = D_a^{-1} K^(a) rebuilt from the stored data"""
        Ka = _alpha_normalize(gaussian_kernel(self.X_train, self.X_train, self.epsilon1),
                              self.deg1, self.deg1, self.alpha)
        return Ka / Ka.sum(axis=1, keepdims=True)


def median_pairwise_distance(X: np.ndarray) -> float:
    """Lower median of all N(N-1)/2 Euclidean distances between columns"""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 2:
        raise InvalidArgumentError("median distance needs at least two points")
    dist = pdist(X.T)
    k = (dist.size - 1) // 2
    return float(np.partition(dist, k)[k])


def gaussian_kernel(X_a: np.ndarray, X_b: np.ndarray, epsilon: float) -> np.ndarray:
    """K_ij = exp(-|a_i - b_j|^2 / epsilon^2); symmetrized when X_a is X_b"""
    if not epsilon > 0:
        raise InvalidArgumentError(f"kernel bandwidth must be positive, got {epsilon}")
    A = np.asarray(X_a, dtype=np.float64)
    B = np.asarray(X_b, dtype=np.float64)
    K = np.exp(-cdist(A.T, B.T, "sqeuclidean") / epsilon ** 2)
    if X_a is X_b:
        K = 0.5 * (K + K.T)
    return K


def _alpha_normalize(K, deg_rows, deg_cols, alpha):
    if alpha == 0:
        return K
    return K / np.outer(deg_rows ** alpha, deg_cols ** alpha)


def _canonical_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry is positive"""
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def dm_fit(X_train: np.ndarray, alpha: float = 1.0, w1: float = 1.0, d: int = 2,
           coord_scale: str = "unit") -> DmModel:
    """
    Fit Diffusion Maps on the training columns

    The spectrum is computed from the symmetric conjugate
    S = D_a^{-1/2} K^(a) D_a^{-1/2}; right eigenvectors of T are
    D_a^{-1/2} times eigenvectors of S. The trivial pair is dropped.
    """
    X = np.asarray(X_train, dtype=np.float64)
    N = X.shape[1]
    if d < 1 or N < d + 2:
        raise InvalidArgumentError(f"need N >= d + 2 (N={N}, d={d})")
    if not 0 <= alpha <= 1:
        raise InvalidArgumentError(f"alpha must lie in [0, 1], got {alpha}")
    if not w1 > 0:
        raise InvalidArgumentError(f"w1 must be positive, got {w1}")
    if coord_scale not in COORD_SCALES:
        raise InvalidArgumentError(f"coord_scale must be one of {COORD_SCALES}")

    median = median_pairwise_distance(X)
    if median <= 0:
        raise DegenerateInputError("median pairwise distance is zero")
    eps1 = w1 * median

    K = gaussian_kernel(X, X, eps1)
    deg1 = K.sum(axis=1)
    Ka = _alpha_normalize(K, deg1, deg1, alpha)
    deg1a = Ka.sum(axis=1)

    dinv = 1.0 / np.sqrt(deg1a)
    S = Ka * np.outer(dinv, dinv)
    S = 0.5 * (S + S.T)
    evals, evecs = linalg.eigh(S, subset_by_index=[N - d - 2, N - 1])
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]

    psi = dinv[:, None] * evecs[:, 1:d + 1]
    V = np.ascontiguousarray(_canonical_signs(psi / np.linalg.norm(psi, axis=0)))
    xi = evals[1:d + 1].copy()

    degenerate = bool(abs(evals[d] - evals[d + 1]) <= GAP_TOL)
    if degenerate:
        logger.warning(f"⚠️ Degenerate spectral gap: xi_d={evals[d]:.15g}, xi_d+1={evals[d + 1]:.15g}")

    logger.debug(f"🔍 DM fit: N={N}, eps1={eps1:.4g}, xi={np.array2string(xi, precision=6)}")
    return DmModel(X_train=X, epsilon1=eps1, alpha=float(alpha), w1=float(w1), d=int(d),
                   xi=xi, V=V, deg1=deg1, deg1a=deg1a, coord_scale=coord_scale,
                   degenerate_gap=degenerate,
                   extra={"median": median, "trivial_eigenvalue": float(evals[0])})


def nystrom_weights(model: DmModel, X_new: np.ndarray) -> np.ndarray:
    """Out-of-sample transition rows T* (L x N)"""
    X_new = np.asarray(X_new, dtype=np.float64)
    if X_new.ndim == 1:
        X_new = X_new.reshape(-1, 1)
    if X_new.shape[0] != model.X_train.shape[0]:
        raise InvalidArgumentError(
            f"points have {X_new.shape[0]} rows, model expects {model.X_train.shape[0]}"
        )
    k = gaussian_kernel(X_new, model.X_train, model.epsilon1)
    isolated = np.all(k < ISOLATION_TOL, axis=1)
    if np.any(isolated):
        raise EncodingError(f"{int(isolated.sum())} point(s) isolated from the training set")
    own_deg = k.sum(axis=1)
    ka = _alpha_normalize(k, own_deg, model.deg1, model.alpha)
    return ka / ka.sum(axis=1, keepdims=True)


def dm_encode(model: DmModel, X_new: np.ndarray) -> Embedding:
    """Nystrom extension: coordinate j = sum_i T*_i v_ji"""
    T_star = nystrom_weights(model, X_new)
    return Embedding(model.scale * (T_star @ model.V).T)


###############################################################################
# 1. Persistence
###############################################################################

_DM_VECTORS = ("xi", "deg1", "deg1a")


def dm_model_header(model: DmModel) -> Dict:
    return {
        "epsilon1": model.epsilon1,
        "alpha": model.alpha,
        "w1": model.w1,
        "d": model.d,
        "coord_scale": model.coord_scale,
        "degenerate_gap": model.degenerate_gap,
        "extra": model.extra,
    }


def dm_model_to_blobs(model: DmModel, prefix: str = "") -> Dict[str, np.ndarray]:
    blobs = {f"{prefix}X_train": model.X_train, f"{prefix}V": model.V}
    for name in _DM_VECTORS:
        blobs[prefix + name] = getattr(model, name)
    return blobs


def dm_model_from_blobs(header: Dict, blobs: Dict[str, np.ndarray], prefix: str = "") -> DmModel:
    vectors = {name: blobs[prefix + name].reshape(-1) for name in _DM_VECTORS}
    return DmModel(X_train=blobs[f"{prefix}X_train"], V=blobs[f"{prefix}V"],
                   epsilon1=float(header["epsilon1"]), alpha=float(header["alpha"]),
                   w1=float(header["w1"]), d=int(header["d"]),
                   coord_scale=header.get("coord_scale", "unit"),
                   degenerate_gap=bool(header.get("degenerate_gap", False)),
                   extra=header.get("extra") or {}, **vectors)


def save_dm_model(stem, model: DmModel):
    """JSON header with the bandwidth and scalars, MDEC blobs for the arrays"""
    return save_blobs(stem, {"kind": "DM", **dm_model_header(model)}, dm_model_to_blobs(model))


def load_dm_model(stem) -> DmModel:
    header, blobs = load_blobs(stem)
    if header.get("kind") != "DM":
        raise InvalidArgumentError(f"{stem} does not hold a Diffusion Maps model")
    return dm_model_from_blobs(header, blobs)
