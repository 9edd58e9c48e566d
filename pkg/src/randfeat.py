"""
Random feature maps: random Fourier features (single and multi-scale)
and sigmoidal features, plus induced/expected kernels and the
concentration bounds used to check them
"""
import hashlib
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import erf, expit

from src.config import MSRFF_SIGMA_LB
from src.errors import DegenerateInputError, InvalidArgumentError, InvalidStateError
from src.rng import gaussian, make_rng, uniform

logger = logging.getLogger(__name__)

KINDS = ("rff", "msrff", "sigmoid")


@dataclass(eq=False)
class FeatureMap:
    """Sampled hidden layer; only the output layer is ever trained"""
    kind: str
    d: int
    P: int
    W: np.ndarray                          # P x d
    b: np.ndarray                          # P
    seed: int
    params: Dict[str, Any] = field(default_factory=dict)
    scales: Optional[np.ndarray] = None    # msrff only, Q entries
    centers: Optional[np.ndarray] = None   # sigmoid only, P x d

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.kind}|{self.d}|{self.P}|{self.seed}|{sorted(self.params.items())}".encode())
        h.update(np.ascontiguousarray(self.W, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.b, dtype="<f8").tobytes())
        return h.hexdigest()

    def to_header(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "d": self.d,
            "P": self.P,
            "seed": self.seed,
            "params": dict(self.params),
            "fingerprint": self.fingerprint(),
        }


def _check_sizes(d, P):
    if d < 1 or P < 1:
        raise InvalidArgumentError(f"need d >= 1 and P >= 1, got d={d}, P={P}")


def sample_rff(d: int, P: int, sigma_w: float, seed: int) -> FeatureMap:
    """W rows ~ N(0, sigma_w^2 I), phases ~ U[0, 2pi)"""
    _check_sizes(d, P)
    if not sigma_w > 0:
        raise InvalidArgumentError(f"sigma_w must be positive, got {sigma_w}")
    rng = make_rng(seed)
    W = gaussian(rng, (P, d), sigma_w)
    b = uniform(rng, 0.0, 2 * np.pi, P)
    return FeatureMap("rff", d, P, W, b, int(seed), {"sigma_w": float(sigma_w)})


def sample_msrff(d: int, P: int, Q: int, sigma_ub: float, seed: int,
                 sigma_lb: float = MSRFF_SIGMA_LB) -> FeatureMap:
    """
    Hierarchical sampling: Q scales sigma_q ~ U[sigma_lb, sigma_ub), then
    L = P/Q frequency rows per scale drawn from N(0, sigma_q^2 I)
    """
    _check_sizes(d, P)
    if Q < 1 or P % Q != 0:
        raise InvalidArgumentError(f"Q={Q} must divide P={P}")
    if not sigma_ub > sigma_lb:
        raise InvalidArgumentError(f"sigma_ub must exceed {sigma_lb}, got {sigma_ub}")
    rng = make_rng(seed)
    scales = uniform(rng, sigma_lb, sigma_ub, Q)
    Z = gaussian(rng, (P, d))
    W = Z * np.repeat(scales, P // Q)[:, None]
    b = uniform(rng, 0.0, 2 * np.pi, P)
    params = {"sigma_ub": float(sigma_ub), "Q": int(Q), "sigma_lb": float(sigma_lb)}
    return FeatureMap("msrff", d, P, W, b, int(seed), params, scales=scales)


def _sigmoid_from_box(d, P, c, lo, hi, seed) -> FeatureMap:
    _check_sizes(d, P)
    if not c > 0:
        raise InvalidArgumentError(f"c must be positive, got {c}")
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if lo.size != d or hi.size != d:
        raise InvalidArgumentError("training box does not match input dimension")
    if np.all(hi <= lo):
        raise DegenerateInputError("training box is degenerate in every dimension")
    rng = make_rng(seed)
    W = uniform(rng, -c, c, (P, d))
    mu = lo + (hi - lo) * uniform(rng, 0.0, 1.0, (P, d))
    b = -np.sum(W * mu, axis=1)
    params = {"c": float(c), "box_lo": lo.tolist(), "box_hi": hi.tolist()}
    return FeatureMap("sigmoid", d, P, W, b, int(seed), params, centers=mu)


def sample_sigmoid(Y_train: np.ndarray, P: int, c: float, seed: int) -> FeatureMap:
    """
    Sigmoid features with weights ~ U[-c, c)^d and inflection points at
    uniform centres inside the training bounding box
    """
    Y = np.asarray(Y_train, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[1] == 0:
        raise InvalidArgumentError("training embedding must be a nonempty d x n matrix")
    return _sigmoid_from_box(Y.shape[0], P, c, Y.min(axis=1), Y.max(axis=1), seed)


def regenerate(header: Dict[str, Any]) -> FeatureMap:
    """Rebuild a map bit-exactly from the header written by to_header()"""
    kind, d, P, seed = header["kind"], int(header["d"]), int(header["P"]), int(header["seed"])
    params = header.get("params", {})
    if kind == "rff":
        fmap = sample_rff(d, P, params["sigma_w"], seed)
    elif kind == "msrff":
        fmap = sample_msrff(d, P, params["Q"], params["sigma_ub"], seed,
                            params.get("sigma_lb", MSRFF_SIGMA_LB))
    elif kind == "sigmoid":
        fmap = _sigmoid_from_box(d, P, params["c"], params["box_lo"], params["box_hi"], seed)
    else:
        raise InvalidArgumentError(f"unknown feature kind '{kind}'")
    expected = header.get("fingerprint")
    if expected is not None and expected != fmap.fingerprint():
        raise InvalidStateError("feature map regeneration does not reproduce the stored fingerprint")
    return fmap


def sample_feature_map(kind: str, d: int, P: int, params: Dict[str, Any], seed: int,
                       Y_train: Optional[np.ndarray] = None) -> FeatureMap:
    """Dispatch on kind with hyperparameters given by name"""
    if kind == "rff":
        return sample_rff(d, P, params["sigma_w"], seed)
    if kind == "msrff":
        return sample_msrff(d, P, params.get("Q", 10), params["sigma_ub"], seed)
    if kind == "sigmoid":
        if Y_train is None:
            raise InvalidArgumentError("sigmoid features need the training embedding")
        return sample_sigmoid(Y_train, P, params["c"], seed)
    raise InvalidArgumentError(f"unknown feature kind '{kind}', expected one of {KINDS}")


###############################################################################
# 1. Evaluation
###############################################################################

def _latent(fmap: FeatureMap, Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    if Y.shape[0] != fmap.d:
        raise InvalidArgumentError(f"latent points have dimension {Y.shape[0]}, map expects {fmap.d}")
    return Y


def feature_matrix(fmap: FeatureMap, Y: np.ndarray) -> np.ndarray:
    """m x (P+1) matrix [1 | phi(y)] with the output bias in column 0"""
    Y = _latent(fmap, Y)
    Z = Y.T @ fmap.W.T + fmap.b[None, :]
    if fmap.kind == "sigmoid":
        feats = expit(Z)
    else:
        feats = np.sqrt(2.0 / fmap.P) * np.cos(Z)
    return np.hstack([np.ones((Y.shape[1], 1)), feats])


def induced_kernel(fmap: FeatureMap, Y: np.ndarray) -> np.ndarray:
    """Gram matrix of the non-bias features"""
    Phi = feature_matrix(fmap, Y)[:, 1:]
    return Phi @ Phi.T


def expected_kernel(fmap: FeatureMap, Y: np.ndarray) -> np.ndarray:
    """Closed-form expectation of induced_kernel over the frequency draw"""
    Y = _latent(fmap, Y)
    D2 = cdist(Y.T, Y.T, "sqeuclidean")
    if fmap.kind == "rff":
        return np.exp(-0.5 * fmap.params["sigma_w"] ** 2 * D2)
    if fmap.kind == "msrff":
        return np.mean([np.exp(-0.5 * s ** 2 * D2) for s in fmap.scales], axis=0)
    raise InvalidStateError("sigmoid features have no shift-invariant expected kernel")


def multiscale_kernel_limit(Y: np.ndarray, a: float, b: float) -> np.ndarray:
    """
    Infinite-scale mixture (1/(b-a)) int_a^b exp(-s^2 r^2 / 2) ds
    = sqrt(pi/2) (erf(b r/sqrt2) - erf(a r/sqrt2)) / (r (b - a)), 1 at r = 0
    """
    if not b > a:
        raise InvalidArgumentError("scale interval must satisfy a < b")
    Y = np.asarray(Y, dtype=np.float64)
    r = np.sqrt(cdist(Y.T, Y.T, "sqeuclidean"))
    out = np.ones_like(r)
    nz = r > 0
    rn = r[nz]
    out[nz] = np.sqrt(np.pi / 2) * (erf(b * rn / np.sqrt(2)) - erf(a * rn / np.sqrt(2))) / (rn * (b - a))
    return out


def bernstein_bound(n: int, K_norm: float, P: int) -> float:
    """Expected spectral error bound of a P-feature Monte-Carlo Gram matrix"""
    log_term = np.log(2 * n)
    return float(2 * np.sqrt(n * K_norm * log_term / P) + 4 * n * log_term / (3 * P))


def multiscale_bound(n: int, c: float, P: int, Q: int) -> float:
    """Same bound with L = P/Q features per scale and c = max_q |K_q|"""
    log_term = np.log(2 * n)
    return float(2 * np.sqrt(n * c * Q * log_term / P) + 4 * n * Q * log_term / (3 * P))
