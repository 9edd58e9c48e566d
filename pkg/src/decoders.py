"""
Decoders for the pre-image problem

RFNN        random-feature network, Tikhonov-regularized output layer
RANDSMAP    RFNN whose output layer is constrained to conserve mass
DDM         Geometric Harmonics on a second kernel over the latent points
KNN         convex combination of neighbours fitted through the encoder
POD         linear projection onto leading principal directions
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import linalg

from src.config import (
    RANDSMAP_DELTA_S,
    RANDSMAP_KNN_MAX_ITER,
    RANDSMAP_KNN_TOL,
    RANDSMAP_LAMBDA,
    UNIT_ROUNDOFF,
)
from src.containers import load_blobs, save_blobs
from src.dmap import (
    DmModel,
    dm_model_from_blobs,
    dm_model_header,
    dm_model_to_blobs,
    gaussian_kernel,
    median_pairwise_distance,
)
from src.errors import (
    DegenerateInputError,
    DegenerateKernelError,
    FeatureMapMismatchError,
    InvalidArgumentError,
    PreconditionError,
    RankDeficiencyError,
)
from src.randfeat import FeatureMap, feature_matrix, sample_feature_map

logger = logging.getLogger(__name__)

MASS_INPUT_TOL = 1e-10
DECODER_KINDS = ("RFNN", "RANDSMAP", "DDM", "KNN", "POD")


@dataclass(eq=False)
class DecoderModel:
    """Fitted decoder; fields not used by a kind stay None"""
    kind: str
    lam: float = 0.0
    mass_preserving: bool = False
    params: Dict[str, Any] = field(default_factory=dict)
    # RFNN / RANDSMAP
    A: Optional[np.ndarray] = None             # (P+1) x M
    feature_header: Optional[Dict[str, Any]] = None
    route: str = ""
    trunc_rank: Optional[int] = None
    sigma_1: float = 0.0
    sigma_next: float = 0.0                    # first omitted singular value
    U_r: Optional[np.ndarray] = None           # n x tr
    # DDM
    Y_train: Optional[np.ndarray] = None
    eps2: float = 0.0
    V_r: Optional[np.ndarray] = None
    Lambda_r: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None             # X V_r Lambda_r^-1 V_r^T
    # KNN
    dm_model: Optional[DmModel] = None
    X_train: Optional[np.ndarray] = None
    # POD
    U_d: Optional[np.ndarray] = None
    mean: Optional[np.ndarray] = None


@dataclass
class Reconstruction:
    """Decoded ambient points with per-point conservation error"""
    X_hat: np.ndarray
    conservation: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None       # k x L (KNN)
    neighbors: Optional[np.ndarray] = None     # k x L (KNN)
    converged: Optional[np.ndarray] = None     # L (KNN)


def _reconstruction(X_hat: np.ndarray, mass_preserving: bool, **extra) -> Reconstruction:
    cons = np.abs(X_hat.sum(axis=0) - 1.0) if mass_preserving else None
    return Reconstruction(X_hat, cons, **extra)


def _check_system(Phi, X, lam):
    Phi = np.asarray(Phi, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if Phi.ndim != 2 or X.ndim != 2 or Phi.shape[0] != X.shape[1]:
        raise InvalidArgumentError(
            f"feature matrix {Phi.shape} and data {X.shape} disagree on sample count"
        )
    if lam < 0:
        raise InvalidArgumentError(f"lambda must be non-negative, got {lam}")
    return Phi, X


def _is_conservative(X) -> bool:
    return X.shape[1] > 0 and bool(np.max(np.abs(X.sum(axis=0) - 1.0)) <= MASS_INPUT_TOL)


###############################################################################
# 1. RFNN
###############################################################################

def _spd_solve(G: np.ndarray, rhs: np.ndarray, lam: float) -> np.ndarray:
    try:
        factor = linalg.cho_factor(G, lower=True, check_finite=False)
    except linalg.LinAlgError as e:
        raise RankDeficiencyError(f"normal equations are singular (lambda={lam})") from e
    return linalg.cho_solve(factor, rhs, check_finite=False)


def rfnn_fit(Phi: np.ndarray, X: np.ndarray, lam: float = RANDSMAP_LAMBDA) -> DecoderModel:
    """
    Tikhonov least squares for the output layer via Cholesky

    primal (Phi^T Phi + lam I)^-1 Phi^T X^T when n >= P+1, dual
    Phi^T (Phi Phi^T + lam I)^-1 X^T otherwise.
    """
    Phi, X = _check_system(Phi, X, lam)
    n, p1 = Phi.shape
    if lam == 0 and np.linalg.matrix_rank(Phi) < min(n, p1):
        raise RankDeficiencyError(f"feature matrix {Phi.shape} is rank deficient at lambda=0")
    if n >= p1:
        A = _spd_solve(Phi.T @ Phi + lam * np.eye(p1), Phi.T @ X.T, lam)
        route = "primal"
    else:
        A = Phi.T @ _spd_solve(Phi @ Phi.T + lam * np.eye(n), X.T, lam)
        route = "dual"
    return DecoderModel("RFNN", lam=float(lam), A=A, route=route,
                        mass_preserving=_is_conservative(X))


def rfnn_fit_svd(Phi: np.ndarray, X: np.ndarray, lam: float = RANDSMAP_LAMBDA) -> DecoderModel:
    """Spectral filter form V_r (S^2 + lam)^-1 S U_r^T X^T; lam=0 is the pseudo-inverse"""
    Phi, X = _check_system(Phi, X, lam)
    U, s, Vt = linalg.svd(Phi, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return DecoderModel("RFNN", lam=float(lam), A=np.zeros((Phi.shape[1], X.shape[0])), route="svd")
    r = int(np.sum(s > max(Phi.shape) * np.finfo(np.float64).eps * s[0]))
    filt = s[:r] / (s[:r] ** 2 + lam)
    A = Vt[:r].T @ (filt[:, None] * (U[:, :r].T @ X.T))
    return DecoderModel("RFNN", lam=float(lam), A=A, route="svd", trunc_rank=r,
                        sigma_1=float(s[0]), sigma_next=float(s[r]) if r < s.size else 0.0,
                        mass_preserving=_is_conservative(X))


###############################################################################
# 2. RANDSMAP
###############################################################################

def randsmap_fit(Phi: np.ndarray, X: np.ndarray, lam: float = RANDSMAP_LAMBDA,
                 delta_S: float = RANDSMAP_DELTA_S, max_rank: Optional[int] = None) -> DecoderModel:
    """
    Mass-preserving output layer in closed form

    A = V_r (S^2 + lam)^-1 S U_r^T (X^T - (1/M)[I - U_r (I + lam S^-2) U_r^T] 1 1^T)

    with the SVD truncated to sigma_i > delta_S sigma_1 (and at most
    max_rank terms). The training reconstruction then sums to U_r U_r^T 1.
    """
    Phi, X = _check_system(Phi, X, lam)
    if not delta_S > 0:
        raise InvalidArgumentError(f"delta_S must be positive, got {delta_S}")
    if X.shape[1] == 0 or not _is_conservative(X):
        raise PreconditionError("RANDSMAP needs training columns that sum to 1")

    M = X.shape[0]
    U, s, Vt = linalg.svd(Phi, full_matrices=False)
    r = int(np.sum(s > delta_S * s[0]))
    if max_rank is not None:
        r = max(1, min(r, int(max_rank)))
    Ur, sr, Vr = U[:, :r], s[:r], Vt[:r].T

    ones = np.ones(Phi.shape[0])
    c = ones - Ur @ ((1.0 + lam / sr ** 2) * (Ur.T @ ones))
    rhs = X.T - np.outer(c, np.ones(M)) / M
    A = Vr @ ((sr / (sr ** 2 + lam))[:, None] * (Ur.T @ rhs))

    sigma_next = float(s[r]) if r < s.size else 0.0
    logger.debug(f"🔍 RANDSMAP: rank {r}/{s.size}, sigma_1={s[0]:.3e}, sigma_tr+1={sigma_next:.3e}")
    return DecoderModel("RANDSMAP", lam=float(lam), A=A, route="svd", trunc_rank=r,
                        sigma_1=float(s[0]), sigma_next=sigma_next, U_r=Ur,
                        mass_preserving=True, params={"delta_S": float(delta_S)})


def conservation_residual(model: DecoderModel) -> Tuple[float, float]:
    """(|(I - U_tr U_tr^T) 1|_2, sigma_tr+1) for a fitted RANDSMAP model"""
    if model.kind != "RANDSMAP" or model.U_r is None:
        raise InvalidArgumentError("conservation residual needs a fitted RANDSMAP model")
    ones = np.ones(model.U_r.shape[0])
    e = ones - model.U_r @ (model.U_r.T @ ones)
    return float(np.linalg.norm(e)), model.sigma_next


def decode(model: DecoderModel, fmap: FeatureMap, Y_star: np.ndarray) -> Reconstruction:
    """X* = A^T Phi*^T with Phi* = [1 | phi(Y*)]"""
    if model.kind not in ("RFNN", "RANDSMAP"):
        raise InvalidArgumentError(f"decode() serves RFNN/RANDSMAP, got {model.kind}")
    if model.feature_header is not None and model.feature_header.get("fingerprint") != fmap.fingerprint():
        raise FeatureMapMismatchError(
            f"model fitted with {model.feature_header.get('kind')} seed "
            f"{model.feature_header.get('seed')}, got {fmap.kind} seed {fmap.seed}"
        )
    Phi_star = feature_matrix(fmap, Y_star)
    if Phi_star.shape[1] != model.A.shape[0]:
        raise FeatureMapMismatchError(f"{Phi_star.shape[1]} features vs {model.A.shape[0]} coefficients")
    return _reconstruction((Phi_star @ model.A).T, model.mass_preserving)


def kernel_ridge_decode(K_S: np.ndarray, X_S: np.ndarray, K_star: np.ndarray, lam: float) -> np.ndarray:
    """X_S (K_S + lam I)^-1 K*^T"""
    n = K_S.shape[0]
    return X_S @ linalg.solve(K_S + lam * np.eye(n), K_star.T, assume_a="sym")


def fit_rf_decoder(family: str, kind: str, Y_train: np.ndarray, X_train: np.ndarray, P: int,
                   params: Dict[str, Any], seed: int, lam: float = RANDSMAP_LAMBDA,
                   delta_S: float = RANDSMAP_DELTA_S,
                   subset: Optional[np.ndarray] = None) -> Tuple[DecoderModel, FeatureMap]:
    """
    Sample a feature map and fit RFNN or RANDSMAP on (a subset S of) the
    training pairs
    """
    if subset is not None:
        Y_train, X_train = Y_train[:, subset], X_train[:, subset]
    fmap = sample_feature_map(kind, Y_train.shape[0], P, params, seed, Y_train)
    Phi = feature_matrix(fmap, Y_train)
    if family == "RANDSMAP":
        model = randsmap_fit(Phi, X_train, lam, delta_S)
    elif family == "RFNN":
        model = rfnn_fit(Phi, X_train, lam)
    else:
        raise InvalidArgumentError(f"unknown random-feature family '{family}'")
    model.feature_header = fmap.to_header()
    model.params.update({"P": int(P), **params})
    return model, fmap


###############################################################################
# 3. DDM / Geometric Harmonics
###############################################################################

def ddm_fit(Y_train: np.ndarray, X_train: np.ndarray, w2: float,
            max_rank: Optional[int] = None) -> DecoderModel:
    """
    Second Gaussian kernel on the latent points, eps2 = w2 * median distance

    Eigenpairs with lambda_i > delta lambda_1, delta = N |K|_2 2^-53, are kept
    (optionally capped at max_rank).
    """
    Y = np.asarray(Y_train, dtype=np.float64)
    X = np.asarray(X_train, dtype=np.float64)
    N = Y.shape[1]
    if N < 2 or X.shape[1] != N:
        raise InvalidArgumentError("DDM needs at least two paired training points")
    if not w2 > 0:
        raise InvalidArgumentError(f"w2 must be positive, got {w2}")

    median = median_pairwise_distance(Y)
    if median <= 0:
        raise DegenerateInputError("latent points coincide")
    eps2 = w2 * median
    K2 = gaussian_kernel(Y, Y, eps2)

    evals, evecs = linalg.eigh(K2)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    delta = N * evals[0] * UNIT_ROUNDOFF
    keep = evals > delta * evals[0]
    r = int(np.sum(keep))
    if max_rank is not None:
        r = min(r, int(max_rank))
    if r == 0:
        raise DegenerateKernelError("no kernel eigenvalue above the truncation threshold")

    V_r, L_r = evecs[:, :r], evals[:r]
    G = (X @ V_r) / L_r[None, :] @ V_r.T
    logger.debug(f"🔍 DDM: eps2={eps2:.4g}, retained {r}/{N} eigenpairs")
    return DecoderModel("DDM", mass_preserving=_is_conservative(X), Y_train=Y, eps2=eps2,
                        V_r=V_r, Lambda_r=L_r, G=G, trunc_rank=r, params={"w2": float(w2)})


def ddm_decode(model: DecoderModel, Y_star: np.ndarray) -> Reconstruction:
    """X* = X V_r Lambda_r^-1 V_r^T K*^T (conservation not guaranteed)"""
    Y_star = np.asarray(Y_star, dtype=np.float64)
    if Y_star.ndim == 1:
        Y_star = Y_star.reshape(-1, 1)
    K_star = gaussian_kernel(Y_star, model.Y_train, model.eps2)
    return _reconstruction(model.G @ K_star.T, model.mass_preserving)


###############################################################################
# 4. k-NN convex interpolation
###############################################################################

def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {a >= 0, sum a = 1} (sort-based)"""
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.count_nonzero(u - cssv / ind > 0)
    theta = cssv[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def knn_objective(dm_model: DmModel, X_nb: np.ndarray, y_star: np.ndarray,
                  alpha: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    g(alpha) = |y* - E(X_nb alpha)|^2 and its gradient, E the Nystrom encoder

    The extension weights are evaluated in log space so the value stays
    defined far from the data.
    """
    x = X_nb @ alpha
    Xtr = dm_model.X_train
    eps2 = dm_model.epsilon1 ** 2
    d2 = np.sum((Xtr - x[:, None]) ** 2, axis=0)
    logits = -d2 / eps2 - dm_model.alpha * np.log(dm_model.deg1)
    T = np.exp(logits - logits.max())
    T /= T.sum()

    s = dm_model.scale
    y = s * (dm_model.V.T @ T)
    res = y - y_star
    g = float(res @ res)

    u = dm_model.V @ res
    w = (u - u @ T) * T
    grad_x = 2.0 * s * (-2.0 / eps2) * (x * w.sum() - Xtr @ w)
    return g, X_nb.T @ grad_x


@dataclass
class KnnResult:
    x_hat: np.ndarray
    weights: np.ndarray
    neighbors: np.ndarray
    converged: bool
    iterations: int
    objective: float


def knn_neighbors(Y_train: np.ndarray, y_star: np.ndarray, k: int) -> np.ndarray:
    """k nearest training latents; ties go to the lowest index"""
    d2 = np.sum((Y_train - np.reshape(y_star, (-1, 1))) ** 2, axis=0)
    return np.argsort(d2, kind="stable")[:k]


def knn_decode(dm_model: DmModel, Y_train: np.ndarray, X_train: np.ndarray, y_star: np.ndarray,
               k: int, tol: float = RANDSMAP_KNN_TOL, max_iter: int = RANDSMAP_KNN_MAX_ITER) -> KnnResult:
    """
    Convex combination of the k nearest training points whose encoding
    best matches y*, by projected gradient with backtracking
    """
    N = Y_train.shape[1]
    if not 1 <= k <= N:
        raise InvalidArgumentError(f"k must lie in [1, {N}], got {k}")
    y_star = np.asarray(y_star, dtype=np.float64).reshape(-1)
    nb = knn_neighbors(Y_train, y_star, k)
    X_nb = X_train[:, nb]

    alpha = np.full(k, 1.0 / k)
    g, grad = knn_objective(dm_model, X_nb, y_star, alpha)
    step = 1.0 / max(np.linalg.norm(grad), 1e-12)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mapping = np.linalg.norm(alpha - project_simplex(alpha - step * grad)) / step
        if mapping <= tol or g == 0.0:
            converged = True
            break
        step *= 2.0
        for _ in range(60):
            cand = project_simplex(alpha - step * grad)
            diff = cand - alpha
            g_c, grad_c = knn_objective(dm_model, X_nb, y_star, cand)
            if g_c <= g + grad @ diff + (diff @ diff) / (2.0 * step):
                break
            step *= 0.5
        alpha, g, grad = cand, g_c, grad_c

    if not converged:
        logger.warning(f"⚠️ k-NN solver stopped after {max_iter} iterations (g={g:.3e})")
    return KnnResult(X_nb @ alpha, alpha, nb, converged, it, g)


def knn_fit(dm_model: DmModel, Y_train: np.ndarray, X_train: np.ndarray, k: int,
            tol: float = RANDSMAP_KNN_TOL, max_iter: int = RANDSMAP_KNN_MAX_ITER) -> DecoderModel:
    if not 1 <= k <= Y_train.shape[1]:
        raise InvalidArgumentError(f"k must lie in [1, {Y_train.shape[1]}], got {k}")
    return DecoderModel("KNN", mass_preserving=_is_conservative(X_train), dm_model=dm_model,
                        Y_train=np.asarray(Y_train, dtype=np.float64),
                        X_train=np.asarray(X_train, dtype=np.float64),
                        params={"k": int(k), "tol": float(tol), "max_iter": int(max_iter)})


def knn_decode_batch(model: DecoderModel, Y_star: np.ndarray, jobs: int = 1) -> Reconstruction:
    """Independent k-NN solves per column; order of results never depends on jobs"""
    Y_star = np.asarray(Y_star, dtype=np.float64)
    k, tol, max_iter = model.params["k"], model.params["tol"], model.params["max_iter"]

    def solve(l):
        return knn_decode(model.dm_model, model.Y_train, model.X_train, Y_star[:, l], k, tol, max_iter)

    cols = range(Y_star.shape[1])
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(solve, cols))
    else:
        results = [solve(l) for l in cols]

    M = model.X_train.shape[0]
    X_hat = np.column_stack([r.x_hat for r in results]) if results else np.zeros((M, 0))
    weights = np.column_stack([r.weights for r in results]) if results else np.zeros((k, 0))
    neighbors = np.column_stack([r.neighbors for r in results]) if results else np.zeros((k, 0), dtype=int)
    converged = np.array([r.converged for r in results], dtype=bool)
    return _reconstruction(X_hat, model.mass_preserving, weights=weights,
                           neighbors=neighbors, converged=converged)


###############################################################################
# 5. POD
###############################################################################

def pod_fit(X_train: np.ndarray, d: int) -> DecoderModel:
    """Leading d left singular vectors of the column-centred data"""
    X = np.asarray(X_train, dtype=np.float64)
    mean = X.mean(axis=1)
    U, s, _ = linalg.svd(X - mean[:, None], full_matrices=False)
    rank = int(np.sum(s > max(X.shape) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)))
    if not 1 <= d <= rank:
        raise InvalidArgumentError(f"d must lie in [1, {rank}] (rank of centred data), got {d}")
    return DecoderModel("POD", mass_preserving=_is_conservative(X), U_d=U[:, :d], mean=mean,
                        trunc_rank=int(d), sigma_next=float(s[d]) if d < s.size else 0.0,
                        params={"d": int(d)})


def pod_encode(model: DecoderModel, X: np.ndarray) -> np.ndarray:
    return model.U_d.T @ (np.asarray(X, dtype=np.float64) - model.mean[:, None])


def pod_decode(model: DecoderModel, Z: np.ndarray) -> Reconstruction:
    """U_d Z + mean"""
    return _reconstruction(model.U_d @ np.asarray(Z, dtype=np.float64) + model.mean[:, None],
                           model.mass_preserving)


###############################################################################
# 6. Persistence
###############################################################################

_ARRAY_FIELDS = ("A", "U_r", "Y_train", "V_r", "Lambda_r", "G", "X_train", "U_d", "mean")


def save_model(stem, model: DecoderModel):
    """JSON header plus MDEC blob file; identical models give identical bytes"""
    blobs = {name: getattr(model, name) for name in _ARRAY_FIELDS if getattr(model, name) is not None}
    if model.dm_model is not None:
        blobs.update(dm_model_to_blobs(model.dm_model, prefix="dm_"))
    header = {
        "kind": model.kind,
        "lam": model.lam,
        "mass_preserving": model.mass_preserving,
        "params": model.params,
        "feature_map": model.feature_header,
        "route": model.route,
        "trunc_rank": model.trunc_rank,
        "sigma_1": model.sigma_1,
        "sigma_next": model.sigma_next,
        "eps2": model.eps2,
    }
    if model.dm_model is not None:
        header["dm"] = dm_model_header(model.dm_model)
    return save_blobs(stem, header, blobs)


def load_model(stem) -> DecoderModel:
    header, blobs = load_blobs(stem)
    if header.get("kind") not in DECODER_KINDS:
        raise InvalidArgumentError(f"unknown decoder kind in header: {header.get('kind')}")
    model = DecoderModel(
        kind=header["kind"],
        lam=header.get("lam", 0.0),
        mass_preserving=header.get("mass_preserving", False),
        params=header.get("params") or {},
        feature_header=header.get("feature_map"),
        route=header.get("route", ""),
        trunc_rank=header.get("trunc_rank"),
        sigma_1=header.get("sigma_1", 0.0),
        sigma_next=header.get("sigma_next", 0.0),
        eps2=header.get("eps2", 0.0),
    )
    for name in _ARRAY_FIELDS:
        if name in blobs:
            value = blobs[name]
            if name in ("Lambda_r", "mean"):
                value = value.reshape(-1)
            setattr(model, name, value)
    if "dm" in header:
        model.dm_model = dm_model_from_blobs(header["dm"], blobs, prefix="dm_")
    return model
