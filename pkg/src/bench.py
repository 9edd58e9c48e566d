"""
Benchmark harness: error metrics, grid tuning, multi-run aggregation,
kernel bound checks and end-to-end table reproduction
"""
import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from src.config import (
    RANDSMAP_DELTA_S,
    RANDSMAP_KNN_MAX_ITER,
    RANDSMAP_KNN_TOL,
    RANDSMAP_LAMBDA,
    RANDSMAP_OUTPUT_DIR,
)
from src.containers import DataSet, write_json
from src.debug_utils import debug_print, log_step_end, log_step_start
from src.decoders import (
    DecoderModel,
    Reconstruction,
    ddm_decode,
    ddm_fit,
    decode,
    fit_rf_decoder,
    knn_decode_batch,
    knn_fit,
    pod_decode,
    pod_encode,
    pod_fit,
)
from src.dmap import DmModel, dm_encode, dm_fit
from src.errors import InvalidArgumentError, InvalidStateError, RandsmapError, TuningError, UndefinedMetricError
from src.pdesolvers import Hughes2dConfig, Lwr1dConfig, hughes_generate, lwr_generate
from src.randfeat import (
    FeatureMap,
    bernstein_bound,
    expected_kernel,
    induced_kernel,
    multiscale_bound,
    sample_feature_map,
)
from src.synthdata import SplitSpec, gen_phantom, gen_rotated_images, gen_scurve_20d, gen_swiss_roll, split

logger = logging.getLogger(__name__)

PERCENTILES = (5, 95)


###############################################################################
# 1. Metrics
###############################################################################

def percentile_nearest_rank(values: Sequence[float], q: float) -> float:
    """Smallest value with at least q% of the sample at or below it"""
    data = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    if data.size == 0:
        raise InvalidArgumentError("percentile of an empty sample")
    if not 0 <= q <= 100:
        raise InvalidArgumentError(f"percentile must lie in [0, 100], got {q}")
    rank = max(1, math.ceil(q / 100.0 * data.size))
    return float(data[rank - 1])


def summarize(values: Sequence[float]) -> Dict[str, float]:
    values = np.asarray(values, dtype=np.float64)
    return {
        "mean": float(values.mean()),
        "median": percentile_nearest_rank(values, 50),
        "p5": percentile_nearest_rank(values, PERCENTILES[0]),
        "p95": percentile_nearest_rank(values, PERCENTILES[1]),
    }


@dataclass
class EvalReport:
    """Per-point errors with timings of the run that produced them"""
    e2: np.ndarray
    einf: np.ndarray
    econ: Optional[np.ndarray] = None
    fit_time: float = 0.0
    infer_time: float = 0.0
    run_seed: Optional[int] = None

    def summary(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"e2": summarize(self.e2), "einf": summarize(self.einf)}
        out["econ"] = summarize(self.econ) if self.econ is not None else None
        out["fit_time"] = self.fit_time
        out["infer_time"] = self.infer_time
        return out


def errors(X_true: np.ndarray, X_hat: np.ndarray, mass_flag: bool) -> EvalReport:
    """Per-column relative L2 / Linf errors and |1^T x_hat - 1|"""
    X_true = np.asarray(X_true, dtype=np.float64)
    X_hat = np.asarray(X_hat, dtype=np.float64)
    if X_true.shape != X_hat.shape:
        raise InvalidArgumentError(f"shape mismatch: {X_true.shape} vs {X_hat.shape}")
    n2 = np.linalg.norm(X_true, axis=0)
    ninf = np.max(np.abs(X_true), axis=0) if X_true.shape[0] else np.zeros(X_true.shape[1])
    if np.any(n2 == 0):
        raise UndefinedMetricError(f"{int(np.sum(n2 == 0))} truth column(s) have zero norm")
    diff = X_hat - X_true
    e2 = np.linalg.norm(diff, axis=0) / n2
    einf = np.max(np.abs(diff), axis=0) / ninf
    econ = np.abs(X_hat.sum(axis=0) - 1.0) if mass_flag else None
    return EvalReport(e2, einf, econ)


###############################################################################
# 2. Decoder configurations
###############################################################################

@dataclass(frozen=True)
class DecoderConfig:
    """One table row: decoder family plus feature kind for random-feature models"""
    name: str
    family: str
    feature: Optional[str] = None

    @property
    def hyper(self) -> Optional[str]:
        if self.family in ("RFNN", "RANDSMAP"):
            return {"rff": "sigma_w", "msrff": "sigma_ub", "sigmoid": "c"}[self.feature]
        return {"DDM": "w2", "KNN": "k"}.get(self.family)

    @property
    def uses_features(self) -> bool:
        return self.family in ("RFNN", "RANDSMAP")


DECODER_CONFIGS: Dict[str, DecoderConfig] = {
    c.name: c for c in (
        DecoderConfig("RANDSMAP-RFF", "RANDSMAP", "rff"),
        DecoderConfig("RANDSMAP-MSRFF", "RANDSMAP", "msrff"),
        DecoderConfig("RANDSMAP-Sig", "RANDSMAP", "sigmoid"),
        DecoderConfig("RFNN-RFF", "RFNN", "rff"),
        DecoderConfig("RFNN-MSRFF", "RFNN", "msrff"),
        DecoderConfig("RFNN-Sig", "RFNN", "sigmoid"),
        DecoderConfig("DDM", "DDM"),
        DecoderConfig("kNN", "KNN"),
        DecoderConfig("POD", "POD"),
    )
}
DEFAULT_DECODERS = ("RANDSMAP-RFF", "RANDSMAP-MSRFF", "RANDSMAP-Sig", "RFNN-Sig", "DDM", "kNN")


def decoder_config(name: str) -> DecoderConfig:
    """Case-insensitive lookup, e.g. 'randsmap-rff' or 'knn'"""
    for key, cfg in DECODER_CONFIGS.items():
        if key.lower() == name.lower():
            return cfg
    raise InvalidArgumentError(f"unknown decoder '{name}', expected one of {list(DECODER_CONFIGS)}")


@dataclass
class LatentPairs:
    """Latent points with their ambient counterparts, both column-wise"""
    Y: np.ndarray
    X: np.ndarray
    mass_preserving: bool = False


@dataclass(eq=False)
class FittedDecoder:
    config: DecoderConfig
    model: DecoderModel
    fmap: Optional[FeatureMap] = None
    value: Optional[float] = None
    P: Optional[int] = None

    def reconstruct(self, pairs: LatentPairs, jobs: int = 1) -> Reconstruction:
        """Decode the latent side of ``pairs`` (POD encodes X with its own basis)"""
        family = self.config.family
        if family in ("RFNN", "RANDSMAP"):
            return decode(self.model, self.fmap, pairs.Y)
        if family == "DDM":
            return ddm_decode(self.model, pairs.Y)
        if family == "KNN":
            return knn_decode_batch(self.model, pairs.Y, jobs=jobs)
        return pod_decode(self.model, pod_encode(self.model, pairs.X))


def fit_decoder(config: DecoderConfig, value: Optional[float], train: LatentPairs, seed: int,
                P: Optional[int] = None, dm_model: Optional[DmModel] = None,
                lam: float = RANDSMAP_LAMBDA, delta_S: float = RANDSMAP_DELTA_S,
                knn_tol: float = RANDSMAP_KNN_TOL, knn_max_iter: int = RANDSMAP_KNN_MAX_ITER,
                pod_d: int = 2, msrff_q: int = 10, ddm_rank: Optional[int] = None) -> FittedDecoder:
    """Fit one configuration at a single hyperparameter value"""
    if config.uses_features:
        params: Dict[str, Any] = {config.hyper: float(value)}
        if config.feature == "msrff":
            params["Q"] = msrff_q
        model, fmap = fit_rf_decoder(config.family, config.feature, train.Y, train.X, P,
                                     params, seed, lam, delta_S)
        return FittedDecoder(config, model, fmap, value, P)
    if config.family == "DDM":
        return FittedDecoder(config, ddm_fit(train.Y, train.X, float(value), ddm_rank), value=value)
    if config.family == "KNN":
        if dm_model is None:
            raise InvalidArgumentError("k-NN decoding needs the Diffusion Maps model")
        return FittedDecoder(config, knn_fit(dm_model, train.Y, train.X, int(value), knn_tol, knn_max_iter),
                             value=int(value))
    return FittedDecoder(config, pod_fit(train.X, pod_d), value=pod_d)


def evaluate(fitted: FittedDecoder, pairs: LatentPairs, jobs: int = 1) -> EvalReport:
    rec = fitted.reconstruct(pairs, jobs)
    return errors(pairs.X, rec.X_hat, pairs.mass_preserving)


###############################################################################
# 3. Tuning and repeated runs
###############################################################################

@dataclass
class TuneResult:
    grid: List[float]
    val_errors: List[Optional[float]]
    best: float
    fitted: Optional[FittedDecoder] = None
    elapsed: float = 0.0


def select_best(grid: Sequence[float], score: Callable[[float], float], jobs: int = 1) -> TuneResult:
    """
    Evaluate score over the grid; failed cells are logged and skipped.
    Ties go to the smaller value so the result does not depend on grid order.
    """
    grid = list(grid)
    if not grid:
        raise InvalidArgumentError("tuning grid is empty")

    def cell(value):
        try:
            result = float(score(value))
            if not np.isfinite(result):
                raise InvalidStateError(f"non-finite validation error {result}")
            debug_print("tune", f"{value!r} -> {result:.6e}")
            return result
        except (RandsmapError, linalg.LinAlgError, ValueError) as e:
            logger.warning(f"⚠️ Grid cell {value!r} failed: {e}")
            return None

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            val_errors = list(pool.map(cell, grid))
    else:
        val_errors = [cell(v) for v in grid]

    scored = [(e, v) for e, v in zip(val_errors, grid) if e is not None]
    if not scored:
        raise TuningError(f"every grid value failed: {grid}")
    best = min(scored)[1]
    return TuneResult(grid, val_errors, best)


def tune(config: DecoderConfig, grid: Sequence[float], train: LatentPairs, val: LatentPairs,
         seed: int, jobs: int = 1, **fit_kwargs) -> TuneResult:
    """Pick the value with the lowest mean validation e2, then refit on train"""
    t0 = time.perf_counter()

    def score(value):
        return float(np.mean(evaluate(fit_decoder(config, value, train, seed, **fit_kwargs), val).e2))

    result = select_best(grid, score, jobs)
    result.fitted = fit_decoder(config, result.best, train, seed, **fit_kwargs)
    result.elapsed = time.perf_counter() - t0
    logger.info(f"✅ Tuned {config.name}: {config.hyper}={result.best:g}")
    return result


@dataclass
class RunAggregate:
    values: List[float]
    mean: float
    median: float
    p5: float
    p95: float


def repeat_runs(pipeline: Callable[[int], Dict[str, float]], n_runs: int = 100, base_seed: int = 0,
                jobs: int = 1) -> Dict[str, RunAggregate]:
    """Run with seeds base_seed + i and aggregate each scalar metric"""
    if n_runs < 1:
        raise InvalidArgumentError(f"n_runs must be positive, got {n_runs}")
    seeds = [base_seed + i for i in range(n_runs)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(pipeline, seeds))
    else:
        results = [pipeline(s) for s in seeds]

    out: Dict[str, RunAggregate] = {}
    for key in results[0]:
        values = [float(r[key]) for r in results]
        stats = summarize(values)
        out[key] = RunAggregate(values, stats["mean"], stats["median"], stats["p5"], stats["p95"])
    return out


###############################################################################
# 4. Kernel bound check
###############################################################################

@dataclass
class KernelBoundRow:
    P: int
    errors: List[float]
    median_error: float
    bound: float
    within_bound: float     # fraction of seeds with error <= bound


def kernel_bound_check(map_kind: str, params: Dict[str, Any], points: np.ndarray,
                       P_list: Sequence[int], n_seeds: int = 20, base_seed: int = 0) -> Tuple[List[KernelBoundRow], bool]:
    """
    Spectral error |K_P - K_bar|_2 of the induced Gram matrix against its
    closed-form expectation, per P and seed, next to the Bernstein-type bound.
    Returns the rows and whether the median error is non-increasing in P.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[1]
    if n < 2:
        raise InvalidArgumentError("bound check needs at least two points")
    if map_kind not in ("rff", "msrff"):
        raise InvalidStateError(f"no closed-form expected kernel for '{map_kind}' features")

    rows: List[KernelBoundRow] = []
    for P in P_list:
        errs, bounds = [], []
        for s in range(n_seeds):
            fmap = sample_feature_map(map_kind, points.shape[0], int(P), params, base_seed + s)
            K_bar = expected_kernel(fmap, points)
            errs.append(float(np.linalg.norm(induced_kernel(fmap, points) - K_bar, 2)))
            if map_kind == "rff":
                bounds.append(bernstein_bound(n, float(np.linalg.norm(K_bar, 2)), int(P)))
            else:
                D2 = cdist(points.T, points.T, "sqeuclidean")
                c = max(np.linalg.norm(np.exp(-0.5 * q ** 2 * D2), 2) for q in fmap.scales)
                bounds.append(multiscale_bound(n, float(c), int(P), len(fmap.scales)))
        errs_arr, bounds_arr = np.asarray(errs), np.asarray(bounds)
        rows.append(KernelBoundRow(int(P), errs, float(np.median(errs_arr)), float(np.median(bounds_arr)),
                                   float(np.mean(errs_arr <= bounds_arr))))
    monotone = all(b.median_error <= a.median_error for a, b in zip(rows, rows[1:]))
    return rows, monotone


###############################################################################
# 5. Benchmark presets
###############################################################################

@dataclass(frozen=True)
class BenchmarkPreset:
    """DM settings, split sizes at scale 1.0, tuning ranges and reported optima"""
    name: str
    alpha: float
    w1: float
    d: int
    split: Tuple[int, int, int]
    ranges: Dict[str, Tuple[float, float]]
    optimum: Dict[str, float] = field(default_factory=dict)
    mass_preserving: bool = False
    snaps: int = 0
    ddm_rank: Optional[int] = None     # cap on retained DDM eigenpairs


PRESETS: Dict[str, BenchmarkPreset] = {
    "swiss": BenchmarkPreset(
        "swiss", 1.0, 0.12, 2, (1000, 1000, 1000),
        {"sigma_w": (0.1, 1.0), "sigma_ub": (1.0, 10.0), "c": (1.0, 20.0), "w2": (0.3, 0.9), "k": (2, 11)},
        {"sigma_w": 0.3, "sigma_ub": 6.0, "c": 8.0, "w2": 0.4, "k": 6},
    ),
    "swiss-dense": BenchmarkPreset(
        "swiss-dense", 1.0, 0.12, 2, (400, 400, 1200),
        {"sigma_w": (0.1, 1.0), "sigma_ub": (1.0, 10.0), "c": (1.0, 20.0), "w2": (0.3, 0.9), "k": (2, 11)},
        {"sigma_w": 0.3, "sigma_ub": 6.0, "c": 8.0, "w2": 0.4, "k": 6},
    ),
    "scurve": BenchmarkPreset(
        "scurve", 1.0, 0.2, 2, (1000, 1000, 1000),
        {"sigma_w": (0.1, 1.0), "sigma_ub": (2.0, 10.0), "c": (5.0, 18.0), "w2": (0.3, 0.9), "k": (2, 11)},
    ),
    "lwr": BenchmarkPreset(
        "lwr", 0.0, 1.0, 2, (2000, 2000, 8000),
        {"sigma_w": (0.1, 1.0), "sigma_ub": (2.0, 15.0), "c": (1.0, 20.0), "w2": (0.2, 1.0), "k": (2, 11)},
        {"sigma_w": 0.16, "sigma_ub": 8.5, "c": 11.0, "w2": 0.6, "k": 6},
        mass_preserving=True, snaps=120, ddm_rank=5,
    ),
    "mri": BenchmarkPreset(
        "mri", 1.0, 0.5, 2, (720, 720, 2160),
        {"sigma_w": (0.02, 0.1), "sigma_ub": (35.0, 65.0), "c": (45.0, 120.0), "w2": (0.2, 1.0), "k": (2, 11)},
        mass_preserving=True, ddm_rank=13,
    ),
    "hughes": BenchmarkPreset(
        "hughes", 1.0, 0.4, 10, (5000, 5000, 20000),
        {"sigma_w": (0.2, 1.0), "sigma_ub": (1.0, 10.0), "c": (1.0, 20.0), "w2": (0.1, 1.0), "k": (2, 18)},
        {"sigma_w": 0.4, "sigma_ub": 2.5, "c": 4.0, "w2": 1.45, "k": 10},
        mass_preserving=True, snaps=375, ddm_rank=25,
    ),
}


def preset(benchmark_id: str) -> BenchmarkPreset:
    if benchmark_id not in PRESETS:
        raise InvalidArgumentError(f"unknown benchmark '{benchmark_id}', expected one of {list(PRESETS)}")
    return PRESETS[benchmark_id]


def scaled_split(p: BenchmarkPreset, scale_factor: float) -> Tuple[int, int, int]:
    if not scale_factor > 0:
        raise InvalidArgumentError(f"scale_factor must be positive, got {scale_factor}")
    return tuple(max(2, int(round(n * scale_factor))) for n in p.split)


def generate_benchmark(p: BenchmarkPreset, n_total: int, seed: int, jobs: int = 1,
                       image_size: int = 128) -> DataSet:
    """Dataset with at least n_total columns for the preset"""
    if p.name.startswith("swiss"):
        return gen_swiss_roll(n_total, seed=seed)
    if p.name == "scurve":
        return gen_scurve_20d(n_total, seed=seed)
    if p.name == "mri":
        return gen_rotated_images(gen_phantom(image_size), n_total, seed=seed, random_angles=False)
    n_traj = max(1, math.ceil(n_total / p.snaps))
    if p.name == "lwr":
        return lwr_generate(Lwr1dConfig(seed=seed), n_traj, p.snaps, jobs=jobs)
    return hughes_generate(Hughes2dConfig(seed=seed), n_traj, p.snaps, jobs=jobs)


def grid_for(p: BenchmarkPreset, config: DecoderConfig, n_values: int = 10) -> List[float]:
    """n_values equispaced points over the preset range; k grids are integer"""
    lo, hi = p.ranges[config.hyper]
    grid = np.linspace(lo, hi, n_values)
    if config.hyper == "k":
        return [int(v) for v in np.unique(np.round(grid).astype(int))]
    return [float(v) for v in grid]


def feature_count(config: DecoderConfig, n_train: int, fraction: float, msrff_q: int = 10) -> int:
    P = max(1, int(round(fraction * n_train)))
    if config.feature == "msrff":
        P = max(msrff_q, msrff_q * int(round(P / msrff_q)))
    return P


###############################################################################
# 6. Table reproduction
###############################################################################

TABLE_COLUMNS = ["benchmark", "split", "decoder", "P", "hyper", "value"] + [
    f"{metric}_{stat}" for metric in ("e2", "einf", "econ") for stat in ("mean", "median", "p5", "p95")
] + ["fit_time", "infer_time", "runs"]


@dataclass
class BenchReport:
    benchmark: str
    rows: List[Dict[str, Any]]
    paths: List[Path]


def _aggregate_row(base: Dict[str, Any], reports: List[EvalReport]) -> Dict[str, Any]:
    row = dict(base)
    for metric in ("e2", "einf", "econ"):
        per_run = [getattr(r, metric) for r in reports]
        if per_run[0] is None:
            row.update({f"{metric}_{s}": "" for s in ("mean", "median", "p5", "p95")})
            continue
        run_means = [float(np.mean(v)) for v in per_run]
        stats = summarize(run_means)
        row.update({f"{metric}_{s}": stats[s] for s in ("mean", "median", "p5", "p95")})
    row["fit_time"] = float(np.median([r.fit_time for r in reports]))
    row["infer_time"] = float(np.median([r.infer_time for r in reports]))
    row["runs"] = len(reports)
    return row


def _write_points(path: Path, report: EvalReport):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "e2", "einf", "econ"])
        for i in range(report.e2.size):
            econ = "" if report.econ is None else repr(float(report.econ[i]))
            writer.writerow([i, repr(float(report.e2[i])), repr(float(report.einf[i])), econ])


def reproduce_table(benchmark_id: str, scale_factor: float = 1.0, output_dir=RANDSMAP_OUTPUT_DIR,
                    n_runs: int = 1, base_seed: int = 0, p_fractions: Sequence[float] = (1.0,),
                    all_decoders: bool = False, decoders: Optional[Sequence[str]] = None,
                    use_reported_optimum: bool = False, grid_size: int = 10, jobs: int = 1,
                    lam: float = RANDSMAP_LAMBDA, delta_S: float = RANDSMAP_DELTA_S,
                    eval_limit: Optional[int] = None, image_size: int = 128) -> BenchReport:
    """
    generate -> split -> encode -> tune -> fit -> eval for every decoder
    configuration; one CSV table per split plus per-point CSVs and a JSON
    summary

    Random-feature rows repeat the final fit over n_runs feature seeds;
    deterministic decoders run once. On data without the sum-to-one
    invariant the RANDSMAP rows fall back to their RFNN counterparts.
    ``eval_limit`` caps the number of validation/test points for k-NN.
    """
    p = preset(benchmark_id)
    n_train, n_val, n_test = scaled_split(p, scale_factor)
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    log_step_start(1, "generate", f"{benchmark_id} at scale {scale_factor}")
    ds = generate_benchmark(p, n_train + n_val + n_test, base_seed, jobs, image_size)
    if ds.N > n_train + n_val + n_test:
        ds = ds.subset(np.arange(n_train + n_val + n_test))
    train_ds, val_ds, test_ds = split(ds, SplitSpec(n_train, n_val, None, base_seed))
    log_step_end(1, "generate", f"M={ds.M}, N={ds.N}")

    log_step_start(2, "encode", f"alpha={p.alpha}, w1={p.w1}, d={p.d}")
    t0 = time.perf_counter()
    dm_model = dm_fit(train_ds.X, p.alpha, p.w1, p.d, coord_scale="rms")
    encoder_time = time.perf_counter() - t0
    mass = ds.mass_preserving
    train = LatentPairs(dm_model.embedding().Y, train_ds.X, mass)
    val = LatentPairs(dm_encode(dm_model, val_ds.X).Y, val_ds.X, mass)
    t0 = time.perf_counter()
    Y_test = dm_encode(dm_model, test_ds.X).Y
    encode_test_time = time.perf_counter() - t0
    test = LatentPairs(Y_test, test_ds.X, mass)
    log_step_end(2, "encode", f"{encoder_time:.2f}s")

    names = list(decoders) if decoders else list(DECODER_CONFIGS if all_decoders else DEFAULT_DECODERS)
    configs: List[DecoderConfig] = []
    for name in names:
        cfg = decoder_config(name)
        if cfg.family == "RANDSMAP" and not mass:
            cfg = DECODER_CONFIGS[cfg.name.replace("RANDSMAP", "RFNN")]
        if cfg not in configs:
            configs.append(cfg)

    def limited(pairs: LatentPairs) -> LatentPairs:
        if eval_limit is None:
            return pairs
        return LatentPairs(pairs.Y[:, :eval_limit], pairs.X[:, :eval_limit], pairs.mass_preserving)

    fit_kwargs = {"dm_model": dm_model, "lam": lam, "delta_S": delta_S, "pod_d": p.d, "ddm_rank": p.ddm_rank}
    tables: Dict[str, List[Dict[str, Any]]] = {"train": [], "test": []}
    paths: List[Path] = []
    step = 3
    for cfg in configs:
        fractions = p_fractions if cfg.uses_features else (None,)
        for frac in fractions:
            P = feature_count(cfg, n_train, frac) if cfg.uses_features else None
            kwargs = dict(fit_kwargs, P=P)
            cfg_val, cfg_test = (limited(val), limited(test)) if cfg.family == "KNN" else (val, test)

            log_step_start(step, cfg.name, f"P={P}")
            tune_time = 0.0
            if cfg.hyper is None:
                value = None
            elif use_reported_optimum and cfg.hyper in p.optimum:
                value = p.optimum[cfg.hyper]
            else:
                result = tune(cfg, grid_for(p, cfg, grid_size), train, cfg_val, base_seed, jobs, **kwargs)
                value, tune_time = result.best, result.elapsed

            def run(seed, cfg=cfg, value=value, kwargs=kwargs, cfg_test=cfg_test):
                t0 = time.perf_counter()
                fitted = fit_decoder(cfg, value, train, seed, **kwargs)
                fit_time = encoder_time + tune_time + (time.perf_counter() - t0)
                train_report = evaluate(fitted, train if cfg.family != "KNN" else limited(train), jobs)
                t0 = time.perf_counter()
                test_report = evaluate(fitted, cfg_test, 1)
                infer_time = encode_test_time + (time.perf_counter() - t0)
                for r in (train_report, test_report):
                    r.fit_time, r.infer_time, r.run_seed = fit_time, infer_time, seed
                return train_report, test_report

            runs = n_runs if cfg.uses_features else 1
            reports = [run(base_seed + i) for i in range(runs)]
            base = {"benchmark": benchmark_id, "decoder": cfg.name, "P": P if P is not None else "-",
                    "hyper": cfg.hyper or "-", "value": value if value is not None else "-"}
            label = cfg.name if P is None else f"{cfg.name}-P{P}"
            for idx, split_name in enumerate(("train", "test")):
                split_reports = [r[idx] for r in reports]
                tables[split_name].append(_aggregate_row(dict(base, split=split_name), split_reports))
                point_path = out_dir / f"{benchmark_id}_{label}_{split_name}.csv"
                _write_points(point_path, split_reports[0])
                paths.append(point_path)
            log_step_end(step, cfg.name, f"{cfg.hyper}={value}")
            step += 1

    for split_name, rows in tables.items():
        path = out_dir / f"{benchmark_id}_table_{split_name}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
        paths.append(path)

    summary_path = out_dir / f"{benchmark_id}_summary.json"
    write_json(summary_path, {
        "benchmark": benchmark_id,
        "scale_factor": scale_factor,
        "split": [n_train, n_val, n_test],
        "M": ds.M,
        "dm": {"alpha": p.alpha, "w1": p.w1, "d": p.d, "epsilon1": dm_model.epsilon1},
        "ddm_rank": p.ddm_rank,
        "n_runs": n_runs,
        "base_seed": base_seed,
        "rows": tables,
    })
    paths.append(summary_path)
    logger.info(f"✅ Wrote {len(paths)} report files to {out_dir}")
    return BenchReport(benchmark_id, tables["train"] + tables["test"], paths)
