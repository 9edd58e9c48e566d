"""
Command-line front end

    gen           generate a benchmark dataset
    encode        fit Diffusion Maps or encode new points with a fitted model
    fit           fit a decoder on (latent, ambient) training pairs
    decode        reconstruct ambient points from latent points
    eval          per-point errors of a reconstruction
    tune          grid search of a decoder hyperparameter on a validation split
    repro         full table reproduction for a benchmark
    kernel-bench  random-feature kernel approximation vs its bound

Settings are merged as defaults < environment < --config JSON < flags.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Type

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from config import get_config
from src.bench import (
    DECODER_CONFIGS,
    PRESETS,
    LatentPairs,
    decoder_config,
    errors,
    feature_count,
    fit_decoder,
    kernel_bound_check,
    reproduce_table,
    tune,
)
from src.config import (
    RANDSMAP_DELTA_S,
    RANDSMAP_JOBS,
    RANDSMAP_LAMBDA,
    RANDSMAP_OUTPUT_DIR,
    RANDSMAP_SEED,
)
from src.containers import DataSet, export_csv, load_dataset, read_json, save_dataset, write_json
from src.debug_utils import format_summary, log_error
from src.decoders import decode, ddm_decode, knn_decode_batch, load_model, pod_decode, pod_encode, save_model
from src.dmap import dm_encode, dm_fit, load_dm_model, save_dm_model
from src.errors import GenerationError, InvalidArgumentError, RandsmapError
from src.pdesolvers import Hughes2dConfig, Lwr1dConfig, hughes_generate, lwr_generate
from src.randfeat import regenerate
from src.rng import make_rng, uniform
from src.synthdata import gen_phantom, gen_rotated_images, gen_scurve_20d, gen_swiss_roll

logger = logging.getLogger(__name__)

DEFAULT_HYPER = {"sigma_w": 0.3, "sigma_ub": 6.0, "c": 8.0, "w2": 0.4, "k": 6}


###############################################################################
# 1. Run configuration records
###############################################################################

class CommonConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=RANDSMAP_SEED, ge=0, description="random seed")
    jobs: int = Field(default=RANDSMAP_JOBS, ge=1, description="parallel workers")
    output_dir: str = Field(default=RANDSMAP_OUTPUT_DIR, description="output directory")
    verbose: bool = Field(default=False, description="debug logging")

    def out(self, name: Optional[str], fallback: str) -> Path:
        path = Path(name) if name else Path(self.output_dir) / fallback
        path.parent.mkdir(parents=True, exist_ok=True)
        return path


class GenConfig(CommonConfig):
    benchmark: Literal["swiss", "scurve", "mri", "lwr", "hughes"] = Field(description="dataset family")
    n: int = Field(default=1000, ge=1, description="points (swiss, scurve) or angles (mri)")
    noise_sigma: Optional[float] = Field(default=None, ge=0, description="noise level, generator default when unset")
    traj: int = Field(default=10, ge=1, description="PDE trajectories")
    snaps: int = Field(default=50, ge=1, description="snapshots per trajectory")
    image: Optional[str] = Field(default=None, description=".npy grayscale image, built-in phantom when unset")
    image_size: int = Field(default=128, ge=16, description="phantom size")
    random_angles: bool = Field(default=False, description="draw rotation angles instead of the equispaced grid")
    flux: Literal["godunov", "roe"] = Field(default="godunov", description="LWR numerical flux")
    eikonal_every: int = Field(default=1, ge=1, description="Hughes steps between eikonal solves")
    output: Optional[str] = Field(default=None, description="dataset file, <output-dir>/<benchmark>.bin when unset")
    dump_trajectories: bool = Field(default=False, description="also write one file per PDE trajectory")
    csv: bool = Field(default=False, description="also export the dataset as CSV")


class EncodeConfig(CommonConfig):
    input: str = Field(description="dataset to encode")
    dm_model: Optional[str] = Field(default=None, description="fitted model stem; fit a new one when unset")
    alpha: float = Field(default=1.0, ge=0, le=1, description="density normalization exponent")
    w1: float = Field(default=1.0, gt=0, description="bandwidth multiplier of the median distance")
    d: int = Field(default=2, ge=1, description="embedding dimension")
    coord_scale: Literal["unit", "rms"] = Field(default="unit", description="coordinate scaling")
    output: Optional[str] = Field(default=None, description="embedding file")
    model_out: Optional[str] = Field(default=None, description="stem for the fitted model")


class _DecoderChoice(CommonConfig):
    decoder: str = Field(description=f"one of {', '.join(DECODER_CONFIGS)} (case-insensitive)")
    features: str = Field(default="N", description="feature count P: an integer, N, N/2 or N/4")
    lam: float = Field(default=RANDSMAP_LAMBDA, ge=0, description="Tikhonov lambda")
    delta_s: float = Field(default=RANDSMAP_DELTA_S, gt=0, description="SVD truncation tolerance")
    pod_d: int = Field(default=2, ge=1, description="POD basis size")
    ddm_rank: Optional[int] = Field(default=None, ge=1, description="cap on retained DDM eigenpairs")
    dm_model: Optional[str] = Field(default=None, description="Diffusion Maps model stem (k-NN)")

    @field_validator("decoder", mode="before")
    @classmethod
    def _known_decoder(cls, v):
        return decoder_config(str(v)).name


class FitConfig(_DecoderChoice):
    input: str = Field(description="ambient training dataset")
    latent: Optional[str] = Field(default=None, description="training embedding (not needed for POD)")
    value: Optional[float] = Field(default=None, description=f"hyperparameter value, defaults {DEFAULT_HYPER}")
    output: Optional[str] = Field(default=None, description="model stem")


class DecodeConfig(CommonConfig):
    model: str = Field(description="model stem")
    latent: Optional[str] = Field(default=None, description="latent points (POD: coefficients)")
    input: Optional[str] = Field(default=None, description="ambient points to project (POD only)")
    feature_seed: Optional[int] = Field(default=None, description="rebuild the feature map with this seed")
    output: Optional[str] = Field(default=None, description="reconstruction file")


class EvalConfig(CommonConfig):
    truth: str = Field(description="reference dataset")
    reconstruction: str = Field(description="decoded dataset")
    output: Optional[str] = Field(default=None, description="JSON report")


class TuneConfig(_DecoderChoice):
    input: str = Field(description="ambient training dataset")
    latent: Optional[str] = Field(default=None, description="training embedding")
    val_input: str = Field(description="ambient validation dataset")
    val_latent: Optional[str] = Field(default=None, description="validation embedding")
    grid: Optional[List[float]] = Field(default=None, description="explicit grid values")
    grid_range: Optional[List[float]] = Field(default=None, description="lo hi for an equispaced grid")
    grid_size: int = Field(default=10, ge=1, description="points of an equispaced grid")
    output: Optional[str] = Field(default=None, description="JSON report")


class ReproConfig(CommonConfig):
    benchmark: str = Field(description=f"one of {', '.join(PRESETS)}")
    scale: float = Field(default=1.0, gt=0, description="fraction of the reference split sizes")
    n_runs: int = Field(default=1, ge=1, description="feature-map seeds per random-feature row")
    p_fractions: List[float] = Field(default=[1.0], description="feature counts as fractions of N")
    all_decoders: bool = Field(default=False, description="add RFNN-RFF, RFNN-MSRFF and POD rows")
    decoders: Optional[List[str]] = Field(default=None, description="explicit decoder list")
    use_reported_optimum: bool = Field(default=False, description="skip tuning where a reference optimum exists")
    eval_limit: Optional[int] = Field(default=None, ge=1, description="cap on k-NN evaluation points")
    grid_size: int = Field(default=10, ge=1, description="tuning grid points")

    @field_validator("benchmark", mode="before")
    @classmethod
    def _known_benchmark(cls, v):
        if v not in PRESETS:
            raise ValueError(f"unknown benchmark '{v}'")
        return v


class KernelBenchConfig(CommonConfig):
    kind: Literal["rff", "msrff"] = Field(default="rff", description="feature kind")
    sigma: float = Field(default=1.0, gt=0, description="sigma_w (rff) or sigma_ub (msrff)")
    q: int = Field(default=10, ge=1, description="MSRFF scale count")
    n_points: int = Field(default=40, ge=2, description="latent points, uniform in the unit cube")
    d: int = Field(default=2, ge=1, description="latent dimension")
    p_list: List[int] = Field(default=[8, 32, 128, 512, 2048, 8192], description="feature counts")
    n_seeds: int = Field(default=20, ge=1, description="seeds per feature count")
    output: Optional[str] = Field(default=None, description="JSON report")


def build_config(model: Type[BaseModel], args: argparse.Namespace) -> BaseModel:
    """--config JSON values, then explicit flags on top"""
    values: Dict[str, Any] = {}
    if getattr(args, "config", None):
        values.update(read_json(args.config))
    values.update({k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None})
    return model(**values)


###############################################################################
# 2. Helpers
###############################################################################

def _load_latent(path: Optional[str], what: str) -> np.ndarray:
    if not path:
        raise InvalidArgumentError(f"{what} embedding file is required")
    return load_dataset(path).X


def _feature_count(spec: str, n: int, cfg) -> int:
    spec = spec.strip().upper()
    fractions = {"N": 1.0, "N/2": 0.5, "N/4": 0.25}
    if spec in fractions:
        return feature_count(cfg, n, fractions[spec])
    try:
        return int(spec)
    except ValueError:
        raise InvalidArgumentError(f"feature count must be an integer, N, N/2 or N/4, got '{spec}'")


def _fit_kwargs(cfg: _DecoderChoice, decoder, n_train: int) -> Dict[str, Any]:
    kwargs: Dict[str, Any] = {"lam": cfg.lam, "delta_S": cfg.delta_s, "pod_d": cfg.pod_d,
                              "ddm_rank": cfg.ddm_rank}
    if decoder.uses_features:
        kwargs["P"] = _feature_count(cfg.features, n_train, decoder)
    if decoder.family == "KNN":
        if not cfg.dm_model:
            raise InvalidArgumentError("k-NN needs --dm-model")
        kwargs["dm_model"] = load_dm_model(cfg.dm_model)
    return kwargs


def _pairs(input_path: str, latent_path: Optional[str], decoder) -> LatentPairs:
    ds = load_dataset(input_path)
    if decoder.family == "POD" and not latent_path:
        Y = np.zeros((0, ds.N))
    else:
        Y = _load_latent(latent_path, "latent")
    if Y.shape[1] != ds.N:
        raise InvalidArgumentError(f"latent file has {Y.shape[1]} points, dataset has {ds.N}")
    return LatentPairs(Y, ds.X, ds.mass_preserving)


###############################################################################
# 3. Commands
###############################################################################

def cmd_gen(cfg: GenConfig) -> bool:
    output = cfg.out(cfg.output, f"{cfg.benchmark}.bin")
    kwargs = {} if cfg.noise_sigma is None else {"noise_sigma": cfg.noise_sigma}
    if cfg.benchmark == "swiss":
        ds = gen_swiss_roll(cfg.n, seed=cfg.seed, **kwargs)
    elif cfg.benchmark == "scurve":
        ds = gen_scurve_20d(cfg.n, seed=cfg.seed, **kwargs)
    elif cfg.benchmark == "mri":
        base = np.load(cfg.image) if cfg.image else gen_phantom(cfg.image_size)
        ds = gen_rotated_images(base, cfg.n, seed=cfg.seed, random_angles=cfg.random_angles)
    else:
        dump_dir = output.parent / f"{output.stem}_trajectories" if cfg.dump_trajectories else None
        try:
            if cfg.benchmark == "lwr":
                pde = Lwr1dConfig(seed=cfg.seed, flux=cfg.flux, **kwargs)
                ds = lwr_generate(pde, cfg.traj, cfg.snaps, jobs=cfg.jobs, dump_dir=dump_dir)
            else:
                pde = Hughes2dConfig(seed=cfg.seed, eikonal_every=cfg.eikonal_every)
                ds = hughes_generate(pde, cfg.traj, cfg.snaps, jobs=cfg.jobs, dump_dir=dump_dir)
        except InvalidArgumentError:
            raise
        except RandsmapError as e:
            raise GenerationError(f"{cfg.benchmark} solver failed: {e}") from e

    save_dataset(output, ds)
    if cfg.csv:
        export_csv(output.with_suffix(".csv"), ds)
    print(format_summary({"name": cfg.benchmark, "M": ds.M, "N": ds.N,
                          "mass_preserving": ds.mass_preserving,
                          "mass_drift": ds.meta.get("mass_drift")}))
    return True


def cmd_encode(cfg: EncodeConfig) -> bool:
    ds = load_dataset(cfg.input)
    if cfg.dm_model:
        model = load_dm_model(cfg.dm_model)
        Y = dm_encode(model, ds.X).Y
    else:
        model = dm_fit(ds.X, cfg.alpha, cfg.w1, cfg.d, cfg.coord_scale)
        Y = model.embedding().Y
        save_dm_model(cfg.out(cfg.model_out, "dm_model"), model)
    output = cfg.out(cfg.output, f"{Path(cfg.input).stem}_latent.bin")
    save_dataset(output, DataSet(Y, False, None, {"source": str(cfg.input), "epsilon1": model.epsilon1}))
    print(f"✅ Encoded {ds.N} points to d={Y.shape[0]} (eps1={model.epsilon1:.4g}) -> {output}")
    return True


def cmd_fit(cfg: FitConfig) -> bool:
    decoder = decoder_config(cfg.decoder)
    train = _pairs(cfg.input, cfg.latent, decoder)
    value = cfg.value if cfg.value is not None else DEFAULT_HYPER.get(decoder.hyper)
    fitted = fit_decoder(decoder, value, train, cfg.seed, **_fit_kwargs(cfg, decoder, train.X.shape[1]))
    json_path, _ = save_model(cfg.out(cfg.output, decoder.name.lower()), fitted.model)
    print(f"✅ Fitted {decoder.name} ({decoder.hyper}={value}, P={fitted.P}) -> {json_path}")
    return True


def cmd_decode(cfg: DecodeConfig) -> bool:
    model = load_model(cfg.model)
    if model.kind in ("RFNN", "RANDSMAP"):
        header = dict(model.feature_header)
        if cfg.feature_seed is not None:
            header["seed"] = cfg.feature_seed
            header.pop("fingerprint", None)
        rec = decode(model, regenerate(header), _load_latent(cfg.latent, "latent"))
    elif model.kind == "DDM":
        rec = ddm_decode(model, _load_latent(cfg.latent, "latent"))
    elif model.kind == "KNN":
        rec = knn_decode_batch(model, _load_latent(cfg.latent, "latent"), jobs=cfg.jobs)
    else:
        Z = pod_encode(model, load_dataset(cfg.input).X) if cfg.input else _load_latent(cfg.latent, "POD")
        rec = pod_decode(model, Z)

    output = cfg.out(cfg.output, f"{Path(cfg.model).stem}_decoded.bin")
    meta = {"model": str(cfg.model), "kind": model.kind}
    if rec.converged is not None:
        meta["knn_converged"] = int(rec.converged.sum())
    save_dataset(output, DataSet(rec.X_hat, False, None, meta))
    worst = "" if rec.conservation is None else f", max conservation error {rec.conservation.max(initial=0):.3e}"
    print(f"✅ Decoded {rec.X_hat.shape[1]} points{worst} -> {output}")
    return True


def cmd_eval(cfg: EvalConfig) -> bool:
    truth = load_dataset(cfg.truth)
    rec = load_dataset(cfg.reconstruction)
    report = errors(truth.X, rec.X, truth.mass_preserving)
    summary = {k: v for k, v in report.summary().items() if k not in ("fit_time", "infer_time")}
    write_json(cfg.out(cfg.output, "eval_report.json"), {
        "truth": str(cfg.truth), "reconstruction": str(cfg.reconstruction),
        "summary": summary, "e2": report.e2, "einf": report.einf, "econ": report.econ,
    })
    line = f"e2 mean {summary['e2']['mean']:.4e}, einf mean {summary['einf']['mean']:.4e}"
    if summary["econ"] is not None:
        line += f", econ mean {summary['econ']['mean']:.4e}"
    print(f"✅ {line}")
    return True


def cmd_tune(cfg: TuneConfig) -> bool:
    decoder = decoder_config(cfg.decoder)
    if decoder.hyper is None:
        raise InvalidArgumentError(f"{decoder.name} has no tunable hyperparameter")
    train = _pairs(cfg.input, cfg.latent, decoder)
    val = _pairs(cfg.val_input, cfg.val_latent, decoder)
    if cfg.grid:
        grid = cfg.grid
    elif cfg.grid_range and len(cfg.grid_range) == 2:
        grid = [float(v) for v in np.linspace(cfg.grid_range[0], cfg.grid_range[1], cfg.grid_size)]
    else:
        raise InvalidArgumentError("give --grid values or --grid-range LO HI")
    if decoder.hyper == "k":
        grid = sorted({int(round(v)) for v in grid})
    result = tune(decoder, grid, train, val, cfg.seed, cfg.jobs,
                  **_fit_kwargs(cfg, decoder, train.X.shape[1]))
    write_json(cfg.out(cfg.output, f"tune_{decoder.name.lower()}.json"), {
        "decoder": decoder.name, "hyper": decoder.hyper, "grid": result.grid,
        "val_errors": result.val_errors, "best": result.best,
    })
    print(f"✅ {decoder.name}: best {decoder.hyper}={result.best:g}")
    return True


def cmd_repro(cfg: ReproConfig) -> bool:
    report = reproduce_table(cfg.benchmark, cfg.scale, cfg.output_dir, n_runs=cfg.n_runs,
                             base_seed=cfg.seed, p_fractions=cfg.p_fractions,
                             all_decoders=cfg.all_decoders, decoders=cfg.decoders,
                             use_reported_optimum=cfg.use_reported_optimum, grid_size=cfg.grid_size,
                             jobs=cfg.jobs, eval_limit=cfg.eval_limit)
    for row in report.rows:
        econ = row["econ_mean"]
        econ = f"{econ:.3e}" if econ != "" else "-"
        print(f"  {row['split']:5s} {row['decoder']:15s} P={row['P']!s:6s} "
              f"e2={row['e2_mean']:.4e} econ={econ}")
    print(f"✅ Wrote {len(report.paths)} files to {cfg.output_dir}")
    return True


def cmd_kernel_bench(cfg: KernelBenchConfig) -> bool:
    points = uniform(make_rng(cfg.seed), 0.0, 1.0, (cfg.d, cfg.n_points))
    params = {"sigma_w": cfg.sigma} if cfg.kind == "rff" else {"sigma_ub": cfg.sigma, "Q": cfg.q}
    rows, monotone = kernel_bound_check(cfg.kind, params, points, cfg.p_list, cfg.n_seeds, cfg.seed)
    write_json(cfg.out(cfg.output, f"kernel_bench_{cfg.kind}.json"), {
        "kind": cfg.kind, "params": params, "n_points": cfg.n_points, "monotone": monotone,
        "rows": [row.__dict__ for row in rows],
    })
    for row in rows:
        print(f"  P={row.P:6d} median error {row.median_error:.4e} bound {row.bound:.4e} "
              f"within {100 * row.within_bound:.0f}%")
    print(f"{'✅' if monotone else '⚠️'} median error non-increasing in P: {monotone}")
    return True


COMMANDS = {
    "gen": (GenConfig, cmd_gen),
    "encode": (EncodeConfig, cmd_encode),
    "fit": (FitConfig, cmd_fit),
    "decode": (DecodeConfig, cmd_decode),
    "eval": (EvalConfig, cmd_eval),
    "tune": (TuneConfig, cmd_tune),
    "repro": (ReproConfig, cmd_repro),
    "kernel-bench": (KernelBenchConfig, cmd_kernel_bench),
}


###############################################################################
# 4. Parser and entry point
###############################################################################

def _add_fields(parser: argparse.ArgumentParser, model: Type[BaseModel]):
    """One flag per record field; unset flags stay None so lower layers win"""
    for name, info in model.model_fields.items():
        flag = "--" + name.replace("_", "-")
        default = "required" if info.is_required() else info.default
        help_text = f"{info.description} (default: {default})"
        annotation = str(info.annotation)
        if info.annotation is bool:
            parser.add_argument(flag, dest=name, action="store_const", const=True, default=None, help=help_text)
        elif "List[int]" in annotation or "list[int]" in annotation:
            parser.add_argument(flag, dest=name, type=int, nargs="+", default=None, help=help_text)
        elif "List[float]" in annotation or "list[float]" in annotation:
            parser.add_argument(flag, dest=name, type=float, nargs="+", default=None, help=help_text)
        elif "List[str]" in annotation or "list[str]" in annotation:
            parser.add_argument(flag, dest=name, nargs="+", default=None, help=help_text)
        else:
            parser.add_argument(flag, dest=name, default=None, help=help_text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randsmap", description="Mass-preserving manifold decoders")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (model, _) in COMMANDS.items():
        p = sub.add_parser(name, help=model.__name__, description=f"{name}: {model.__name__}")
        p.add_argument("--config", default=None, help="JSON file with settings (flags take precedence)")
        _add_fields(p, model)
    for name in ("fit", "tune"):
        sub.choices[name].add_argument("--lambda", dest="lam", default=None, help="alias of --lam")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = get_config()
    settings.init_app(verbose=bool(getattr(args, "verbose", False)))

    model, handler = COMMANDS[args.command]
    try:
        cfg = build_config(model, args)
        success = handler(cfg)
        return 0 if success else 1
    except ValidationError as e:
        log_error(args.command, f"invalid arguments: {e}")
        return InvalidArgumentError.exit_code
    except RandsmapError as e:
        log_error(args.command, str(e))
        return e.exit_code
    except FileNotFoundError as e:
        log_error(args.command, f"missing file: {e}")
        return 4


if __name__ == "__main__":
    sys.exit(main())
