import csv

import numpy as np
import orjson
import pytest

from src.bench import (
    DECODER_CONFIGS,
    LatentPairs,
    decoder_config,
    errors,
    feature_count,
    fit_decoder,
    generate_benchmark,
    grid_for,
    kernel_bound_check,
    percentile_nearest_rank,
    preset,
    repeat_runs,
    reproduce_table,
    scaled_split,
    select_best,
    summarize,
    tune,
)
from src.decoders import conservation_residual, fit_rf_decoder
from src.dmap import dm_fit
from src.errors import InvalidArgumentError, InvalidStateError, TuningError, UndefinedMetricError
from src.synthdata import SplitSpec, gen_swiss_roll, split


####################
# Metrics
####################

def test_relative_errors_per_column():
    X_true = np.array([[1.0, 0.0], [0.0, 2.0]])
    X_hat = np.array([[1.0, 0.0], [0.0, 1.0]])
    report = errors(X_true, X_hat, mass_flag=True)
    np.testing.assert_allclose(report.e2, [0.0, 0.5])
    np.testing.assert_allclose(report.einf, [0.0, 0.5])
    np.testing.assert_allclose(report.econ, [0.0, 0.0])
    assert errors(X_true, X_hat, mass_flag=False).econ is None


def test_zero_reference_column_is_undefined():
    with pytest.raises(UndefinedMetricError):
        errors(np.zeros((2, 1)), np.ones((2, 1)), False)


def test_shape_mismatch():
    with pytest.raises(InvalidArgumentError):
        errors(np.ones((2, 2)), np.ones((2, 3)), False)


def test_nearest_rank_percentiles():
    values = np.arange(1.0, 11.0)
    assert percentile_nearest_rank(values, 5) == 1.0
    assert percentile_nearest_rank(values, 50) == 5.0
    assert percentile_nearest_rank(values, 95) == 10.0
    assert percentile_nearest_rank(values, 0) == 1.0
    assert summarize([3.0, 1.0, 2.0]) == {"mean": 2.0, "median": 2.0, "p5": 1.0, "p95": 3.0}
    with pytest.raises(InvalidArgumentError):
        percentile_nearest_rank([], 50)


####################
# Tuning and runs
####################

def test_ties_go_to_the_smaller_value():
    result = select_best([3.0, 1.0, 2.0], lambda v: 0.5)
    assert result.best == 1.0


def test_failed_cells_are_skipped():
    def score(v):
        if v == 2.0:
            raise InvalidArgumentError("bad cell")
        if v == 3.0:
            return float("nan")
        return v

    result = select_best([4.0, 2.0, 3.0, 5.0], score)
    assert result.val_errors == [4.0, None, None, 5.0]
    assert result.best == 4.0


def test_all_cells_failing():
    def score(v):
        raise InvalidArgumentError("nope")

    with pytest.raises(TuningError):
        select_best([1.0, 2.0], score)


def test_parallel_grid_gives_same_choice():
    score = lambda v: (v - 0.4) ** 2
    grid = list(np.linspace(0.1, 1.0, 10))
    assert select_best(grid, score).best == select_best(grid, score, jobs=3).best


@pytest.fixture
def swiss_pairs():
    ds = gen_swiss_roll(240, seed=1)
    train, val, _ = split(ds, SplitSpec(160, 40, seed=0))
    return (LatentPairs(train.intrinsic, train.X), LatentPairs(val.intrinsic, val.X))


def test_tune_refits_best_ddm(swiss_pairs):
    train, val = swiss_pairs
    result = tune(decoder_config("DDM"), [-1.0, 0.3, 0.6], train, val, seed=0)
    assert result.val_errors[0] is None
    assert result.best in (0.3, 0.6)
    assert result.fitted.value == result.best
    assert result.elapsed > 0


def test_ddm_rank_cap_reaches_the_fit(swiss_pairs):
    train, _ = swiss_pairs
    capped = fit_decoder(decoder_config("DDM"), 0.6, train, seed=0, ddm_rank=preset("lwr").ddm_rank)
    full = fit_decoder(decoder_config("DDM"), 0.6, train, seed=0)
    assert capped.model.trunc_rank == 5
    assert full.model.trunc_rank > 5


def test_repeat_runs_aggregates_each_metric():
    agg = repeat_runs(lambda seed: {"x": float(seed), "y": 1.0}, n_runs=5, base_seed=10)
    assert agg["x"].values == [10.0, 11.0, 12.0, 13.0, 14.0]
    assert (agg["x"].mean, agg["x"].median, agg["x"].p5, agg["x"].p95) == (12.0, 12.0, 10.0, 14.0)
    assert agg["y"].mean == 1.0

    parallel = repeat_runs(lambda seed: {"x": float(seed)}, n_runs=5, base_seed=10, jobs=2)
    assert parallel["x"].values == agg["x"].values


####################
# Kernel bound check
####################

def test_kernel_error_shrinks_and_respects_bound():
    points = np.random.default_rng(0).uniform(0.0, 1.0, (2, 40))
    rows, monotone = kernel_bound_check("rff", {"sigma_w": 1.0}, points, [512, 8192], n_seeds=20)
    assert monotone
    assert rows[0].median_error / rows[1].median_error >= 2.0
    assert all(row.within_bound >= 0.9 for row in rows)


def test_kernel_bound_check_for_multiscale_features():
    points = np.random.default_rng(0).uniform(0.0, 1.0, (2, 20))
    rows, _ = kernel_bound_check("msrff", {"sigma_ub": 6.0, "Q": 10}, points, [100, 1000], n_seeds=5)
    assert [row.P for row in rows] == [100, 1000]
    assert all(row.bound > 0 for row in rows)


def test_kernel_bound_check_rejects_sigmoid():
    with pytest.raises(InvalidStateError):
        kernel_bound_check("sigmoid", {"c": 1.0}, np.zeros((2, 5)), [10])


####################
# Presets and grids
####################

def test_decoder_lookup_is_case_insensitive():
    assert decoder_config("randsmap-rff") is DECODER_CONFIGS["RANDSMAP-RFF"]
    assert decoder_config("KNN").hyper == "k"
    assert decoder_config("pod").hyper is None
    with pytest.raises(InvalidArgumentError):
        decoder_config("nope")


def test_grids_and_feature_counts():
    p = preset("swiss")
    assert grid_for(p, decoder_config("kNN")) == list(range(2, 12))
    assert grid_for(p, decoder_config("DDM"), 3) == pytest.approx([0.3, 0.6, 0.9])
    assert feature_count(decoder_config("RANDSMAP-MSRFF"), 1000, 0.25) == 250
    assert feature_count(decoder_config("RANDSMAP-MSRFF"), 33, 1.0) % 10 == 0
    assert scaled_split(p, 0.05) == (50, 50, 50)
    with pytest.raises(InvalidArgumentError):
        preset("moon")


####################
# Table reproduction
####################

def _read_table(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_small_swiss_table(tmp_path):
    report = reproduce_table("swiss", scale_factor=0.05, output_dir=tmp_path,
                             decoders=["RANDSMAP-RFF", "DDM", "POD"], grid_size=3)
    rows = _read_table(tmp_path / "swiss_table_test.csv")
    # no sum-to-one invariant on the Swiss roll, so RANDSMAP falls back to RFNN
    assert [r["decoder"] for r in rows] == ["RFNN-RFF", "DDM", "POD"]
    assert all(r["econ_mean"] == "" for r in rows)
    assert all(float(r["e2_mean"]) >= 0 for r in rows)
    assert (tmp_path / "swiss_RFNN-RFF-P50_test.csv").exists()
    assert len(report.rows) == 6

    summary = orjson.loads((tmp_path / "swiss_summary.json").read_bytes())
    assert summary["split"] == [50, 50, 50]


def test_small_image_table_reports_conservation(tmp_path):
    reproduce_table("mri", scale_factor=0.02, output_dir=tmp_path, decoders=["RANDSMAP-RFF", "kNN"],
                    grid_size=2, eval_limit=4, image_size=16)
    rows = {r["decoder"]: r for r in _read_table(tmp_path / "mri_table_test.csv")}
    assert set(rows) == {"RANDSMAP-RFF", "kNN"}
    assert float(rows["kNN"]["econ_mean"]) <= 1e-12
    assert float(rows["RANDSMAP-RFF"]["econ_mean"]) >= 0



def _tables(out_dir, benchmark_id):
    return {split_name: {r["decoder"]: r for r in _read_table(out_dir / f"{benchmark_id}_table_{split_name}.csv")}
            for split_name in ("train", "test")}


####################
# Traffic benchmark at desk scale
####################

RANDSMAP_KINDS = ["RANDSMAP-RFF", "RANDSMAP-MSRFF", "RANDSMAP-Sig"]


@pytest.fixture(scope="module")
def traffic_desk(tmp_path_factory):
    """N=500 training snapshots, P=N, reported optima"""
    out = tmp_path_factory.mktemp("lwr_desk")
    reproduce_table("lwr", scale_factor=0.25, output_dir=out, decoders=RANDSMAP_KINDS + ["RFNN-Sig", "DDM"],
                    use_reported_optimum=True)
    return _tables(out, "lwr")


def test_desk_traffic_layout():
    p = preset("lwr")
    assert scaled_split(p, 0.25) == (500, 500, 2000)
    assert p.snaps == 120
    assert preset("hughes").snaps == 375


def test_desk_traffic_randsmap_conserves_mass(traffic_desk):
    for split_name, rows in traffic_desk.items():
        for name in RANDSMAP_KINDS:
            assert float(rows[name]["econ_mean"]) <= 1e-6, (split_name, name)


def test_desk_traffic_conservation_gap(traffic_desk):
    test = traffic_desk["test"]
    ddm = float(test["DDM"]["econ_mean"])
    for name in RANDSMAP_KINDS:
        assert ddm >= 1e6 * float(test[name]["econ_mean"]), name
    assert float(test["RFNN-Sig"]["econ_mean"]) >= 1e2 * float(test["RANDSMAP-Sig"]["econ_mean"])


def test_desk_traffic_ddm_oversmooths_shocks(traffic_desk):
    test = traffic_desk["test"]
    assert test["DDM"]["value"] == "0.6"
    assert float(test["DDM"]["e2_mean"]) >= 2.0 * float(test["RANDSMAP-Sig"]["e2_mean"])


def test_desk_traffic_truncation_residual():
    p = preset("lwr")
    n_train, n_val, n_test = scaled_split(p, 0.25)
    ds = generate_benchmark(p, n_train + n_val + n_test, seed=0)
    train, _, _ = split(ds, SplitSpec(n_train, n_val, None, 0))
    Y = dm_fit(train.X, p.alpha, p.w1, p.d, coord_scale="rms").embedding().Y

    for kind, params in [("msrff", {"sigma_ub": 8.5, "Q": 10}), ("rff", {"sigma_w": 0.16}), ("sigmoid", {"c": 11.0})]:
        model, _ = fit_rf_decoder("RANDSMAP", kind, Y, train.X, n_train, params, seed=0)
        e, sigma_next = conservation_residual(model)
        assert e <= sigma_next + 1e-12, kind
        if kind == "msrff":
            assert abs(np.log10(e / 2.4e-8)) <= 1.0
            assert abs(np.log10(sigma_next / 2.6e-8)) <= 1.0


@pytest.mark.slow
def test_traffic_ddm_error_at_full_scale(tmp_path):
    reproduce_table("lwr", scale_factor=1.0, output_dir=tmp_path, decoders=["RANDSMAP-Sig", "DDM"],
                    use_reported_optimum=True)
    test = _tables(tmp_path, "lwr")["test"]
    assert float(test["DDM"]["e2_mean"]) >= 3.0 * float(test["RANDSMAP-Sig"]["e2_mean"])
    assert float(test["DDM"]["econ_mean"]) >= 1e6 * float(test["RANDSMAP-Sig"]["econ_mean"])


####################
# Swiss roll at full scale
####################

@pytest.mark.slow
def test_swiss_roll_full_scale_errors(tmp_path):
    reproduce_table("swiss", scale_factor=1.0, output_dir=tmp_path, decoders=["RFNN-Sig", "kNN"], eval_limit=200)
    tables = _tables(tmp_path, "swiss")
    assert 0.055 <= float(tables["test"]["RFNN-Sig"]["e2_mean"]) <= 0.085
    assert 0.05 <= float(tables["train"]["kNN"]["e2_mean"]) <= 0.075
