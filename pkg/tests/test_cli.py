import orjson
import pytest

from src.cli import GenConfig, build_config, build_parser, main
from src.decoders import load_model


def _read(path):
    return orjson.loads(path.read_bytes())


def test_gen_is_reproducible(tmp_path):
    out = tmp_path / "swiss.bin"
    args = ["gen", "--benchmark", "swiss", "--n", "50", "--seed", "3", "--output", str(out)]
    assert main(args) == 0
    first = out.read_bytes()
    assert main(args) == 0
    assert out.read_bytes() == first


def test_gen_traffic_dataset(tmp_path):
    out = tmp_path / "lwr.bin"
    assert main(["gen", "--benchmark", "lwr", "--traj", "2", "--snaps", "5", "--output", str(out)]) == 0
    header = _read(tmp_path / "lwr.bin.json")
    assert (header["M"], header["N"]) == (400, 10)
    assert header["mass_preserving"] is True


def test_unknown_config_key_is_an_argument_error(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_bytes(orjson.dumps({"bogus": 1}))
    assert main(["gen", "--benchmark", "swiss", "--config", str(cfg)]) == 2


def test_unknown_decoder_is_an_argument_error(tmp_path):
    assert main(["fit", "--decoder", "magic", "--input", str(tmp_path / "x.bin")]) == 2


def test_missing_input_file(tmp_path):
    assert main(["encode", "--input", str(tmp_path / "missing.bin")]) == 4


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "gen.json"
    cfg.write_bytes(orjson.dumps({"benchmark": "swiss", "n": 30, "seed": 1}))
    args = build_parser().parse_args(["gen", "--config", str(cfg), "--n", "20"])
    resolved = build_config(GenConfig, args)
    assert resolved.n == 20
    assert resolved.seed == 1


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["fit", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "(default:" in out
    assert "--lambda" in out


@pytest.fixture
def image_run(tmp_path):
    """Rotated 16x16 phantom encoded with rms-scaled Diffusion Maps"""
    paths = {
        "data": tmp_path / "mri.bin",
        "latent": tmp_path / "mri_latent.bin",
        "dm": tmp_path / "dm",
        "model": tmp_path / "randsmap",
        "decoded": tmp_path / "decoded.bin",
    }
    assert main(["gen", "--benchmark", "mri", "--n", "40", "--image-size", "16",
                 "--output", str(paths["data"])]) == 0
    assert main(["encode", "--input", str(paths["data"]), "--coord-scale", "rms",
                 "--output", str(paths["latent"]), "--model-out", str(paths["dm"])]) == 0
    assert main(["fit", "--decoder", "randsmap-rff", "--input", str(paths["data"]),
                 "--latent", str(paths["latent"]), "--value", "0.5", "--output", str(paths["model"])]) == 0
    return paths


def test_fit_decode_eval_chain(tmp_path, image_run):
    assert main(["decode", "--model", str(image_run["model"]), "--latent", str(image_run["latent"]),
                 "--output", str(image_run["decoded"])]) == 0
    report_path = tmp_path / "report.json"
    assert main(["eval", "--truth", str(image_run["data"]), "--reconstruction", str(image_run["decoded"]),
                 "--output", str(report_path)]) == 0
    report = _read(report_path)
    assert report["summary"]["econ"] is not None
    assert len(report["e2"]) == 40


def test_decoding_with_another_feature_seed_fails(image_run):
    assert main(["decode", "--model", str(image_run["model"]), "--latent", str(image_run["latent"]),
                 "--feature-seed", "99", "--output", str(image_run["decoded"])]) == 5


def test_tune_command(tmp_path):
    train, val = tmp_path / "train.bin", tmp_path / "val.bin"
    lat, vlat, dm = tmp_path / "train_latent.bin", tmp_path / "val_latent.bin", tmp_path / "dm"
    out = tmp_path / "tune.json"
    assert main(["gen", "--benchmark", "swiss", "--n", "80", "--seed", "1", "--output", str(train)]) == 0
    assert main(["gen", "--benchmark", "swiss", "--n", "40", "--seed", "2", "--output", str(val)]) == 0
    assert main(["encode", "--input", str(train), "--coord-scale", "rms",
                 "--output", str(lat), "--model-out", str(dm)]) == 0
    assert main(["encode", "--input", str(val), "--dm-model", str(dm), "--output", str(vlat)]) == 0
    assert main(["tune", "--decoder", "ddm", "--input", str(train), "--latent", str(lat),
                 "--val-input", str(val), "--val-latent", str(vlat), "--grid", "0.3", "0.6",
                 "--output", str(out)]) == 0
    result = _read(out)
    assert result["best"] in (0.3, 0.6)
    assert result["hyper"] == "w2"


def test_kernel_bench_command(tmp_path):
    out = tmp_path / "kb.json"
    assert main(["kernel-bench", "--p-list", "64", "1024", "--n-seeds", "3", "--n-points", "10",
                 "--output", str(out)]) == 0
    result = _read(out)
    assert [row["P"] for row in result["rows"]] == [64, 1024]


def test_fit_ddm_with_rank_cap(tmp_path, image_run):
    stem = tmp_path / "ddm"
    assert main(["fit", "--decoder", "ddm", "--input", str(image_run["data"]), "--latent", str(image_run["latent"]),
                 "--value", "0.6", "--ddm-rank", "3", "--output", str(stem)]) == 0
    assert load_model(stem).trunc_rank == 3
