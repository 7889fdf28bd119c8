"""Command-line surface: determinism, exit codes, file contracts."""
import csv
import json
import os

import pytest

from vdm.cli import main
from vdm.data import load_csv


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def simulate_four_mode(out, seed=7, n=(40, 10, 10)):
    rc = main(
        [
            "simulate", "--gen", "four_mode", "--seed", str(seed), "--out", str(out),
            "--n-train", str(n[0]), "--n-val", str(n[1]), "--n-test", str(n[2]),
        ]
    )
    assert rc == 0
    return os.path.join(str(out), "manifest.json")


def train_tiny(data_manifest, out, seed=3, extra=()):
    rc = main(
        [
            "train", "--data", data_manifest, "--seed", str(seed), "--out", str(out),
            "--d-z", "2", "--d-h", "4", "--k", "5", "--epochs", "1",
            "--batch-size", "16", "--val-forecasts", "5", *extra,
        ]
    )
    return rc, os.path.join(str(out), "checkpoint.vdm")


def test_simulate_deterministic_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    simulate_four_mode(a)
    simulate_four_mode(b)
    for name in ("train.csv", "val.csv", "test.csv", "manifest.json"):
        assert read(a / name) == read(b / name), name


def test_simulate_four_mode_counts_and_length(tmp_path):
    manifest_path = simulate_four_mode(tmp_path / "d", n=(1000, 5, 5))
    manifest = json.loads(read(manifest_path))
    assert manifest["counts"]["train"] == 1000
    assert manifest["seq_len"] == 4
    ds = load_csv(tmp_path / "d" / "train.csv", 2, 4, 1)
    assert len(ds) == 1000


def test_simulate_lorenz_outputs_groups(tmp_path):
    out = tmp_path / "lz"
    rc = main(
        [
            "simulate", "--gen", "lorenz", "--seed", "5", "--out", str(out),
            "--n-train", "8", "--n-val", "2", "--n-test", "2", "--seq-len", "15",
            "--prefix-len", "5", "--n-groups", "2", "--group-size", "4",
        ]
    )
    assert rc == 0
    manifest = json.loads(read(out / "manifest.json"))
    assert manifest["groups"] == ["group_00.csv", "group_01.csv"]
    assert manifest["d_x"] == 3
    record = json.loads(read(out / "run_record.json"))
    assert record["command"] == "simulate"
    assert record["config"]["seed"] == 5


def test_unknown_generator_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--gen", "brownian", "--seed", "1", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_missing_seed_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--gen", "lorenz", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_train_zero_epochs_writes_initialized_checkpoint(tmp_path):
    manifest = simulate_four_mode(tmp_path / "data")
    rc, ckpt = train_tiny(manifest, tmp_path / "run", extra=("--epochs", "0"))
    assert rc == 0
    assert os.path.exists(ckpt)
    assert os.path.exists(tmp_path / "run" / "metrics.csv")
    record = json.loads(read(tmp_path / "run" / "run_record.json"))
    assert record["config"]["epochs"] == 0


def test_train_deterministic_checkpoint_bytes(tmp_path):
    manifest = simulate_four_mode(tmp_path / "data")
    _, c1 = train_tiny(manifest, tmp_path / "r1")
    _, c2 = train_tiny(manifest, tmp_path / "r2")
    assert read(c1) == read(c2)


def test_train_config_file_with_flag_override(tmp_path):
    manifest = simulate_four_mode(tmp_path / "data")
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"epochs": 0, "d_z": 2, "d_h": 4, "k": 5,
                                    "batch_size": 16, "data": manifest}))
    out = tmp_path / "run"
    rc = main(["train", "--config", str(cfg_path), "--seed", "3", "--out", str(out),
               "--d-h", "8"])
    assert rc == 0
    record = json.loads(read(out / "run_record.json"))
    assert record["config"]["d_h"] == 8  # flag beats config file
    assert record["config"]["epochs"] == 0


def test_train_four_mode_flag_wiring(tmp_path):
    """The k=9, d_z=4 configuration with both regularizers disabled."""
    manifest = simulate_four_mode(tmp_path / "data")
    out = tmp_path / "run"
    rc = main(
        [
            "train", "--data", manifest, "--seed", "1", "--out", str(out),
            "--k", "9", "--d-z", "4", "--d-h", "8", "--omega1", "0",
            "--omega2", "0", "--epochs", "0",
        ]
    )
    assert rc == 0
    record = json.loads(read(out / "run_record.json"))
    assert (record["config"]["k"], record["config"]["d_z"]) == (9, 4)
    assert record["config"]["omega1"] == 0.0
    from vdm.checkpoint import load_checkpoint

    ckpt = load_checkpoint(out / "checkpoint.vdm")
    assert ckpt.config.k == 9
    assert ckpt.config.omega2 == 0.0


def test_train_unknown_config_key_fails(tmp_path):
    manifest = simulate_four_mode(tmp_path / "data")
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"learning_late": 0.1}))
    rc = main(["train", "--config", str(cfg_path), "--data", manifest,
               "--seed", "1", "--out", str(tmp_path / "x")])
    assert rc == 1


def test_evaluate_without_groups_omits_w_distance(tmp_path):
    manifest = simulate_four_mode(tmp_path / "data")
    _, ckpt = train_tiny(manifest, tmp_path / "run", extra=("--epochs", "0"))
    out = tmp_path / "eval"
    rc = main(
        [
            "evaluate", "--data", manifest, "--checkpoint", ckpt, "--seed", "11",
            "--out", str(out), "--n-forecasts", "10", "--limit", "5",
        ]
    )
    assert rc == 0
    with open(out / "metrics_report.csv") as fh:
        rows = list(csv.DictReader(fh))
    metrics = {r["metric"] for r in rows}
    assert metrics == {"multi_step_nll", "one_step_nll"}
    record = json.loads(read(out / "run_record.json"))
    assert "omitted" in record["config"]["note"]
    for r in rows:
        assert r["checkpoint_id"]
        assert r["seed"] == "11"


def test_evaluate_with_groups_reports_w_distance(tmp_path):
    out_data = tmp_path / "lz"
    main(
        [
            "simulate", "--gen", "lorenz", "--seed", "5", "--out", str(out_data),
            "--n-train", "8", "--n-val", "2", "--n-test", "4", "--seq-len", "12",
            "--prefix-len", "4", "--n-groups", "2", "--group-size", "4",
        ]
    )
    manifest = os.path.join(str(out_data), "manifest.json")
    rc, ckpt = train_tiny(manifest, tmp_path / "run", extra=("--epochs", "0"))
    assert rc == 0
    out = tmp_path / "eval"
    rc = main(
        [
            "evaluate", "--data", manifest, "--checkpoint", ckpt, "--seed", "2",
            "--out", str(out), "--n-forecasts", "5", "--w-forecasts", "2",
        ]
    )
    assert rc == 0
    with open(out / "metrics_report.csv") as fh:
        rows = {r["metric"]: r for r in csv.DictReader(fh)}
    assert "w_distance" in rows
    assert float(rows["w_distance"]["value"]) > 0
    assert rows["w_distance"]["stderr"] != ""


def test_evaluate_dimension_mismatch_fails(tmp_path):
    four = simulate_four_mode(tmp_path / "data4")
    _, ckpt = train_tiny(four, tmp_path / "run", extra=("--epochs", "0"))
    out_data = tmp_path / "lz"
    main(
        [
            "simulate", "--gen", "lorenz", "--seed", "5", "--out", str(out_data),
            "--n-train", "4", "--n-val", "2", "--n-test", "2", "--seq-len", "12",
            "--n-groups", "0",
        ]
    )
    rc = main(
        [
            "evaluate", "--data", os.path.join(str(out_data), "manifest.json"),
            "--checkpoint", ckpt, "--seed", "1", "--out", str(tmp_path / "e"),
        ]
    )
    assert rc == 1


def test_forecast_deterministic_and_shaped(tmp_path):
    manifest = simulate_four_mode(tmp_path / "data")
    _, ckpt = train_tiny(manifest, tmp_path / "run", extra=("--epochs", "0"))
    outs = []
    for name in ("f1", "f2"):
        out = tmp_path / name
        rc = main(
            [
                "forecast", "--data", manifest, "--checkpoint", ckpt, "--seed", "9",
                "--out", str(out), "--n", "3", "--limit", "2", "--horizon", "3",
            ]
        )
        assert rc == 0
        outs.append(read(out / "forecasts.csv"))
    assert outs[0] == outs[1]
    with open(tmp_path / "f1" / "forecasts.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 3 * 3  # trajectories x forecasts x horizon
    assert set(rows[0]) == {"seq_id", "forecast_id", "t", "x0", "x1"}
    assert rows[0]["t"] == "1"  # continuation starts after the prefix


def test_forecast_prior_export(tmp_path):
    manifest = simulate_four_mode(tmp_path / "data")
    _, ckpt = train_tiny(manifest, tmp_path / "run", extra=("--epochs", "0"))
    out = tmp_path / "fc"
    rc = main(
        [
            "forecast", "--data", manifest, "--checkpoint", ckpt, "--seed", "9",
            "--out", str(out), "--n", "2", "--limit", "1", "--export-prior",
            "--prior-draws", "5",
        ]
    )
    assert rc == 0
    with open(out / "prior_0.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5  # prefix has one step
    assert set(rows[0]) == {"step", "z0", "z1"}


@pytest.mark.parametrize("horizon", ["-2", "0"])
def test_forecast_invalid_horizon_fails(tmp_path, horizon):
    manifest = simulate_four_mode(tmp_path / "data")
    _, ckpt = train_tiny(manifest, tmp_path / "run", extra=("--epochs", "0"))
    rc = main(
        [
            "forecast", "--data", manifest, "--checkpoint", ckpt, "--seed", "9",
            "--out", str(tmp_path / "x"), "--horizon", horizon,
        ]
    )
    assert rc == 1


def test_run_records_written_for_all_commands(tmp_path):
    manifest = simulate_four_mode(tmp_path / "data")
    assert os.path.exists(tmp_path / "data" / "run_record.json")
    rc, ckpt = train_tiny(manifest, tmp_path / "run", extra=("--epochs", "0"))
    assert os.path.exists(tmp_path / "run" / "run_record.json")
    main(
        [
            "evaluate", "--data", manifest, "--checkpoint", ckpt, "--seed", "1",
            "--out", str(tmp_path / "ev"), "--n-forecasts", "3", "--limit", "2",
        ]
    )
    record = json.loads(read(tmp_path / "ev" / "run_record.json"))
    assert record["config"]["n_forecasts"] == 3
    assert record["config"]["seed"] == 1
