import csv
import json
import os

import numpy as np
import pytest

from drivead.cli import main
from drivead.model.config import MANEUVERS, SYMBOL_TO_ID
from drivead.store import load_store, store_hash


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One small synth -> prepare -> train -> score -> compare pipeline."""
    root = tmp_path_factory.mktemp("cli")
    data = str(root / "data")
    store = str(root / "store")
    assert main(["synth", "--out", data, "--seed", "13", "--traces", "2"]) == 0
    assert main(["prepare", "--data", data, "--out", store]) == 0
    run_mt = str(root / "run_mt")
    run_ae = str(root / "run_ae")
    assert main(["train", "--store", store, "--out", run_mt,
                 "--variant", "multitask", "--seed", "1", "--epochs", "1",
                 "--hidden", "8"]) == 0
    assert main(["train", "--store", store, "--out", run_ae,
                 "--variant", "baseline_ae", "--seed", "1", "--epochs", "1",
                 "--hidden", "8"]) == 0
    sc_mt = str(root / "sc_mt")
    sc_ae = str(root / "sc_ae")
    assert main(["score", "--store", store, "--run", run_mt,
                 "--out", sc_mt]) == 0
    assert main(["score", "--store", store, "--run", run_ae,
                 "--out", sc_ae]) == 0
    cmp_dir = str(root / "cmp")
    assert main(["compare", "--out", cmp_dir, sc_mt, sc_ae]) == 0
    return {"root": root, "data": data, "store": store, "run_mt": run_mt,
            "run_ae": run_ae, "sc_mt": sc_mt, "sc_ae": sc_ae, "cmp": cmp_dir}


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_metrics_schema(workspace):
    rows = read_rows(os.path.join(workspace["run_mt"], "metrics.csv"))
    assert rows[0] == ["epoch", "L_O", "L_A", "L_B", "L_R", "symbol_accuracy"]
    assert len(rows) == 2  # one epoch


def test_scores_schema(workspace):
    rows = read_rows(os.path.join(workspace["sc_mt"], "scores.csv"))
    assert rows[0] == ["window_id", "modality", "raw_score", "nll",
                       "scaled_score", "majority_label", "anomaly_fraction"]
    modalities = {r[1] for r in rows[1:]}
    assert modalities == {"steer_angle", "steer_speed", "speed", "yaw",
                          "pedal_angle", "pedal_pressure", "combined"}
    for r in rows[1:5]:
        assert float(r[2]) >= 0.0
        assert r[5] in MANEUVERS


def test_feature_mse_rows(workspace):
    rows = read_rows(os.path.join(workspace["sc_mt"], "feature_mse.csv"))
    assert [r[0] for r in rows[1:]] == ["steer_angle", "steer_speed", "speed",
                                        "yaw", "pedal_angle",
                                        "pedal_pressure", "combined"]


def test_compare_tables(workspace):
    recon = read_rows(os.path.join(workspace["cmp"], "recon_table.csv"))
    assert [r[0] for r in recon[1:]] == ["steer_angle", "steer_speed",
                                         "speed", "yaw", "pedal_angle",
                                         "pedal_pressure", "combined"]
    assert recon[0] == ["feature", "multitask", "baseline_ae"]
    rare = read_rows(os.path.join(workspace["cmp"], "rare_recall.csv"))
    assert [r[0] for r in rare[1:]] == ["0.001", "0.01", "0.1", "0.5", "1.0"]
    assert rare[0] == ["percentile", "multitask_raw", "multitask_scaled",
                       "baseline_ae_raw"]


def test_manifests_written(workspace):
    for d in ("store", "run_mt", "sc_mt", "cmp"):
        path = os.path.join(workspace[d], "manifest.json")
        with open(path) as fh:
            manifest = json.load(fh)
        assert "files" in manifest


def test_rerun_is_byte_identical(workspace, tmp_path):
    run2 = str(tmp_path / "run2")
    assert main(["train", "--store", workspace["store"], "--out", run2,
                 "--variant", "multitask", "--seed", "1", "--epochs", "1",
                 "--hidden", "8"]) == 0
    for name in ("metrics.csv", "checkpoint.ckpt"):
        a = open(os.path.join(workspace["run_mt"], name), "rb").read()
        b = open(os.path.join(run2, name), "rb").read()
        assert a == b, name


def test_rescoring_is_byte_identical(workspace, tmp_path):
    sc2 = str(tmp_path / "sc2")
    assert main(["score", "--store", workspace["store"],
                 "--run", workspace["run_mt"], "--out", sc2]) == 0
    a = open(os.path.join(workspace["sc_mt"], "scores.csv"), "rb").read()
    b = open(os.path.join(sc2, "scores.csv"), "rb").read()
    assert a == b


def test_compare_variant_with_itself(workspace, tmp_path):
    out = str(tmp_path / "self")
    assert main(["compare", "--out", out, workspace["sc_ae"],
                 workspace["sc_ae"]]) == 0
    recon = read_rows(os.path.join(out, "recon_table.csv"))
    for row in recon[1:]:
        assert row[1] == row[2]


def test_exclude_label_drops_from_train_only(workspace, tmp_path):
    store2 = str(tmp_path / "store2")
    assert main(["prepare", "--data", workspace["data"], "--out", store2,
                 "--exclude-label", "left_turn"]) == 0
    train, test, _, _, meta = load_store(store2)
    assert SYMBOL_TO_ID["left_turn"] not in train.majority
    assert meta["exclude_label"] == "left_turn"
    # test split is untouched relative to the unfiltered store
    base_train, base_test, _, _, _ = load_store(workspace["store"])
    assert np.array_equal(test.ids, base_test.ids)


def test_config_error_exit_code(workspace, tmp_path):
    rc = main(["prepare", "--data", workspace["data"],
               "--out", str(tmp_path / "s"), "--exclude-label", "flying"])
    assert rc == 2


def test_data_error_exit_codes(workspace, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["prepare", "--data", str(empty),
                 "--out", str(tmp_path / "s")]) == 3
    assert main(["score", "--store", workspace["store"],
                 "--run", str(tmp_path / "nope"), "--out",
                 str(tmp_path / "sc")]) == 3


def test_compare_refuses_mismatched_stores(workspace, tmp_path):
    # rebuild a store from a different seed and score against it
    data2 = str(tmp_path / "data2")
    store2 = str(tmp_path / "store2")
    assert main(["synth", "--out", data2, "--seed", "99", "--traces", "1"]) == 0
    assert main(["prepare", "--data", data2, "--out", store2]) == 0
    assert store_hash(store2) != store_hash(workspace["store"])
    run2 = str(tmp_path / "run2")
    sc2 = str(tmp_path / "sc2")
    assert main(["train", "--store", store2, "--out", run2,
                 "--variant", "baseline_ae", "--seed", "1", "--epochs", "1",
                 "--hidden", "8"]) == 0
    assert main(["score", "--store", store2, "--run", run2,
                 "--out", sc2]) == 0
    assert main(["compare", "--out", str(tmp_path / "cmp"),
                 workspace["sc_mt"], sc2]) == 3


def test_symbol_only_variant_trains_but_cannot_score(workspace, tmp_path):
    run = str(tmp_path / "run_sym")
    assert main(["train", "--store", workspace["store"], "--out", run,
                 "--variant", "symbol_only", "--seed", "1", "--epochs", "1",
                 "--hidden", "8"]) == 0
    assert main(["score", "--store", workspace["store"], "--run", run,
                 "--out", str(tmp_path / "sc")]) == 2


def test_ensemble_variant_end_to_end(workspace, tmp_path):
    run = str(tmp_path / "run_ens")
    sc = str(tmp_path / "sc_ens")
    assert main(["train", "--store", workspace["store"], "--out", run,
                 "--variant", "ensemble", "--seed", "1", "--epochs", "1",
                 "--hidden", "4"]) == 0
    assert main(["score", "--store", workspace["store"], "--run", run,
                 "--out", sc]) == 0
    rows = read_rows(os.path.join(sc, "scores.csv"))
    assert {r[1] for r in rows[1:]} == {"combined"}
