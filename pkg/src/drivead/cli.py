"""Operator commands: synth, prepare, train, score, compare.

Every command is deterministic given its resolved config and seed, writes
plot-ready CSV artifacts, and records a manifest with content hashes so
`compare` can refuse runs produced from different stores.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import os
import sys

import numpy as np

from .data.pipeline import (LabelStats, MPH_15_IN_MPS, fit_scaler,
                            scale_array, segment, speed_filter, split)
from .data.synth import GeneratorConfig, synth_trace
from .data.trace import CHANNEL_NAMES, export_csv, ingest_csv
from .data import downsample
from .errors import ConfigError, DataError, DriveAdError, NumericError
from .model.baseline import BaselineAutoencoder, EnsembleModel
from .model.checkpoint import load_into, save_checkpoint
from .model.config import MANEUVERS, SYMBOL_TO_ID, ModelConfig
from .model.multitask import MultiTaskModel
from .model.train import (TrainSettings, VARIANTS, WindowArrays,
                          train_baseline, train_ensemble, train_multitask,
                          vocab_class_weights, evaluate_multitask)
from .numeric import SeededRng, assert_finite
from .scoring import (COMBINED, GaussianErrorModel, error_vectors,
                      REPORT_PERCENTILES, detection_report, scaled_score,
                      sequence_nll)
from .store import hash_file, load_store, save_store, store_hash

FLOAT_FMT = ".10g"


def _fmt(x) -> str:
    return format(float(x), FLOAT_FMT)


def _write_manifest(out_dir, payload):
    files = {}
    for name in sorted(os.listdir(out_dir)):
        if name == "manifest.json":
            continue
        p = os.path.join(out_dir, name)
        if os.path.isfile(p):
            files[name] = hash_file(p)
    payload = dict(payload)
    payload["files"] = files
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _read_manifest(run_dir):
    p = os.path.join(run_dir, "manifest.json")
    if not os.path.exists(p):
        raise DataError(f"{run_dir}: no manifest.json")
    with open(p) as fh:
        return json.load(fh)


# -- synth -------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = GeneratorConfig.from_file(args.config) if args.config else GeneratorConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    os.makedirs(args.out, exist_ok=True)
    rng = SeededRng(cfg.seed)
    for i in range(args.traces):
        trace = synth_trace(cfg, rng=rng.spawn(), trace_id=f"trace_{i:03d}")
        export_csv(trace, os.path.join(args.out, f"trace_{i:03d}.csv"))
    cfg.to_file(os.path.join(args.out, "generator.cfg"))
    _write_manifest(args.out, {"command": "synth", "seed": cfg.seed,
                               "traces": args.traces})
    print(f"wrote {args.traces} trace(s) to {args.out}")
    return 0


# -- prepare -----------------------------------------------------------------

def cmd_prepare(args) -> int:
    paths = sorted(glob.glob(os.path.join(args.data, "trace_*.csv")))
    if not paths:
        raise DataError(f"no trace_*.csv files under {args.data}")
    exclude_id = None
    if args.exclude_label:
        if args.exclude_label not in MANEUVERS:
            raise ConfigError(f"unknown --exclude-label {args.exclude_label!r}")
        exclude_id = SYMBOL_TO_ID[args.exclude_label]

    windows = []
    for p in paths:
        trace = ingest_csv(p)
        trace = downsample(trace, args.target_hz)
        windows.extend(segment(trace, start_id=len(windows)))
    n_segmented = len(windows)
    windows = speed_filter(windows, MPH_15_IN_MPS)
    if not windows:
        raise DataError("no windows left after the speed filter")
    train_w, test_w = split(windows, args.train_fraction, args.split_mode,
                            seed=args.seed or 0)
    if exclude_id is not None:
        train_w = [w for w in train_w if w.majority_label != exclude_id]
    if not train_w or not test_w:
        raise DataError("empty train or test split")
    scaler = fit_scaler(train_w)
    stats = LabelStats.fit(train_w)
    train = WindowArrays.from_windows(train_w)
    test = WindowArrays.from_windows(test_w)
    train.inputs = scale_array(scaler, train.inputs).astype(np.float32)
    test.inputs = scale_array(scaler, test.inputs).astype(np.float32)

    meta = {
        "segmented": n_segmented,
        "kept_after_speed_filter": len(windows),
        "train_windows": len(train_w),
        "test_windows": len(test_w),
        "exclude_label": args.exclude_label,
        "train_fraction": args.train_fraction,
        "split_mode": args.split_mode,
        "target_hz": args.target_hz,
    }
    save_store(args.out, train, test, scaler, stats, meta)
    _write_manifest(args.out, {"command": "prepare", "meta": meta,
                               "store_hash": store_hash(args.out)})
    print(f"windows: {n_segmented} segmented, {len(windows)} kept, "
          f"{len(train_w)} train / {len(test_w)} test")
    return 0


# -- train -------------------------------------------------------------------

def _model_config(args) -> ModelConfig:
    if args.paper_scale:
        cfg = ModelConfig.paper_scale()
    else:
        cfg = ModelConfig(hidden_size=args.hidden)
    return cfg


def _settings(args) -> TrainSettings:
    if args.paper_scale:
        s = TrainSettings.paper_scale(seed=args.seed or 0)
        if args.epochs is not None:
            s.epochs = args.epochs
        return s
    return TrainSettings(epochs=args.epochs if args.epochs is not None else 10,
                         batch_size=args.batch_size, seed=args.seed or 0)


def _metrics_writer(path):
    fh = open(path, "w", newline="")
    writer = csv.writer(fh)
    writer.writerow(["epoch", "L_O", "L_A", "L_B", "L_R", "symbol_accuracy"])

    def log(m):
        writer.writerow([m.epoch, _fmt(m.l_o), _fmt(m.l_a), _fmt(m.l_b),
                         _fmt(m.l_r), _fmt(m.symbol_accuracy)])
        fh.flush()

    return fh, log


def cmd_train(args) -> int:
    train, test, _, stats, meta = load_store(args.store)
    cfg = _model_config(args)
    settings = _settings(args)
    if args.variant not in VARIANTS:
        raise ConfigError(f"unknown variant {args.variant!r}")
    os.makedirs(args.out, exist_ok=True)
    fh, log = _metrics_writer(os.path.join(args.out, "metrics.csv"))
    member_labels = None
    try:
        rng = SeededRng(settings.seed)
        if args.variant == "multitask" or args.variant == "symbol_only":
            if args.variant == "symbol_only":
                # dedicated symbol decoder: full weight on the sequence loss
                cfg.w_a = 0.0
                cfg.w_b = 1.0
            model = MultiTaskModel(cfg, rng)
            train_multitask(model, train, test, stats, settings, log=log)
            params = model.params()
        elif args.variant == "baseline_ae":
            model = BaselineAutoencoder(cfg.channels, cfg.window_steps,
                                        cfg.hidden_size, cfg.lstm_layers, rng,
                                        dtype=cfg.np_dtype)
            train_baseline(model, train, test, settings, log=log)
            params = model.params()
        else:  # ensemble
            model, history = train_ensemble(cfg, train, test, settings)
            for m in history:
                log(m)
            params = model.params()
            member_labels = model.labels
    finally:
        fh.close()
    save_checkpoint(params, os.path.join(args.out, "checkpoint.ckpt"))
    run_config = {
        "variant": args.variant,
        "model": cfg.to_dict(),
        "settings": {
            "epochs": settings.epochs, "batch_size": settings.batch_size,
            "learning_rate": settings.learning_rate,
            "epsilon": settings.epsilon, "clip_norm": settings.clip_norm,
            "seed": settings.seed,
        },
        "member_labels": member_labels,
    }
    with open(os.path.join(args.out, "config.json"), "w") as fh2:
        json.dump(run_config, fh2, sort_keys=True, indent=1)
        fh2.write("\n")
    _write_manifest(args.out, {"command": "train", "variant": args.variant,
                               "store": os.path.abspath(args.store),
                               "store_hash": store_hash(args.store),
                               "store_meta": meta})
    print(f"trained {args.variant}: checkpoint + metrics in {args.out}")
    return 0


def _rebuild_model(run_dir):
    cfg_path = os.path.join(run_dir, "config.json")
    if not os.path.exists(cfg_path):
        raise DataError(f"{run_dir} is not a training run (no config.json)")
    with open(cfg_path) as fh:
        run_config = json.load(fh)
    cfg = ModelConfig.from_dict(run_config["model"])
    variant = run_config["variant"]
    rng = SeededRng(0)
    if variant in ("multitask", "symbol_only"):
        model = MultiTaskModel(cfg, rng)
    elif variant == "baseline_ae":
        model = BaselineAutoencoder(cfg.channels, cfg.window_steps,
                                    cfg.hidden_size, cfg.lstm_layers, rng,
                                    dtype=cfg.np_dtype)
    elif variant == "ensemble":
        members = []
        for label in run_config["member_labels"]:
            member = BaselineAutoencoder(cfg.channels, cfg.window_steps,
                                         cfg.hidden_size, cfg.lstm_layers,
                                         rng, dtype=cfg.np_dtype,
                                         name=f"m{label}")
            members.append((label, member))
        model = EnsembleModel(members)
    else:
        raise ConfigError(f"unknown variant in run config: {variant!r}")
    ckpt = os.path.join(run_dir, "checkpoint.ckpt")
    if not os.path.exists(ckpt):
        raise DataError(f"missing checkpoint {ckpt}")
    load_into(model.params(), ckpt)
    return variant, cfg, model


# -- score -------------------------------------------------------------------

def _batched_reconstruction(model, inputs, batch=512):
    parts = [model.reconstruction(inputs[i:i + batch])
             for i in range(0, len(inputs), batch)]
    return np.concatenate(parts, axis=0)


def _batched_symbols(model, inputs, batch=512):
    parts = [model.predict_symbols(inputs[i:i + batch])
             for i in range(0, len(inputs), batch)]
    return np.concatenate(parts, axis=0)


def cmd_score(args) -> int:
    train, test, _, stats, _ = load_store(args.store)
    variant, cfg, model = _rebuild_model(args.run)
    if variant == "symbol_only":
        raise ConfigError("symbol_only runs have no reconstruction to score")
    os.makedirs(args.out, exist_ok=True)

    if variant == "ensemble":
        raw_combined, _ = model.ensemble_loss(test.inputs)
        assert_finite(raw_combined, "ensemble scores")
        rows = [("combined", raw_combined)]
        nll = None
    else:
        recon_train = _batched_reconstruction(model, train.inputs)
        recon_test = _batched_reconstruction(model, test.inputs)
        errs_train = error_vectors(train.inputs, recon_train)
        errs_test = error_vectors(test.inputs, recon_test)
        rows = []
        for modality, errs in errs_train.items():
            gem = GaussianErrorModel.fit(errs, modality)
            scores = gem.mahalanobis(errs_test[modality])
            assert_finite(scores, f"{modality} scores")
            rows.append((modality, scores))
        nll = None
        if variant == "multitask":
            symbols = _batched_symbols(model, test.inputs)
            nll = np.array([sequence_nll(s, stats) for s in symbols])
        # per-feature reconstruction losses for cross-variant comparison
        with open(os.path.join(args.out, "feature_mse.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["feature", "mse"])
            e = recon_test.astype(np.float64) - test.inputs
            for c, name in enumerate(CHANNEL_NAMES):
                w.writerow([name, _fmt((e[:, :, c] ** 2).mean())])
            w.writerow([COMBINED, _fmt((e ** 2).sum(axis=(1, 2)).mean())])

    with open(os.path.join(args.out, "scores.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window_id", "modality", "raw_score", "nll",
                    "scaled_score", "majority_label", "anomaly_fraction"])
        for modality, scores in rows:
            for i in range(len(test)):
                if nll is None:
                    nll_s, scaled_s = "", ""
                else:
                    nll_s = _fmt(nll[i])
                    scaled_s = _fmt(scaled_score(float(scores[i]), float(nll[i])))
                w.writerow([int(test.ids[i]), modality, _fmt(scores[i]),
                            nll_s, scaled_s,
                            MANEUVERS[int(test.majority[i])],
                            _fmt(test.anomaly_fraction[i])])

    manifest = _read_manifest(args.run)
    _write_manifest(args.out, {"command": "score", "variant": variant,
                               "run": os.path.abspath(args.run),
                               "store_hash": store_hash(args.store)})
    del manifest
    print(f"scored {len(test)} test windows ({variant}) into {args.out}")
    return 0


# -- compare -----------------------------------------------------------------

def _load_scores(score_dir):
    manifest = _read_manifest(score_dir)
    rows = {}
    with open(os.path.join(score_dir, "scores.csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            rows.setdefault(row["modality"], []).append(row)
    feature_mse = {}
    fpath = os.path.join(score_dir, "feature_mse.csv")
    if os.path.exists(fpath):
        with open(fpath, newline="") as fh:
            for row in csv.DictReader(fh):
                feature_mse[row["feature"]] = float(row["mse"])
    return manifest, rows, feature_mse


def cmd_compare(args) -> int:
    if len(args.scores) < 2:
        raise ConfigError("compare needs at least two score directories")
    loaded = []
    for d in args.scores:
        manifest, rows, feature_mse = _load_scores(d)
        loaded.append((manifest["variant"], manifest, rows, feature_mse))
    hashes = {m["store_hash"] for _, m, _, _ in loaded}
    if len(hashes) != 1:
        raise DataError("score runs come from different stores "
                        f"(hashes: {sorted(hashes)})")
    os.makedirs(args.out, exist_ok=True)

    variants = [v for v, _, _, _ in loaded]
    with open(os.path.join(args.out, "recon_table.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["feature"] + variants)
        for feature in list(CHANNEL_NAMES) + [COMBINED]:
            w.writerow([feature] + [
                _fmt(fm[feature]) if feature in fm else ""
                for _, _, _, fm in loaded])

    def columns():
        for variant, _, rows, _ in loaded:
            combined = rows.get(COMBINED, [])
            ids = [int(r["window_id"]) for r in combined]
            raw = [(i, float(r["raw_score"])) for i, r in zip(ids, combined)]
            yield f"{variant}_raw", combined, raw
            if variant == "multitask" and combined and combined[0]["scaled_score"]:
                scaled = [(i, float(r["scaled_score"]))
                          for i, r in zip(ids, combined)]
                yield f"{variant}_scaled", combined, scaled

    cols = list(columns())
    for out_name, target_of in (
            ("rare_recall.csv",
             lambda r: r["majority_label"] == args.rare_label),
            ("anomaly_recall.csv",
             lambda r: float(r["anomaly_fraction"]) >= args.anomaly_threshold)):
        with open(os.path.join(args.out, out_name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["percentile"] + [name for name, _, _ in cols])
            reports = []
            for name, combined, scores in cols:
                targets = [int(r["window_id"]) for r in combined if target_of(r)]
                reports.append(detection_report(scores, targets,
                                                REPORT_PERCENTILES))
            for pi, p in enumerate(REPORT_PERCENTILES):
                w.writerow([p] + [rep[pi].formatted() for rep in reports])

    _write_manifest(args.out, {"command": "compare", "variants": variants,
                               "store_hash": hashes.pop()})
    print(f"comparison tables in {args.out}")
    return 0


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="drivead",
                                 description="Driving-telemetry anomaly "
                                             "detection pipeline")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic labeled traces")
    p.add_argument("--config", help="generator key=value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--traces", type=int, default=1)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("prepare", help="build the windowed train/test store")
    p.add_argument("--data", required=True, help="directory of trace_*.csv")
    p.add_argument("--out", required=True)
    p.add_argument("--exclude-label")
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--split-mode", choices=("chronological", "shuffled"),
                   default="chronological")
    p.add_argument("--target-hz", type=float, default=5.0)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_prepare)

    p = sub.add_parser("train", help="train one model variant")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variant", choices=VARIANTS, default="multitask")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--paper-scale", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("score", help="fit error models and score test windows")
    p.add_argument("--store", required=True)
    p.add_argument("--run", required=True, help="train output directory")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("compare", help="cross-variant comparison tables")
    p.add_argument("--out", required=True)
    p.add_argument("--rare-label", default="u_turn")
    p.add_argument("--anomaly-threshold", type=float, default=0.2)
    p.add_argument("scores", nargs="+", help="score output directories")
    p.set_defaults(fn=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except DriveAdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
