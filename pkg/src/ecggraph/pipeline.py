"""Stage orchestration: ingest -> features -> graph -> train -> eval.

Every stage reads the artifact written by the stage before it from
``out_dir`` and writes its own, so stages can be rerun individually.
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import evaluate
from .features import (FEATURE_NAMES, FeatureSet, StandardizationStats, assemble_dataset,
                       fit_standardization, read_features_csv, standardize, write_features_csv)
from .graph import GraphSpec, build_graph_spec
from .model import (CLASSES, ModelConfig, encode_labels, load_checkpoint, predict, save_checkpoint,
                    train as train_model)
from .preprocess import FilterSpec
from .wfdb_ingest import INTER_PATIENT_SPLIT, DatasetSplit, load_dataset, load_records, write_annotation_audit

log = logging.getLogger(__name__)

PUBLISHED_ROWS = {"train": 50557, "test": 49273}

INGEST_FILE = "ingest.json"
TRAIN_CSV = "features_train.csv"
TEST_CSV = "features_test.csv"
STATS_FILE = "stats.json"
FEATURE_MANIFEST = "feature_manifest.json"
GRAPH_FILE = "graph.json"
CHECKPOINT_FILE = "checkpoint.json"
LOSS_CSV = "loss_curve.csv"
REPORT_JSON = "report.json"
REPORT_TXT = "report.txt"


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


@dataclass(frozen=True)
class PipelineConfig:
    data_dir: str | None = None
    out_dir: str = "out"
    seed: int = 0
    epochs: int = 700
    lr: float = 0.01
    threshold: float = 0.9
    gnn_hidden: int = 32
    lin_hidden: int = 64
    batch_size: int = 512
    abs_threshold: bool = False
    class_weights: bool = False
    filter_phase: str = "delay"

    def model_config(self) -> ModelConfig:
        return ModelConfig(gnn_hidden=self.gnn_hidden, lin_hidden=self.lin_hidden, learning_rate=self.lr,
                           epochs=self.epochs, batch_size=self.batch_size, seed=self.seed,
                           class_weights=self.class_weights)

    def echo(self) -> dict:
        """Effective settings without machine-specific paths."""
        d = asdict(self)
        d.pop("data_dir")
        d.pop("out_dir")
        return d


def resolve_config(cli: dict, config_file: str | Path | None = None) -> PipelineConfig:
    """CLI values (non-None) override the JSON config file, which overrides defaults."""
    known = {f.name for f in fields(PipelineConfig)}
    merged: dict = {}
    if config_file is not None:
        doc = json.loads(Path(config_file).read_text())
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(doc)
    merged.update({k: v for k, v in cli.items() if k in known and v is not None})
    if merged.get("data_dir") is None and os.environ.get("ECG_DATA_DIR"):
        merged["data_dir"] = os.environ["ECG_DATA_DIR"]
    return replace(PipelineConfig(), **merged)


def _out(cfg: PipelineConfig) -> Path:
    p = Path(cfg.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _require(path: Path, stage: str, producer: str) -> Path:
    if not path.exists():
        raise StageError(stage, f"{path.name} not found in {path.parent}; run `{producer}` first")
    return path


def _split_from_manifest(doc: dict) -> DatasetSplit:
    return DatasetSplit(frozenset(doc["split"]["train"]), frozenset(doc["split"]["test"]))


# ---------------------------------------------------------------- stages

def run_ingest(cfg: PipelineConfig, split: DatasetSplit = INTER_PATIENT_SPLIT) -> dict:
    if not cfg.data_dir:
        raise StageError("ingest", "no data directory (use --data-dir or ECG_DATA_DIR)")
    out = _out(cfg)
    try:
        train, test = load_dataset(cfg.data_dir, split)
    except Exception as e:
        raise StageError("ingest", str(e)) from e
    audit = out / "audit"
    audit.mkdir(exist_ok=True)
    records = {}
    for rec in train + test:
        write_annotation_audit(audit / f"{rec.record_id}.csv", rec)
        by_class = {c: sum(b.aami_class == c for b in rec.beats) for c in CLASSES}
        records[rec.record_id] = {"n_samples": rec.header.n_samples, "lead_index": rec.lead_index,
                                  "n_beats": len(rec.beats), "labeled": by_class}
    doc = {"data_dir": str(Path(cfg.data_dir).resolve()),
           "split": {"train": sorted(split.train_ids), "test": sorted(split.test_ids)},
           "records": records}
    (out / INGEST_FILE).write_text(json.dumps(doc, indent=1, sort_keys=True))
    log.info("ingest: %d train + %d test records", len(train), len(test))
    return doc


def run_features(cfg: PipelineConfig) -> dict:
    out = _out(cfg)
    manifest = json.loads(_require(out / INGEST_FILE, "features", "ingest").read_text())
    split = _split_from_manifest(manifest)
    spec = FilterSpec(phase=cfg.filter_phase)
    t0 = time.perf_counter()
    sets = {}
    for name, ids in (("train", split.train_ids), ("test", split.test_ids)):
        try:
            records = load_records(manifest["data_dir"], ids)
        except Exception as e:
            raise StageError("features", str(e)) from e
        sets[name] = assemble_dataset(records, spec)
    elapsed = time.perf_counter() - t0
    write_features_csv(out / TRAIN_CSV, sets["train"])
    write_features_csv(out / TEST_CSV, sets["test"])
    stats = fit_standardization(sets["train"].X)
    (out / STATS_FILE).write_text(stats.to_json())
    summary = {
        "feature_names": list(FEATURE_NAMES),
        "rows": {k: len(v) for k, v in sets.items()},
        "published_rows": PUBLISHED_ROWS,
        "class_counts": {k: {c: int(np.sum(v.labels == c)) for c in CLASSES} for k, v in sets.items()},
        "dropped": {k: v.dropped for k, v in sets.items()},
        "degenerate": {k: int(v.degenerate.sum()) for k, v in sets.items()},
        "flagged_constant_features": [FEATURE_NAMES[i] for i in stats.flagged],
        "seconds": round(elapsed, 2),
    }
    (out / FEATURE_MANIFEST).write_text(json.dumps(summary, indent=1))
    log.info("features: %d train rows, %d test rows (%.1f s)", len(sets["train"]), len(sets["test"]), elapsed)
    return summary


def _standardized(out: Path, stage: str, csv_name: str) -> tuple[FeatureSet, np.ndarray]:
    fset = read_features_csv(_require(out / csv_name, stage, "features"))
    stats = StandardizationStats.from_json(_require(out / STATS_FILE, stage, "features").read_text())
    return fset, standardize(fset.X, stats)


def run_graph(cfg: PipelineConfig) -> GraphSpec:
    out = _out(cfg)
    _, X = _standardized(out, "graph", TRAIN_CSV)
    spec = build_graph_spec(X, cfg.threshold, cfg.abs_threshold)
    doc = spec.to_dict()
    doc["config"] = cfg.echo()
    (out / GRAPH_FILE).write_text(json.dumps(doc, indent=1))
    log.info("graph: %d edges (incl. self-loops) at threshold %s", len(spec.edge_index), cfg.threshold)
    return spec


def _load_graph(out: Path, stage: str, n_train: int) -> GraphSpec:
    spec = GraphSpec.from_json(_require(out / GRAPH_FILE, stage, "graph").read_text())
    # leakage guard: the graph must come from the training split
    if spec.source != "train" or spec.n_rows != n_train:
        raise StageError(stage, f"graph was not built from the current training split "
                                f"(source={spec.source}, rows={spec.n_rows}, expected {n_train})")
    return spec


def run_train(cfg: PipelineConfig):
    out = _out(cfg)
    fset, X = _standardized(out, "train", TRAIN_CSV)
    spec = _load_graph(out, "train", len(fset))
    mcfg = cfg.model_config()
    t0 = time.perf_counter()
    result = train_model(X, fset.labels, spec, mcfg)
    save_checkpoint(out / CHECKPOINT_FILE, result.params, mcfg, spec.digest(), result.loss_history)
    with open(out / LOSS_CSV, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "loss"])
        w.writerows((i, repr(v)) for i, v in enumerate(result.loss_history))
    log.info("train: %d epochs, final loss %.5f (%.1f s)", len(result.loss_history),
             result.loss_history[-1] if result.loss_history else float("nan"), time.perf_counter() - t0)
    return result


def run_eval(cfg: PipelineConfig) -> evaluate.MetricsReport:
    out = _out(cfg)
    ckpt = out / CHECKPOINT_FILE
    if not ckpt.exists():
        raise StageError("eval", f"{CHECKPOINT_FILE} not found in {out}; run `train` first")
    params, mcfg, digest, _ = load_checkpoint(ckpt)
    train_set = read_features_csv(_require(out / TRAIN_CSV, "eval", "features"))
    spec = _load_graph(out, "eval", len(train_set))
    if spec.digest() != digest:
        raise StageError("eval", "checkpoint was trained on a different graph; rerun `train`")
    test_set, X = _standardized(out, "eval", TEST_CSV)
    pred = predict(params, spec, X)
    cm = evaluate.confusion_matrix(pred, encode_labels(test_set.labels))
    counts = {"train_rows": len(train_set), "test_rows": len(test_set),
              "test_degenerate": int(test_set.degenerate.sum())}
    created = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    report = evaluate.build_report(cm, counts, cfg.echo() | {"model": asdict(mcfg)}, cfg.seed, created)
    text_json, table = evaluate.render_report(report)
    (out / REPORT_JSON).write_text(text_json)
    (out / REPORT_TXT).write_text(table)
    log.info("eval:\n%s", table)
    return report


STAGES = {
    "ingest": run_ingest,
    "features": run_features,
    "graph": run_graph,
    "train": run_train,
    "eval": run_eval,
}


def run_all(cfg: PipelineConfig) -> evaluate.MetricsReport:
    for name in ("ingest", "features", "graph", "train"):
        STAGES[name](cfg)
    return run_eval(cfg)
