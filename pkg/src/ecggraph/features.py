"""Per-beat feature extraction (20 features) and train-set standardization."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .fiducials import FiducialConfig, Fiducials, locate_fiducials
from .preprocess import FilterSpec, preprocess_signal, segment_beats
from .wfdb_ingest import EcgRecord

FEATURE_NAMES = (
    "PR_amp", "PR_span", "ST_span", "prev_RR",
    "QR_amp", "QR_span", "PQ_span", "post_RR",
    "RS_amp", "RS_span", "PT_span", "mean_RR",
    "RT_amp", "RT_span", "QT_span", "median_RR",
    "beat_max", "beat_min", "beat_var", "beat_rms",
)
RR_NAMES = ("prev_RR", "post_RR", "mean_RR", "median_RR")
MORPHOLOGY_NAMES = tuple(n for n in FEATURE_NAMES if n not in RR_NAMES)
N_FEATURES = len(FEATURE_NAMES)

# (left, right) fiducial pairs of each span feature
_SPANS = {
    "PR_span": ("p", "r"), "ST_span": ("s", "t"), "QR_span": ("q", "r"),
    "PQ_span": ("p", "q"), "RS_span": ("r", "s"), "PT_span": ("p", "t"),
    "RT_span": ("r", "t"), "QT_span": ("q", "t"),
}
_AMPS = {"PR_amp": ("p", "r"), "QR_amp": ("q", "r"), "RS_amp": ("r", "s"), "RT_amp": ("r", "t")}

META_COLUMNS = ("label", "record_id", "r_sample", "degenerate")


def record_rr_stats(r_positions: Sequence[int], fs: float = 360.0) -> tuple[float, float]:
    """Mean and median of all consecutive RR intervals of a record, in seconds."""
    rr = np.diff(np.asarray(r_positions, dtype=np.float64)) / fs
    if rr.size == 0:
        raise ValueError("need at least two R positions")
    return float(np.mean(rr)), float(np.median(rr))


def rr_features(r_positions: Sequence[int], beat_index: int, fs: float = 360.0,
                record_stats: tuple[float, float] | None = None) -> tuple[float, float, float, float]:
    """(prev_RR, post_RR, mean_RR, median_RR) in seconds for one beat.

    The first and last beat of a record have no neighbour on one side and are
    rejected with ``ValueError``.
    """
    n = len(r_positions)
    if not 0 < beat_index < n - 1:
        raise ValueError(f"beat {beat_index} of {n} lacks a neighbour")
    prev_rr = (r_positions[beat_index] - r_positions[beat_index - 1]) / fs
    post_rr = (r_positions[beat_index + 1] - r_positions[beat_index]) / fs
    mean_rr, median_rr = record_stats if record_stats is not None else record_rr_stats(r_positions, fs)
    return float(prev_rr), float(post_rr), mean_rr, median_rr


def morphology_features(segment, fid: Fiducials, fs: float = 360.0) -> dict[str, float]:
    x = np.asarray(getattr(segment, "samples", segment), dtype=np.float64)
    t = {"p": fid.p, "q": fid.q, "r": fid.r, "s": fid.s, "t": fid.t}
    a = {"p": fid.a_p, "q": fid.a_q, "r": fid.a_r, "s": fid.a_s, "t": fid.a_t}
    out = {}
    for name in MORPHOLOGY_NAMES:
        if name in _AMPS:
            left, right = _AMPS[name]
            out[name] = float(a[left] - a[right])
        elif name in _SPANS:
            left, right = _SPANS[name]
            out[name] = abs(t[right] - t[left]) / fs
    out["beat_max"] = float(x.max())
    out["beat_min"] = float(x.min())
    out["beat_var"] = float(np.var(x))
    out["beat_rms"] = float(np.sqrt(np.mean(x * x)))
    return out


def feature_row(morph: dict[str, float], rr: Sequence[float]) -> np.ndarray:
    vals = dict(morph)
    vals.update(zip(RR_NAMES, rr))
    return np.array([vals[n] for n in FEATURE_NAMES], dtype=np.float64)


@dataclass
class FeatureSet:
    X: np.ndarray
    labels: np.ndarray
    record_ids: np.ndarray
    r_samples: np.ndarray
    degenerate: np.ndarray
    # beats dropped per reason, summed over records
    dropped: dict = field(default_factory=dict)

    def __len__(self):
        return self.X.shape[0]

    @classmethod
    def empty(cls) -> "FeatureSet":
        return cls(np.empty((0, N_FEATURES)), np.empty(0, dtype="<U1"), np.empty(0, dtype=object),
                   np.empty(0, dtype=np.int64), np.empty(0, dtype=bool), {})

    @classmethod
    def concat(cls, parts: Iterable["FeatureSet"]) -> "FeatureSet":
        parts = list(parts)
        if not parts:
            return cls.empty()
        dropped: dict = {}
        for p in parts:
            for k, v in p.dropped.items():
                dropped[k] = dropped.get(k, 0) + v
        return cls(
            np.concatenate([p.X for p in parts]).reshape(-1, N_FEATURES),
            np.concatenate([p.labels for p in parts]),
            np.concatenate([p.record_ids for p in parts]),
            np.concatenate([p.r_samples for p in parts]),
            np.concatenate([p.degenerate for p in parts]),
            dropped,
        )


def record_features(record: EcgRecord, filter_spec: FilterSpec = FilterSpec(),
                    fid_config: FiducialConfig = FiducialConfig()) -> FeatureSet:
    """Feature rows for every N/S/V beat of one record.

    RR features use every annotated beat; the first and last beat are dropped
    because one of their RR neighbours is missing.
    """
    fs = record.header.sampling_rate
    r = np.array([b.sample_index for b in record.beats], dtype=np.int64)
    labels = [b.aami_class for b in record.beats]
    n_labeled = sum(lab is not None for lab in labels)
    if r.size < 3:
        out = FeatureSet.empty()
        out.dropped = {"edge_beat": n_labeled}
        return out
    stats = record_rr_stats(r, fs)
    x = preprocess_signal(record.lead_ii, filter_spec)
    interior = range(1, r.size - 1)
    segs, _ = segment_beats(x, r[1:-1], labels[1:-1], record.record_id, interior)

    rows = np.empty((len(segs), N_FEATURES))
    degenerate = np.zeros(len(segs), dtype=bool)
    for i, seg in enumerate(segs):
        fid = locate_fiducials(seg, fid_config)
        rows[i] = feature_row(morphology_features(seg, fid, fs), rr_features(r, seg.beat_index, fs, stats))
        degenerate[i] = fid.degenerate

    n_edge = (labels[0] is not None) + (labels[-1] is not None)
    n_interior = n_labeled - n_edge
    return FeatureSet(
        X=rows,
        labels=np.array([s.label for s in segs], dtype="<U1"),
        record_ids=np.array([record.record_id] * len(segs), dtype=object),
        r_samples=np.array([s.r_sample_index for s in segs], dtype=np.int64),
        degenerate=degenerate,
        dropped={"edge_beat": n_edge, "out_of_bounds": n_interior - len(segs)},
    )


def assemble_dataset(records: Iterable[EcgRecord], filter_spec: FilterSpec = FilterSpec(),
                     fid_config: FiducialConfig = FiducialConfig()) -> FeatureSet:
    return FeatureSet.concat(record_features(rec, filter_spec, fid_config) for rec in records)


# ---------------------------------------------------------------- standardization

@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray
    std: np.ndarray
    flagged: tuple[int, ...] = ()

    def to_json(self) -> str:
        doc = [{"feature": n, "mean": float(m), "std": float(s), "flagged": i in self.flagged}
               for i, (n, m, s) in enumerate(zip(FEATURE_NAMES, self.mean, self.std))]
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "StandardizationStats":
        doc = json.loads(text)
        names = tuple(d["feature"] for d in doc)
        if names != FEATURE_NAMES:
            raise ValueError("stats feature order does not match the canonical feature list")
        return cls(np.array([d["mean"] for d in doc]), np.array([d["std"] for d in doc]),
                   tuple(i for i, d in enumerate(doc) if d.get("flagged")))


def fit_standardization(X: np.ndarray) -> StandardizationStats:
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    flagged = tuple(int(i) for i in np.flatnonzero(std == 0))
    std = np.where(std == 0, 1.0, std)
    # constant columns are left untouched
    mean = np.where(np.isin(np.arange(X.shape[1]), flagged), 0.0, mean)
    return StandardizationStats(mean, std, flagged)


def standardize(X: np.ndarray, stats: StandardizationStats) -> np.ndarray:
    return (np.asarray(X, dtype=np.float64) - stats.mean) / stats.std


# ---------------------------------------------------------------- persistence

def write_features_csv(path: str | Path, fset: FeatureSet) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(FEATURE_NAMES + META_COLUMNS)
        for i in range(len(fset)):
            w.writerow([repr(float(v)) for v in fset.X[i]]
                       + [fset.labels[i], fset.record_ids[i], int(fset.r_samples[i]), int(fset.degenerate[i])])


def read_features_csv(path: str | Path) -> FeatureSet:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    header = tuple(rows[0])
    if header != FEATURE_NAMES + META_COLUMNS:
        raise ValueError(f"{path}: unexpected header {header[:3]}...")
    body = rows[1:]
    X = np.array([[float(v) for v in r[:N_FEATURES]] for r in body], dtype=np.float64).reshape(-1, N_FEATURES)
    return FeatureSet(
        X=X,
        labels=np.array([r[N_FEATURES] for r in body], dtype="<U1"),
        record_ids=np.array([r[N_FEATURES + 1] for r in body], dtype=object),
        r_samples=np.array([int(r[N_FEATURES + 2]) for r in body], dtype=np.int64),
        degenerate=np.array([r[N_FEATURES + 3] == "1" for r in body], dtype=bool),
    )
