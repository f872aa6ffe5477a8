"""Confusion matrix, per-class precision/recall and the comparison report."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

CLASSES = ("N", "S", "V")

# published per-class results (precision N/S/V, recall N/S/V), display only
LITERATURE_ROWS = (
    ("Lin et al.", (99.3, 31.6, 73.7), (91.6, 81.4, 86.2)),
    ("Garcia et al.", (98.0, 53.0, 59.4), (94.0, 62.0, 87.3)),
    ("Dias et al.", (99.4, 39.9, 94.6), (94.5, 92.5, 88.6)),
    ("Zhou et al.", (98.8, 53.8, 92.3), (96.9, 89.3, 93.3)),
    ("GNN-linear fusion (published)", (97.35, 68.83, 60.69), (94.98, 54.25, 88.29)),
)


def _indices(values) -> np.ndarray:
    values = np.asarray(values)
    if values.dtype.kind in "iu":
        return values.astype(np.int64)
    lookup = {c: i for i, c in enumerate(CLASSES)}
    return np.array([lookup[str(v)] for v in values], dtype=np.int64)


def confusion_matrix(predictions, labels) -> np.ndarray:
    """3x3 counts, rows = true class, columns = predicted (N, S, V order)."""
    p, t = _indices(predictions), _indices(labels)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} labels")
    cm = np.zeros((3, 3), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


@dataclass(frozen=True)
class PrecisionRecall:
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    # classes whose denominator was zero
    precision_undefined: tuple[str, ...] = ()
    recall_undefined: tuple[str, ...] = ()


def precision_recall(cm: np.ndarray) -> PrecisionRecall:
    cm = np.asarray(cm, dtype=np.float64)
    tp = np.diag(cm)
    col, row = cm.sum(axis=0), cm.sum(axis=1)
    prec = np.divide(100 * tp, col, out=np.zeros(3), where=col > 0)
    rec = np.divide(100 * tp, row, out=np.zeros(3), where=row > 0)
    return PrecisionRecall(
        tuple(float(v) for v in prec), tuple(float(v) for v in rec),
        tuple(c for c, d in zip(CLASSES, col) if d == 0),
        tuple(c for c, d in zip(CLASSES, row) if d == 0),
    )


@dataclass
class MetricsReport:
    precision: list[float]
    recall: list[float]
    confusion: list[list[int]]
    counts: dict
    config: dict
    seed: int
    flags: dict = field(default_factory=dict)
    literature: list = field(default_factory=lambda: [
        {"method": m, "precision": list(p), "recall": list(r)} for m, p, r in LITERATURE_ROWS])
    created: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls(**json.loads(text))


def build_report(cm: np.ndarray, counts: dict, config: dict, seed: int, created: str = "") -> MetricsReport:
    pr = precision_recall(cm)
    return MetricsReport(
        precision=list(pr.precision), recall=list(pr.recall),
        confusion=np.asarray(cm).astype(int).tolist(), counts=counts, config=config, seed=seed,
        flags={"precision_undefined": list(pr.precision_undefined),
               "recall_undefined": list(pr.recall_undefined)},
        created=created,
    )


def render_table(report: MetricsReport) -> str:
    rows = [(d["method"], d["precision"], d["recall"]) for d in report.literature]
    rows.append(("GNN-linear fusion (this run)", report.precision, report.recall))
    width = max(len(r[0]) for r in rows)
    head = f"{'Method':<{width}}  " + " ".join(f"{'P-' + c:>7}" for c in CLASSES) + "  " \
        + " ".join(f"{'R-' + c:>7}" for c in CLASSES)
    lines = [head, "-" * len(head)]
    for name, p, r in rows:
        lines.append(f"{name:<{width}}  " + " ".join(f"{v:7.2f}" for v in p) + "  "
                     + " ".join(f"{v:7.2f}" for v in r))
    lines.append("")
    lines.append("confusion (rows true, cols predicted; N S V):")
    for c, row in zip(CLASSES, report.confusion):
        lines.append(f"  {c}  " + " ".join(f"{v:7d}" for v in row))
    if report.counts:
        lines.append("")
        lines.append("counts: " + ", ".join(f"{k}={v}" for k, v in sorted(report.counts.items())))
    return "\n".join(lines) + "\n"


def render_report(report: MetricsReport) -> tuple[str, str]:
    return report.to_json(), render_table(report)
