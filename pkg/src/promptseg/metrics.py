"""Confusion-matrix based segmentation metrics.

Rows of the confusion matrix are ground truth and columns predictions,
index 0 being background. Per-class scores cover the foreground classes
that occur in the ground truth or the prediction; a class whose
denominator is zero is undefined for that metric and left out of its mean.
Pixel accuracy counts every pixel, background included.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from promptseg.segmentation import LabelMask

METRIC_NAMES = ("miou", "pixel_accuracy", "pixel_precision", "pixel_recall", "dice")
SHORT_NAMES = {"miou": "MIoU", "pixel_accuracy": "PA", "pixel_precision": "PP", "pixel_recall": "PR", "dice": "Dice"}


class ConfusionMatrix:
    def __init__(self, class_number: int, counts: np.ndarray | None = None, images: int = 0):
        self.class_number = class_number
        n = class_number + 1
        if counts is None:
            counts = np.zeros((n, n), dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        self.counts = counts
        self.images = images

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: ConfusionMatrix) -> ConfusionMatrix:
        if other.class_number != self.class_number:
            raise ValueError("cannot merge matrices of different class numbers")
        return ConfusionMatrix(self.class_number, self.counts + other.counts, self.images + other.images)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ConfusionMatrix)
            and self.class_number == other.class_number
            and np.array_equal(self.counts, other.counts)
        )


def accumulate(cm: ConfusionMatrix, pred: LabelMask, gt: LabelMask) -> ConfusionMatrix:
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
    if pred.class_number != cm.class_number or gt.class_number != cm.class_number:
        raise ValueError("class_number mismatch between masks and confusion matrix")
    n = cm.class_number + 1
    flat = gt.labels.ravel() * n + pred.labels.ravel()
    counts = np.bincount(flat, minlength=n * n).reshape(n, n)
    return ConfusionMatrix(cm.class_number, cm.counts + counts, cm.images + 1)


@dataclass
class EvalReport:
    miou: float | None
    pixel_accuracy: float
    pixel_precision: float | None
    pixel_recall: float | None
    dice: float | None
    per_class_iou: dict[int, float] = field(default_factory=dict)
    per_class: dict[int, dict[str, float | None]] = field(default_factory=dict)
    image_count: int = 0

    def metrics(self) -> dict[str, float | None]:
        return {k: getattr(self, k) for k in METRIC_NAMES}

    def to_json(self) -> str:
        d = asdict(self)
        d["per_class_iou"] = {str(k): v for k, v in self.per_class_iou.items()}
        d["per_class"] = {str(k): v for k, v in self.per_class.items()}
        return json.dumps(d, indent=2, sort_keys=True)


def _ratio(num: float, den: float) -> float | None:
    return num / den if den > 0 else None


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def compute_report(cm: ConfusionMatrix) -> EvalReport:
    c = cm.counts.astype(np.float64)
    total = c.sum()
    if total == 0:
        raise ValueError("confusion matrix is empty")
    tp = np.diag(c)
    fp = c.sum(axis=0) - tp
    fn = c.sum(axis=1) - tp

    per_class: dict[int, dict[str, float | None]] = {}
    for k in range(1, cm.class_number + 1):
        if c[k, :].sum() + c[:, k].sum() == 0:
            continue
        per_class[k] = {
            "iou": _ratio(tp[k], tp[k] + fp[k] + fn[k]),
            "precision": _ratio(tp[k], tp[k] + fp[k]),
            "recall": _ratio(tp[k], tp[k] + fn[k]),
            "dice": _ratio(2 * tp[k], 2 * tp[k] + fp[k] + fn[k]),
        }
    return EvalReport(
        miou=_mean(p["iou"] for p in per_class.values()),
        pixel_accuracy=float(tp.sum() / total),
        pixel_precision=_mean(p["precision"] for p in per_class.values()),
        pixel_recall=_mean(p["recall"] for p in per_class.values()),
        dice=_mean(p["dice"] for p in per_class.values()),
        per_class_iou={k: p["iou"] for k, p in per_class.items()},
        per_class=per_class,
        image_count=cm.images,
    )


def _fmt(v: float | None) -> str:
    return "   n/a" if v is None else f"{100 * v:6.2f}"


def format_table(rows: list[tuple[str, EvalReport]], class_names: dict[int, str] | None = None) -> str:
    """Aligned text table, metrics in percent; per-class IoU for a single row."""
    width = max([len(name) for name, _ in rows] + [5])
    header = f"{'':<{width}}  " + "  ".join(f"{SHORT_NAMES[m]:>6}" for m in METRIC_NAMES)
    lines = [header, "-" * len(header)]
    for name, rep in rows:
        lines.append(f"{name:<{width}}  " + "  ".join(_fmt(getattr(rep, m)) for m in METRIC_NAMES))
    if len(rows) == 1 and rows[0][1].per_class:
        lines.append("")
        lines.append(f"{'class':<{width}}  {'IoU':>6}  {'PP':>6}  {'PR':>6}  {'Dice':>6}")
        for k, p in rows[0][1].per_class.items():
            name = (class_names or {}).get(k, str(k))
            lines.append(
                f"{name:<{width}}  {_fmt(p['iou'])}  {_fmt(p['precision'])}  "
                f"{_fmt(p['recall'])}  {_fmt(p['dice'])}"
            )
    return "\n".join(lines)
