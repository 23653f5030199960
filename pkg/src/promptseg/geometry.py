"""Axis-aligned box arithmetic used by every pipeline stage.

Boxes are ``(x_min, y_min, x_max, y_max)`` in continuous pixel coordinates
with the origin at the top-left corner of the original image, x pointing
right and y pointing down.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(np.isfinite(c) for c in coords):
            raise ValueError(f"non-finite box coordinates: {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box: {coords}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def clip(self, width: float, height: float) -> BBox | None:
        """Intersect with ``[0, width] x [0, height]``.

        Returns None when nothing of the box remains inside the image.
        """
        x0 = min(max(self.x_min, 0.0), width)
        y0 = min(max(self.y_min, 0.0), height)
        x1 = min(max(self.x_max, 0.0), width)
        y1 = min(max(self.y_max, 0.0), height)
        if x0 >= x1 or y0 >= y1:
            return None
        return BBox(x0, y0, x1, y1)


@dataclass(frozen=True)
class Detection:
    """A box in original-image coordinates with its label and score."""

    bbox: BBox
    raw_label: str
    canonical_class: int
    confidence: float
    source_scale: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.canonical_class < 1:
            raise ValueError("canonical_class must be >= 1 (0 is background)")


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return min(1.0, inter / union)


def nms(dets: Sequence[Detection], overlap_threshold: float) -> list[Detection]:
    """Greedy per-class non-maximum suppression.

    Detections are visited by descending confidence (stable with respect to
    input order). A detection is dropped when it overlaps an already kept
    detection of the same ``canonical_class`` with IoU above
    ``overlap_threshold``. Kept detections are returned in acceptance order.
    """
    if not 0.0 <= overlap_threshold <= 1.0:
        raise ValueError("overlap_threshold must lie in [0, 1]")
    order = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
    kept: list[Detection] = []
    for i in order:
        d = dets[i]
        if any(
            k.canonical_class == d.canonical_class
            and iou(k.bbox, d.bbox) > overlap_threshold
            for k in kept
        ):
            continue
        kept.append(d)
    return kept


def remove_oversized(
    dets: Iterable[Detection],
    image_w: float,
    image_h: float,
    max_area_fraction: float,
) -> list[Detection]:
    if not 0.0 < max_area_fraction <= 1.0:
        raise ValueError("max_area_fraction must lie in (0, 1]")
    limit = max_area_fraction * image_w * image_h
    return [d for d in dets if d.bbox.area <= limit]


def centroid(bbox: BBox) -> tuple[float, float]:
    return ((bbox.x_min + bbox.x_max) / 2.0, (bbox.y_min + bbox.y_max) / 2.0)


def project_to_original(bbox: BBox, scale: float) -> BBox:
    """Map a box found in a view resized by ``scale`` back to the original frame.

    Clipping to the original image bounds is left to the caller.
    """
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return BBox(
        bbox.x_min / scale,
        bbox.y_min / scale,
        bbox.x_max / scale,
        bbox.y_max / scale,
    )
