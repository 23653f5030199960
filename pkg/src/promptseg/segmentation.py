"""Point-prompted segmentation of kept detections and label-map assembly."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from promptseg.backends import Image, PointSegmenter, call_backend
from promptseg.clip_filter import round_half_away
from promptseg.geometry import Detection, centroid


@dataclass(frozen=True, eq=False)
class LabelMask:
    """H x W class map; 0 is background, classes run 1..class_number."""

    labels: np.ndarray
    class_number: int

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ValueError(f"label map must be 2-D, got shape {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            raise ValueError("label map must hold integers")
        if labels.size and (labels.min() < 0 or labels.max() > self.class_number):
            raise ValueError(f"labels must lie in [0, {self.class_number}]")
        object.__setattr__(self, "labels", labels.astype(np.int64, copy=False))

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


@dataclass(frozen=True, eq=False)
class InstanceMask:
    mask: np.ndarray
    detection: Detection
    index: int

    @property
    def empty(self) -> bool:
        return not self.mask.any()


def prompt_point(det: Detection, height: int, width: int) -> tuple[int, int]:
    """Centroid rounded half away from zero to a pixel index, kept on the image."""
    x, y = centroid(det.bbox)
    col = min(max(round_half_away(x), 0), width - 1)
    row = min(max(round_half_away(y), 0), height - 1)
    return col, row


def segment_all(img: Image, dets: Sequence[Detection], seg: PointSegmenter) -> list[InstanceMask]:
    """One segmenter call per detection, at its box centroid, in detection order."""
    out = []
    for i, det in enumerate(dets):
        b = det.bbox
        if b.x_min < 0 or b.y_min < 0 or b.x_max > img.width or b.y_max > img.height:
            raise ValueError(f"detection {i} lies outside the image")
        point = prompt_point(det, img.height, img.width)
        mask = np.asarray(call_backend(seg.segment, img, point, image=img.name, detection=i))
        if mask.shape != (img.height, img.width):
            raise ValueError(
                f"segmenter returned a {mask.shape} mask for detection {i} "
                f"of a {img.height}x{img.width} image"
            )
        out.append(InstanceMask(mask.astype(bool), det, i))
    return out


def assemble_label_mask(
    instances: Sequence[InstanceMask], height: int, width: int, class_number: int
) -> LabelMask:
    """Paint instance classes onto a background map.

    Where masks overlap, the higher-confidence detection wins; equal
    confidences go to the lower detection index.
    """
    labels = np.zeros((height, width), dtype=np.int64)
    for inst in instances:
        if inst.detection.canonical_class > class_number:
            raise ValueError(
                f"class {inst.detection.canonical_class} exceeds class_number {class_number}"
            )
        if inst.mask.shape != (height, width):
            raise ValueError(f"instance {inst.index} mask has shape {inst.mask.shape}")
    # paint lowest priority first so the winner is painted last
    order = sorted(instances, key=lambda m: (m.detection.confidence, -m.index))
    for inst in order:
        labels[inst.mask] = inst.detection.canonical_class
    return LabelMask(labels, class_number)
