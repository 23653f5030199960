"""Multi-scale synonym-prompted detection with duplicate suppression."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from promptseg.backends import Detector, Image, call_backend
from promptseg.geometry import Detection, nms, project_to_original, remove_oversized
from promptseg.prompts import PromptSet, canonicalize, detector_vocabulary

# scale presets: the experimental setting and the wider three-view setting
EXPERIMENT_SCALES = (0.5, 1.0)
WIDE_SCALES = (0.5, 1.0, 1.5)


@dataclass(frozen=True)
class GdPlusConfig:
    scales: tuple[float, ...] = EXPERIMENT_SCALES
    nms_overlap_threshold: float = 0.1
    max_area_fraction: float = 0.9
    min_confidence: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        if not self.scales or any(s <= 0 for s in self.scales):
            raise ValueError("scales must be non-empty and positive")
        if not 0.0 <= self.nms_overlap_threshold <= 1.0:
            raise ValueError("nms_overlap_threshold must lie in [0, 1]")
        if not 0.0 < self.max_area_fraction <= 1.0:
            raise ValueError("max_area_fraction must lie in (0, 1]")
        if not 0.0 <= self.min_confidence <= 1.0:
            raise ValueError("min_confidence must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class ScaledView:
    scale: float
    image: Image


def _round_half_up(v: float) -> int:
    return int(np.floor(v + 0.5))


def scaled_size(height: int, width: int, scale: float) -> tuple[int, int]:
    return _round_half_up(scale * height), _round_half_up(scale * width)


def generate_scaled_views(img: Image, scales) -> list[ScaledView]:
    """Bilinear (half-pixel centred) resampling of ``img`` at each scale."""
    views = []
    for s in scales:
        if s <= 0:
            raise ValueError(f"scale must be positive, got {s}")
        h, w = scaled_size(img.height, img.width, s)
        if h < 1 or w < 1:
            raise ValueError(f"scale {s} shrinks a {img.width}x{img.height} image below one pixel")
        if (h, w) == (img.height, img.width):
            views.append(ScaledView(float(s), img))
            continue
        zoom = (h / img.height, w / img.width)
        channels = [
            ndimage.zoom(ch, zoom, order=1, grid_mode=True, mode="nearest") for ch in img.pixels
        ]
        views.append(ScaledView(float(s), Image(np.stack(channels), img.name)))
    return views


@dataclass
class GdPlusTrace:
    """Stage output plus the counts the run manifest reports."""

    detections: list[Detection]
    raw_counts: dict[float, int] = field(default_factory=dict)
    canonical_count: int = 0
    post_oversize_count: int = 0

    @property
    def raw_total(self) -> int:
        return sum(self.raw_counts.values())


def _canonical_key(d: Detection):
    return (-d.confidence, d.bbox.as_tuple(), d.canonical_class, d.raw_label, d.source_scale)


def run_gd_plus(img: Image, ps: PromptSet, det: Detector, cfg: GdPlusConfig) -> GdPlusTrace:
    vocabulary = detector_vocabulary(ps)
    trace = GdPlusTrace(detections=[])
    candidates: list[Detection] = []
    for view in generate_scaled_views(img, cfg.scales):
        raw = call_backend(det.detect, view.image, vocabulary, image=img.name)
        trace.raw_counts[view.scale] = trace.raw_counts.get(view.scale, 0) + len(raw)
        for box, label, conf in raw:
            cid = canonicalize(label, ps)
            if cid is None or conf < cfg.min_confidence:
                continue
            clipped = project_to_original(box, view.scale).clip(img.width, img.height)
            if clipped is None:
                continue
            candidates.append(Detection(clipped, label, cid, float(conf), view.scale))
    trace.canonical_count = len(candidates)
    # canonical order makes the result independent of the order scales are listed in
    candidates.sort(key=_canonical_key)
    candidates = remove_oversized(candidates, img.width, img.height, cfg.max_area_fraction)
    trace.post_oversize_count = len(candidates)
    trace.detections = nms(candidates, cfg.nms_overlap_threshold)
    return trace


def gd_plus(img: Image, ps: PromptSet, det: Detector, cfg: GdPlusConfig | None = None) -> list[Detection]:
    """Detect every prompt-set class at each configured scale.

    Boxes are projected back to ``img``'s frame and clipped, unknown labels
    and low-confidence boxes dropped, then oversized boxes removed and
    duplicates suppressed per class.
    """
    return run_gd_plus(img, ps, det, cfg or GdPlusConfig()).detections
