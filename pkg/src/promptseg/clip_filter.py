"""Visual-prompt filtering of candidate detections.

Each detection is cropped with some surrounding context, its box outline is
drawn as a red ellipse, and an image-text scorer compares the patch against
task-related and unrelated prompts. A detection survives only when the best
matching prompt names its own class.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from promptseg.backends import MAX_INTENSITY, Image, ImageTextScorer, call_backend
from promptseg.geometry import BBox, Detection, centroid
from promptseg.prompts import PromptSet, scorer_candidates

DEFAULT_MAGNIFICATIONS = (1.2, 1.5)


def round_half_away(v: float) -> int:
    return int(np.sign(v) * np.floor(abs(v) + 0.5))


@dataclass(frozen=True, eq=False)
class ExtendedPatch:
    """A context crop around a box, with the box's inscribed ellipse.

    ``crop`` is the continuous crop rectangle in original coordinates;
    ``pixels`` covers the whole pixels it touches, starting at ``origin``
    ``(col, row)``. ``center`` and ``radii`` describe the ellipse in patch
    coordinates.
    """

    bbox: BBox
    crop: BBox
    magnification: float
    origin: tuple[int, int]
    pixels: Image
    center: tuple[float, float]
    radii: tuple[float, float]
    annotated: bool = False

    @property
    def stroke_width(self) -> int:
        return stroke_width(self.pixels.height, self.pixels.width)


def stroke_width(height: int, width: int) -> int:
    return max(2, round_half_away(0.02 * float(np.hypot(height, width))))


def extend_patch(img: Image, bbox: BBox, magnification: float) -> ExtendedPatch:
    if magnification < 1:
        raise ValueError(f"magnification must be >= 1, got {magnification}")
    if bbox.x_min < 0 or bbox.y_min < 0 or bbox.x_max > img.width or bbox.y_max > img.height:
        raise ValueError(f"box {bbox.as_tuple()} is not inside the {img.width}x{img.height} image")
    cx, cy = centroid(bbox)
    hw = magnification * bbox.width / 2.0
    hh = magnification * bbox.height / 2.0
    crop = BBox(cx - hw, cy - hh, cx + hw, cy + hh).clip(img.width, img.height)
    c0, r0 = int(np.floor(crop.x_min)), int(np.floor(crop.y_min))
    c1, r1 = int(np.ceil(crop.x_max)), int(np.ceil(crop.y_max))
    pixels = Image(img.pixels[:, r0:r1, c0:c1].copy(), img.name)
    return ExtendedPatch(
        bbox=bbox,
        crop=crop,
        magnification=float(magnification),
        origin=(c0, r0),
        pixels=pixels,
        center=(cx - c0, cy - r0),
        radii=(bbox.width / 2.0, bbox.height / 2.0),
    )


def stroke_mask(patch: ExtendedPatch) -> np.ndarray:
    """Pixels within ``stroke_width`` inside the ellipse outline.

    The band lies between the ellipse and a concentric one whose radii are
    shorter by the stroke width, so the stroke never leaves the box footprint.
    """
    h, w = patch.pixels.height, patch.pixels.width
    sw = patch.stroke_width
    cx, cy = patch.center
    a, b = patch.radii
    dx = (np.arange(w) + 0.5 - cx)[None, :]
    dy = (np.arange(h) + 0.5 - cy)[:, None]
    outer = (dx / a) ** 2 + (dy / b) ** 2 <= 1.0
    ia, ib = a - sw, b - sw
    if ia <= 0 or ib <= 0:
        return outer
    inner = (dx / ia) ** 2 + (dy / ib) ** 2 < 1.0
    return outer & ~inner


def draw_red_circle(patch: ExtendedPatch) -> ExtendedPatch:
    if patch.annotated:
        raise ValueError("patch is already annotated")
    px = patch.pixels.pixels.copy()
    mask = stroke_mask(patch)
    px[:, mask] = 0.0
    px[0, mask] = MAX_INTENSITY
    return replace(patch, pixels=Image(px, patch.pixels.name), annotated=True)


def softmax(scores) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ValueError("expected a non-empty score vector")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    # a gap beyond the float range overflows to -inf, whose exp is the correct 0
    with np.errstate(over="ignore"):
        e = np.exp(scores - scores.max())
    return e / e.sum()


@dataclass
class SimilarityResult:
    raw_scores: np.ndarray
    probabilities: np.ndarray
    argmax: int
    matched_class: int | None
    per_magnification: list[tuple[float, np.ndarray, np.ndarray]] = field(default_factory=list)


def score_patch(
    annotated: ExtendedPatch,
    candidates: Sequence[tuple[str, int | None]],
    scorer: ImageTextScorer,
    detection: int | None = None,
) -> SimilarityResult:
    if not annotated.annotated:
        raise ValueError("patch must be annotated before scoring")
    if not candidates:
        raise ValueError("candidates must be non-empty")
    texts = [t for t, _ in candidates]
    raw = np.asarray(
        call_backend(
            scorer.score, annotated.pixels, texts, image=annotated.pixels.name, detection=detection
        ),
        dtype=np.float64,
    )
    if raw.shape != (len(texts),):
        raise ValueError(f"scorer returned {raw.shape} scores for {len(texts)} candidates")
    probs = softmax(raw)
    best = int(np.argmax(probs))
    return SimilarityResult(
        raw_scores=raw,
        probabilities=probs,
        argmax=best,
        matched_class=candidates[best][1],
        per_magnification=[(annotated.magnification, raw, probs)],
    )


def fuse(results: Sequence[SimilarityResult], candidates) -> SimilarityResult:
    """Average the probability vectors of several magnifications."""
    probs = np.mean([r.probabilities for r in results], axis=0)
    best = int(np.argmax(probs))
    return SimilarityResult(
        raw_scores=np.stack([r.raw_scores for r in results]),
        probabilities=probs,
        argmax=best,
        matched_class=candidates[best][1],
        per_magnification=[m for r in results for m in r.per_magnification],
    )


@dataclass
class FilterDecision:
    detection: Detection
    result: SimilarityResult
    kept: bool


@dataclass
class FilterTrace:
    kept: list[Detection]
    decisions: list[FilterDecision]


PatchHook = Callable[[int, float, ExtendedPatch], None]


def run_filter(
    dets: Sequence[Detection],
    img: Image,
    ps: PromptSet,
    scorer: ImageTextScorer,
    magnifications: Sequence[float] = DEFAULT_MAGNIFICATIONS,
    template: str | None = None,
    on_patch: PatchHook | None = None,
) -> FilterTrace:
    if not magnifications or any(m < 1 for m in magnifications):
        raise ValueError("magnifications must be non-empty and each >= 1")
    candidates = scorer_candidates(ps, template)
    decisions = []
    for i, det in enumerate(dets):
        per_mag = []
        for m in magnifications:
            patch = draw_red_circle(extend_patch(img, det.bbox, m))
            if on_patch is not None:
                on_patch(i, m, patch)
            per_mag.append(score_patch(patch, candidates, scorer, detection=i))
        result = fuse(per_mag, candidates)
        keep = result.matched_class is not None and result.matched_class == det.canonical_class
        decisions.append(FilterDecision(det, result, keep))
    return FilterTrace([d.detection for d in decisions if d.kept], decisions)


def filter_detections(
    dets: Sequence[Detection],
    img: Image,
    ps: PromptSet,
    scorer: ImageTextScorer,
    magnifications: Sequence[float] = DEFAULT_MAGNIFICATIONS,
) -> list[Detection]:
    """Keep detections whose averaged best-matching prompt is their own class."""
    return run_filter(dets, img, ps, scorer, magnifications).kept
