"""Thin wrappers around pretrained models.

These need ``torch``, ``transformers`` and (for the segmenter)
``ultralytics`` plus downloaded weights; none of it is imported until an
adapter is built. They are not exercised by the test suite.

Backend config keys (``backend:`` section with ``kind: real``)::

    detector:  {model: IDEA-Research/grounding-dino-base, box_threshold: 0.3,
                text_threshold: 0.25}
    scorer:    {model: openai/clip-vit-large-patch14-336}
    segmenter: {weights: FastSAM-x.pt, conf: 0.4, iou: 0.9}
    device: cuda
"""

from __future__ import annotations

from typing import Any, Sequence

import numpy as np

from promptseg.backends import BackendError, Image, check_point
from promptseg.geometry import BBox


def _pil(img: Image):
    from PIL import Image as PILImage

    hwc = img.to_hwc_uint8()
    if hwc.shape[-1] == 1:
        hwc = np.repeat(hwc, 3, axis=-1)
    return PILImage.fromarray(hwc[..., :3])


class GroundingDinoDetector:
    def __init__(self, model: str = "IDEA-Research/grounding-dino-base", box_threshold: float = 0.3,
                 text_threshold: float = 0.25, device: str = "cpu"):
        from transformers import AutoModelForZeroShotObjectDetection, AutoProcessor

        self.processor = AutoProcessor.from_pretrained(model)
        self.model = AutoModelForZeroShotObjectDetection.from_pretrained(model).to(device)
        self.box_threshold = box_threshold
        self.text_threshold = text_threshold
        self.device = device

    def detect(self, img: Image, vocabulary: Sequence[tuple[str, int]]):
        import torch

        texts = [t for t, _ in vocabulary]
        # the model expects lower-case phrases separated by periods
        prompt = " . ".join(t.lower() for t in texts) + " ."
        inputs = self.processor(images=_pil(img), text=prompt, return_tensors="pt").to(self.device)
        with torch.no_grad():
            outputs = self.model(**inputs)
        result = self.processor.post_process_grounded_object_detection(
            outputs,
            inputs.input_ids,
            threshold=self.box_threshold,
            text_threshold=self.text_threshold,
            target_sizes=[(img.height, img.width)],
        )[0]
        lookup = {t.lower(): t for t in texts}
        out = []
        labels = result.get("text_labels", result.get("labels"))
        for box, score, phrase in zip(result["boxes"].tolist(), result["scores"].tolist(), labels):
            text = _match_phrase(str(phrase), lookup)
            if text is None:
                continue
            clipped = _to_box(box, img)
            if clipped is not None:
                out.append((clipped, text, float(min(max(score, 0.0), 1.0))))
        return out


def _match_phrase(phrase: str, lookup: dict[str, str]) -> str | None:
    """Map a returned phrase fragment to the longest vocabulary text it overlaps."""
    phrase = phrase.strip().lower()
    if phrase in lookup:
        return lookup[phrase]
    hits = [k for k in lookup if phrase and (phrase in k or k in phrase)]
    return lookup[max(hits, key=len)] if hits else None


def _to_box(box, img: Image) -> BBox | None:
    x0, y0, x1, y1 = box
    if x0 >= x1 or y0 >= y1:
        return None
    return BBox(x0, y0, x1, y1).clip(img.width, img.height)


class ClipScorer:
    def __init__(self, model: str = "openai/clip-vit-large-patch14-336", device: str = "cpu"):
        from transformers import CLIPModel, CLIPProcessor

        self.processor = CLIPProcessor.from_pretrained(model)
        self.model = CLIPModel.from_pretrained(model).to(device)
        self.device = device

    def score(self, patch: Image, candidates: Sequence[str]) -> np.ndarray:
        import torch

        inputs = self.processor(
            text=list(candidates), images=_pil(patch), return_tensors="pt", padding=True
        ).to(self.device)
        with torch.no_grad():
            out = self.model(**inputs)
        return out.logits_per_image[0].cpu().numpy().astype(np.float64)


class FastSamSegmenter:
    def __init__(self, weights: str = "FastSAM-x.pt", conf: float = 0.4, iou: float = 0.9,
                 device: str = "cpu"):
        from ultralytics import FastSAM

        self.model = FastSAM(weights)
        self.conf = conf
        self.iou = iou
        self.device = device

    def segment(self, img: Image, point: tuple[int, int]) -> np.ndarray:
        check_point(img, point)
        bgr = img.to_hwc_uint8()[..., ::-1]
        results = self.model(
            np.ascontiguousarray(bgr), points=[list(point)], labels=[1], device=self.device,
            retina_masks=True, conf=self.conf, iou=self.iou, verbose=False,
        )
        if not results or results[0].masks is None:
            return np.zeros((img.height, img.width), dtype=bool)
        masks = results[0].masks.data.cpu().numpy() > 0.5
        if masks.shape[1:] != (img.height, img.width):
            raise BackendError("segmenter mask size differs from the image", image=img.name)
        x, y = point
        containing = [m for m in masks if m[y, x]]
        return (containing or list(masks))[0]


def build_real_backends(opts: dict[str, Any]):
    device = opts.get("device", "cpu")
    return (
        GroundingDinoDetector(device=device, **(opts.get("detector") or {})),
        ClipScorer(device=device, **(opts.get("scorer") or {})),
        FastSamSegmenter(device=device, **(opts.get("segmenter") or {})),
    )
