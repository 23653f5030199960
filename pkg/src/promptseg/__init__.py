"""Training-free open-vocabulary segmentation of remote-sensing imagery.

A text-prompted detector proposes boxes at several image scales, a
visual-prompt filter discards boxes an image-text scorer does not confirm,
and a point-prompted segmenter turns each surviving box centroid into a
mask. Model backends are pluggable; see :mod:`promptseg.backends`.
"""

from promptseg.backends import BackendError, Image
from promptseg.clip_filter import extend_patch, draw_red_circle, filter_detections, score_patch, softmax
from promptseg.detection import GdPlusConfig, gd_plus, generate_scaled_views
from promptseg.geometry import BBox, Detection, centroid, iou, nms, project_to_original, remove_oversized
from promptseg.metrics import ConfusionMatrix, EvalReport, accumulate, compute_report
from promptseg.prompts import ClassSpec, PromptSet, canonicalize, detector_vocabulary, load_prompt_file, scorer_candidates
from promptseg.segmentation import InstanceMask, LabelMask, assemble_label_mask, segment_all

__all__ = [
    "BBox", "BackendError", "ClassSpec", "ConfusionMatrix", "Detection", "EvalReport",
    "GdPlusConfig", "Image", "InstanceMask", "LabelMask", "PromptSet", "accumulate",
    "assemble_label_mask", "canonicalize", "centroid", "compute_report", "detector_vocabulary",
    "draw_red_circle", "extend_patch", "filter_detections", "gd_plus", "generate_scaled_views",
    "iou", "load_prompt_file", "nms", "project_to_original", "remove_oversized", "score_patch",
    "scorer_candidates", "segment_all", "softmax",
]

__version__ = "0.1.0"
