"""Run configuration, directory-level pipeline runs, evaluation and ablation.

A run config is YAML; relative paths resolve against the config file::

    prompts: prompts.yaml
    seed: 0
    gd_plus: {scales: [0.5, 1.0], nms_overlap_threshold: 0.1,
              max_area_fraction: 0.9, min_confidence: 0.0}
    magnifications: [1.2, 1.5]
    filter: true
    template: "The satellite view of {name}"     # optional
    backend:
      kind: mock                  # or "real"
      scenes: scenes.yaml
      duplicates: 3               # mock noise knobs, all optional
      jitter: 2.0
      min_size: 0
      max_size: .inf
      scorer_confusion: 0.0

Each run writes ``<stem>.png`` label maps, ``manifest.jsonl`` (one record
per image, deterministic) and ``timings.jsonl`` into the output directory.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from promptseg.backends import BackendError, Detector, Image, ImageTextScorer, PointSegmenter
from promptseg.clip_filter import DEFAULT_MAGNIFICATIONS, ExtendedPatch, run_filter
from promptseg.detection import GdPlusConfig, run_gd_plus
from promptseg.io import list_images, read_image, read_label_png, write_image, write_label_png
from promptseg.metrics import ConfusionMatrix, EvalReport, accumulate, compute_report, format_table
from promptseg.prompts import PromptSet, load_prompt_file
from promptseg.segmentation import LabelMask, assemble_label_mask, segment_all

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    """Invalid configuration or inputs; raised before any work is done."""


class EvaluationError(RuntimeError):
    pass


Backends = tuple[Detector, ImageTextScorer, PointSegmenter]
BackendFactory = Callable[[str], Backends]


@dataclass(frozen=True)
class RunConfig:
    prompts: PromptSet
    gd_plus: GdPlusConfig = field(default_factory=GdPlusConfig)
    magnifications: tuple[float, ...] = DEFAULT_MAGNIFICATIONS
    use_filter: bool = True
    template: str | None = None
    backend: dict[str, Any] = field(default_factory=lambda: {"kind": "mock"})
    seed: int = 0
    debug_patches: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "magnifications", tuple(float(m) for m in self.magnifications))
        if not self.magnifications or any(m < 1 for m in self.magnifications):
            raise ConfigError("magnifications must be non-empty and each >= 1")
        if self.template is not None and "{name}" not in self.template:
            raise ConfigError("template must contain a '{name}' placeholder")


def _resolve(base: Path, value: str | None) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except yaml.YAMLError as err:
        raise ConfigError(f"{path}: {err}") from err
    base = path.parent
    try:
        prompt_path = _resolve(base, data.get("prompts"))
        if prompt_path is None or not prompt_path.is_file():
            raise ConfigError(f"prompt file {prompt_path} not found")
        prompts = load_prompt_file(prompt_path)
        gd = GdPlusConfig(**(data.get("gd_plus") or {}))
        backend = dict(data.get("backend") or {"kind": "mock"})
        kind = backend.get("kind", "mock")
        if kind == "mock":
            scenes = _resolve(base, backend.get("scenes"))
            if scenes is None or not scenes.is_file():
                raise ConfigError(f"mock backend needs an existing scenes file, got {scenes}")
            backend["scenes"] = str(scenes)
        elif kind != "real":
            raise ConfigError(f"unknown backend kind {kind!r}")
        return RunConfig(
            prompts=prompts,
            gd_plus=gd,
            magnifications=tuple(data.get("magnifications") or DEFAULT_MAGNIFICATIONS),
            use_filter=bool(data.get("filter", True)),
            template=data.get("template"),
            backend=backend,
            seed=int(data.get("seed", 0)),
            debug_patches=bool(data.get("debug_patches", False)),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as err:
        raise ConfigError(f"{path}: {err}") from err


def make_backend_factory(cfg: RunConfig) -> BackendFactory:
    opts = dict(cfg.backend)
    kind = opts.pop("kind", "mock")
    if kind == "mock":
        from promptseg.backends.mock import MockDetector, MockScorer, MockSegmenter, load_scenes

        scenes = load_scenes(opts.pop("scenes"))
        template = cfg.template or cfg.prompts.template

        def mock_factory(stem: str) -> Backends:
            if stem not in scenes:
                raise BackendError("no scene description for image", image=stem)
            scene = scenes[stem]
            detector = MockDetector(
                scene,
                seed=cfg.seed,
                duplicates=int(opts.get("duplicates", 1)),
                jitter=float(opts.get("jitter", 2.0)),
                min_size=float(opts.get("min_size", 0.0)),
                max_size=float(opts.get("max_size", float("inf"))),
            )
            scorer = MockScorer(
                scene,
                template=template,
                confusion=float(opts.get("scorer_confusion", 0.0)),
                background_label=opts.get("background_label"),
            )
            return detector, scorer, MockSegmenter(scene)

        return mock_factory

    from promptseg.backends.adapters import build_real_backends

    shared = build_real_backends(opts)
    return lambda stem: shared


@dataclass
class RunResult:
    records: list[dict[str, Any]]
    masks: dict[str, np.ndarray]
    out_dir: Path | None

    @property
    def failures(self) -> int:
        return sum(r["status"] != "ok" for r in self.records)

    @property
    def exit_status(self) -> int:
        return EXIT_PARTIAL if self.failures else EXIT_OK


def _detection_record(det, decision=None) -> dict[str, Any]:
    rec = {
        "bbox": [float(v) for v in det.bbox.as_tuple()],
        "raw_label": det.raw_label,
        "canonical_class": det.canonical_class,
        "confidence": float(det.confidence),
        "source_scale": float(det.source_scale),
        "kept": True,
        "matched_class": None,
        "probabilities": None,
    }
    if decision is not None:
        rec["kept"] = bool(decision.kept)
        rec["matched_class"] = decision.result.matched_class
        rec["probabilities"] = [float(p) for p in decision.result.probabilities]
    return rec


def process_image(
    img: Image,
    cfg: RunConfig,
    backends: Backends,
    on_patch: Callable[[int, float, ExtendedPatch], None] | None = None,
) -> tuple[LabelMask, dict[str, Any]]:
    """Detection, filtering, segmentation and assembly for one image."""
    detector, scorer, segmenter = backends
    trace = run_gd_plus(img, cfg.prompts, detector, cfg.gd_plus)
    dets = trace.detections
    decisions = None
    if cfg.use_filter:
        ftrace = run_filter(
            dets, img, cfg.prompts, scorer, cfg.magnifications, cfg.template, on_patch
        )
        decisions = ftrace.decisions
        kept = ftrace.kept
    else:
        kept = list(dets)
    instances = segment_all(img, kept, segmenter)
    mask = assemble_label_mask(instances, img.height, img.width, cfg.prompts.class_number)
    record = {
        "image": img.name,
        "status": "ok",
        "error": None,
        "raw_counts": {str(s): n for s, n in trace.raw_counts.items()},
        "raw": trace.raw_total,
        "post_nms": len(dets),
        "post_filter": len(kept),
        "filter_enabled": cfg.use_filter,
        "empty_masks": sum(inst.empty for inst in instances),
        "detections": [
            _detection_record(d, decisions[i] if decisions is not None else None)
            for i, d in enumerate(dets)
        ],
    }
    return mask, record


def run(
    cfg: RunConfig,
    images: str | Path,
    out_dir: str | Path | None = None,
    factory: BackendFactory | None = None,
) -> RunResult:
    images = Path(images)
    if not images.is_dir():
        raise ConfigError(f"image directory {images} not found")
    paths = list_images(images)
    if not paths:
        raise ConfigError(f"no PNG/TIFF images in {images}")
    if factory is None:
        factory = make_backend_factory(cfg)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if cfg.debug_patches:
            (out / "debug_patches").mkdir(exist_ok=True)

    records, masks, timings = [], {}, []
    for path in paths:
        stem = path.stem
        start = time.perf_counter()
        try:
            img = read_image(path)
            hook = None
            if out is not None and cfg.debug_patches:
                def hook(i, m, patch, stem=stem):
                    write_image(out / "debug_patches" / f"{stem}_{i:03d}_x{m:g}.png", patch.pixels)
            mask, record = process_image(img, cfg, factory(stem), hook)
            masks[stem] = mask.labels
            if out is not None:
                write_label_png(out / f"{stem}.png", mask.labels)
        except (BackendError, OSError, ValueError) as err:
            log.warning("image %s failed: %s", stem, err)
            record = {"image": stem, "status": "error", "error": str(err)}
        records.append(record)
        timings.append({"image": stem, "seconds": time.perf_counter() - start})

    if out is not None:
        with open(out / "manifest.jsonl", "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        with open(out / "timings.jsonl", "w", encoding="utf-8") as fh:
            for rec in timings:
                fh.write(json.dumps(rec) + "\n")
    return RunResult(records, masks, out)


def _stems(directory: Path) -> dict[str, Path]:
    return {p.stem: p for p in list_images(directory)}


def evaluate(pred_dir: str | Path, gt_dir: str | Path, class_number: int | PromptSet) -> EvalReport:
    """Accumulate one confusion matrix over every prediction/ground-truth pair."""
    if isinstance(class_number, PromptSet):
        class_number = class_number.class_number
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise ConfigError(f"directory {d} not found")
    preds, gts = _stems(pred_dir), _stems(gt_dir)
    missing = sorted(set(gts) - set(preds))
    extra = sorted(set(preds) - set(gts))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"no prediction for: {', '.join(missing)}")
        if extra:
            parts.append(f"no ground truth for: {', '.join(extra)}")
        raise EvaluationError("; ".join(parts))
    if not gts:
        raise EvaluationError(f"no label maps in {gt_dir}")

    cm = ConfusionMatrix(class_number)
    for stem in sorted(gts):
        pred, gt = read_label_png(preds[stem]), read_label_png(gts[stem])
        if pred.shape != gt.shape:
            raise EvaluationError(f"{stem}: prediction {pred.shape} vs ground truth {gt.shape}")
        try:
            cm = accumulate(cm, LabelMask(pred, class_number), LabelMask(gt, class_number))
        except ValueError as err:
            raise EvaluationError(f"{stem}: {err}") from err
    return compute_report(cm)


def evaluate_arrays(
    preds: dict[str, np.ndarray], gts: dict[str, np.ndarray], class_number: int
) -> EvalReport:
    cm = ConfusionMatrix(class_number)
    for stem in sorted(gts):
        cm = accumulate(cm, LabelMask(preds[stem], class_number), LabelMask(gts[stem], class_number))
    return compute_report(cm)


ABLATION_ROWS = (
    ("a", "detector + segmenter"),
    ("b", "+ multi-scale + NMS"),
    ("c", "+ visual-prompt filter (single magnification)"),
    ("d", "full pipeline"),
)


def ablation_configs(cfg: RunConfig) -> list[tuple[str, str, RunConfig]]:
    """The four incremental configurations, prompt sets fixed across rows.

    (a) a single 1.0 view with suppression and size pruning disabled and no
    filter; (b) the configured scales, NMS and size pruning; (c) adds the
    filter at the first configured magnification only; (d) the filter with
    every magnification and probability averaging.
    """
    bare = replace(cfg.gd_plus, scales=(1.0,), nms_overlap_threshold=1.0, max_area_fraction=1.0)
    return [
        ("a", ABLATION_ROWS[0][1], replace(cfg, gd_plus=bare, use_filter=False)),
        ("b", ABLATION_ROWS[1][1], replace(cfg, use_filter=False)),
        ("c", ABLATION_ROWS[2][1], replace(cfg, use_filter=True, magnifications=cfg.magnifications[:1])),
        ("d", ABLATION_ROWS[3][1], replace(cfg, use_filter=True)),
    ]


@dataclass
class AblationRow:
    key: str
    name: str
    config: RunConfig
    result: RunResult
    report: EvalReport


def ablate(
    cfg: RunConfig,
    images: str | Path,
    gt_dir: str | Path,
    out_dir: str | Path | None = None,
    factory: BackendFactory | None = None,
) -> list[AblationRow]:
    gt_dir = Path(gt_dir)
    gts = {stem: read_label_png(p) for stem, p in _stems(gt_dir).items()}
    if not gts:
        raise ConfigError(f"no ground-truth label maps in {gt_dir}")
    out = Path(out_dir) if out_dir is not None else None
    rows = []
    for key, name, row_cfg in ablation_configs(cfg):
        row_out = out / f"row_{key}" if out is not None else None
        result = run(row_cfg, images, row_out, factory)
        missing = sorted(set(gts) - set(result.masks))
        if missing:
            raise EvaluationError(f"row {key}: no prediction for {', '.join(missing)}")
        extra = sorted(set(result.masks) - set(gts))
        if extra:
            raise EvaluationError(f"row {key}: no ground truth for {', '.join(extra)}")
        report = evaluate_arrays(result.masks, gts, cfg.prompts.class_number)
        rows.append(AblationRow(key, name, row_cfg, result, report))
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "ablation.txt").write_text(ablation_table(rows) + "\n", encoding="utf-8")
        payload = [
            {"row": r.key, "name": r.name, **r.report.metrics(), "images": r.report.image_count}
            for r in rows
        ]
        (out / "ablation.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return rows


def ablation_table(rows: list[AblationRow]) -> str:
    header = (
        "rows: (a) single 1.0 view, no NMS/size pruning, no filter; (b) configured scales + NMS;\n"
        "(c) + filter at the first magnification; (d) + filter averaged over all magnifications\n"
    )
    return header + format_table([(f"({r.key}) {r.name}", r.report) for r in rows])
