"""Deterministic scene-driven backends for tests and demos.

A :class:`Scene` lists axis-aligned rectangles with a true class (or marked
as distractors whose true class is outside the task). Scenes render to flat
coloured images with one unique colour per shape, and the three mocks
answer from the scene:

* :class:`MockDetector` echoes shape boxes in the queried view's frame, with
  optional duplicate/jitter noise and scale-dependent size gating.
* :class:`MockScorer` finds the red circle in a patch, reads the colour at
  its centre and scores the candidate naming that shape's label.
* :class:`MockSegmenter` returns the pixels of the smallest shape containing
  the prompt point.

Pixel ``(row, col)`` belongs to a rectangle when its centre
``(col + 0.5, row + 0.5)`` lies in ``[x_min, x_max) x [y_min, y_max)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from promptseg.backends import Image, check_point
from promptseg.geometry import BBox
from promptseg.prompts import DEFAULT_TEMPLATE, PromptSet

BACKGROUND = (96.0, 96.0, 96.0)
RED = (255.0, 0.0, 0.0)
DUPLICATE_DECAY = 0.9


@dataclass(frozen=True)
class SceneShape:
    rect: BBox
    label: str
    confidence: float = 0.9
    class_id: int | None = None
    # task class a distractor is reported as by the detector
    detect_as: int | None = None
    color: tuple[float, float, float] = (200.0, 200.0, 200.0)

    @property
    def is_distractor(self) -> bool:
        return self.class_id is None

    @property
    def reported_class(self) -> int | None:
        return self.class_id if self.class_id is not None else self.detect_as


@dataclass(frozen=True)
class Phantom:
    """A box the detector reports although no object is there."""

    rect: BBox
    detect_as: int
    confidence: float = 0.5


@dataclass(frozen=True)
class Scene:
    width: int
    height: int
    shapes: tuple[SceneShape, ...] = ()
    phantoms: tuple[Phantom, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "shapes", tuple(self.shapes))
        object.__setattr__(self, "phantoms", tuple(self.phantoms))
        for s in self.shapes:
            r = s.rect
            if r.x_min < 0 or r.y_min < 0 or r.x_max > self.width or r.y_max > self.height:
                raise ValueError(f"shape {s.label!r} lies outside the {self.width}x{self.height} scene")
            if s.class_id is None and s.detect_as is None:
                raise ValueError(f"distractor {s.label!r} needs detect_as")
        colors = [s.color for s in self.shapes]
        if len(set(colors)) != len(colors) or BACKGROUND in colors or RED in colors:
            raise ValueError("shape colours must be unique and differ from background and red")

    def painting_order(self) -> list[int]:
        """Shape indices, largest first, so smaller shapes end up on top."""
        return sorted(range(len(self.shapes)), key=lambda i: -self.shapes[i].rect.area)

    def shape_mask(self, index: int) -> np.ndarray:
        return rect_mask(self.shapes[index].rect, self.height, self.width)

    def to_dict(self) -> dict[str, Any]:
        shapes = []
        for s in self.shapes:
            d: dict[str, Any] = {
                "rect": list(s.rect.as_tuple()),
                "label": s.label,
                "confidence": s.confidence,
                "color": list(s.color),
            }
            if s.class_id is not None:
                d["class_id"] = s.class_id
            else:
                d["detect_as"] = s.detect_as
            shapes.append(d)
        phantoms = [
            {"rect": list(p.rect.as_tuple()), "detect_as": p.detect_as, "confidence": p.confidence}
            for p in self.phantoms
        ]
        return {"width": self.width, "height": self.height, "shapes": shapes, "phantoms": phantoms}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Scene:
        shapes = tuple(
            SceneShape(
                rect=BBox(*map(float, s["rect"])),
                label=s["label"],
                confidence=float(s.get("confidence", 0.9)),
                class_id=s.get("class_id"),
                detect_as=s.get("detect_as"),
                color=tuple(float(c) for c in s.get("color", (200, 200, 200))),
            )
            for s in data.get("shapes") or []
        )
        phantoms = tuple(
            Phantom(BBox(*map(float, p["rect"])), int(p["detect_as"]), float(p.get("confidence", 0.5)))
            for p in data.get("phantoms") or []
        )
        return cls(int(data["width"]), int(data["height"]), shapes, phantoms)


def rect_mask(rect: BBox, height: int, width: int) -> np.ndarray:
    cols = np.arange(width) + 0.5
    rows = np.arange(height) + 0.5
    in_x = (cols >= rect.x_min) & (cols < rect.x_max)
    in_y = (rows >= rect.y_min) & (rows < rect.y_max)
    return in_y[:, None] & in_x[None, :]


def render_scene(scene: Scene, name: str = "") -> Image:
    pixels = np.empty((3, scene.height, scene.width))
    pixels[:] = np.asarray(BACKGROUND)[:, None, None]
    for i in scene.painting_order():
        m = scene.shape_mask(i)
        pixels[:, m] = np.asarray(scene.shapes[i].color)[:, None]
    return Image(pixels, name)


def scene_ground_truth(scene: Scene) -> np.ndarray:
    """Label map of the scene: true classes painted, distractors left as background."""
    labels = np.zeros((scene.height, scene.width), dtype=np.int64)
    for i in scene.painting_order():
        s = scene.shapes[i]
        labels[scene.shape_mask(i)] = s.class_id if s.class_id is not None else 0
    return labels


class MockDetector:
    """Echoes scene shapes as detections in the frame of the queried view.

    With ``duplicates=k`` each shape is reported ``k`` times; copy ``j`` has
    confidence ``conf * 0.9**j`` and, for ``j >= 1``, every coordinate
    jittered by at most ``jitter`` pixels. A shape is only seen in a view
    when its longer side there lies within ``[min_size, max_size]``. Copy
    ``j`` is labelled with the ``j``-th synonym of its class (cyclically).
    Jitter is seeded by ``(seed, shape, view size, copy)`` so results do not
    depend on call order.
    """

    def __init__(
        self,
        scene: Scene,
        seed: int = 0,
        duplicates: int = 1,
        jitter: float = 2.0,
        min_size: float = 0.0,
        max_size: float = float("inf"),
    ):
        if duplicates < 1:
            raise ValueError("duplicates must be >= 1")
        if not 0.0 <= jitter <= 2.0:
            raise ValueError("jitter must lie in [0, 2] pixels")
        self.scene = scene
        self.seed = seed
        self.duplicates = duplicates
        self.jitter = jitter
        self.min_size = min_size
        self.max_size = max_size
        self.calls = 0

    def detect(self, img: Image, vocabulary: Sequence[tuple[str, int]]):
        if not vocabulary:
            raise ValueError("vocabulary must be non-empty")
        self.calls += 1
        sx = img.width / self.scene.width
        sy = img.height / self.scene.height
        texts: dict[int, list[str]] = {}
        for text, cid in vocabulary:
            texts.setdefault(cid, []).append(text)

        out = []
        for idx, shape in enumerate(self.scene.shapes):
            cid = shape.reported_class
            if cid not in texts:
                continue
            r = shape.rect
            side = max(r.width * sx, r.height * sy)
            if not self.min_size <= side <= self.max_size:
                continue
            base = np.array([r.x_min * sx, r.y_min * sy, r.x_max * sx, r.y_max * sy])
            for j in range(self.duplicates):
                coords = base
                if j > 0 and self.jitter > 0:
                    rng = np.random.default_rng([self.seed, idx, img.width, img.height, j])
                    coords = base + rng.uniform(-self.jitter, self.jitter, size=4)
                box = _clipped(coords, img.width, img.height)
                if box is not None:
                    label = texts[cid][j % len(texts[cid])]
                    out.append((box, label, shape.confidence * DUPLICATE_DECAY**j))
        for p in self.scene.phantoms:
            if p.detect_as not in texts:
                continue
            r = p.rect
            box = _clipped(np.array([r.x_min * sx, r.y_min * sy, r.x_max * sx, r.y_max * sy]), img.width, img.height)
            if box is not None:
                out.append((box, texts[p.detect_as][0], p.confidence))
        return out


def _clipped(coords: np.ndarray, width: int, height: int) -> BBox | None:
    x0, y0, x1, y1 = (float(c) for c in coords)
    if x0 >= x1 or y0 >= y1:
        return None
    return BBox(x0, y0, x1, y1).clip(width, height)


class MockScorer:
    """Scores the candidate naming the shape found inside the red circle.

    The circle centre is taken as the centre of the red pixels' bounding box;
    the most common non-red colour in the 3 x 3 window around it identifies
    the shape. Candidates match a label either verbatim or in templated form
    (case-insensitive). With ``confusion = eps`` the true candidate scores
    ``1 - eps`` and the next candidate (cyclically) scores ``eps``.
    Unknown colours score all zeros unless ``background_label`` is set.
    """

    def __init__(
        self,
        scene: Scene,
        template: str = DEFAULT_TEMPLATE,
        confusion: float = 0.0,
        background_label: str | None = None,
    ):
        self.scene = scene
        self.template = template
        self.confusion = confusion
        self.background_label = background_label
        self._labels = {tuple(s.color): s.label for s in scene.shapes}
        self.calls = 0

    def identify(self, patch: Image) -> str | None:
        px = patch.pixels
        red = np.all(px[:3] == np.asarray(RED)[:, None, None], axis=0)
        if red.any():
            rows, cols = np.nonzero(red)
            cy = (rows.min() + rows.max() + 1) / 2.0
            cx = (cols.min() + cols.max() + 1) / 2.0
        else:
            cy, cx = patch.height / 2.0, patch.width / 2.0
        r0, c0 = int(np.floor(cy)), int(np.floor(cx))
        counts: dict[tuple[float, ...], int] = {}
        for r in range(max(r0 - 1, 0), min(r0 + 2, patch.height)):
            for c in range(max(c0 - 1, 0), min(c0 + 2, patch.width)):
                if red[r, c]:
                    continue
                color = tuple(float(v) for v in px[:3, r, c])
                counts[color] = counts.get(color, 0) + 1
        for color, _ in sorted(counts.items(), key=lambda kv: -kv[1]):
            if color in self._labels:
                return self._labels[color]
        return self.background_label

    def score(self, patch: Image, candidates: Sequence[str]) -> np.ndarray:
        if not candidates:
            raise ValueError("candidates must be non-empty")
        self.calls += 1
        scores = np.zeros(len(candidates))
        label = self.identify(patch)
        if label is None:
            return scores
        forms = {label.lower(), self.template.format(name=label).lower()}
        hits = [i for i, c in enumerate(candidates) if c.lower() in forms]
        if not hits:
            return scores
        i = hits[0]
        scores[i] = 1.0 - self.confusion
        if self.confusion > 0 and len(candidates) > 1:
            scores[(i + 1) % len(candidates)] = self.confusion
        return scores


class MockSegmenter:
    """Returns the smallest scene shape containing the prompt pixel, else empty."""

    def __init__(self, scene: Scene):
        self.scene = scene
        self.calls: list[tuple[int, int]] = []

    def segment(self, img: Image, point: tuple[int, int]) -> np.ndarray:
        check_point(img, point)
        self.calls.append(point)
        x, y = point
        best = None
        for i in self.scene.painting_order():
            if self.scene.shape_mask(i)[y, x]:
                best = i
        if best is None:
            return np.zeros((img.height, img.width), dtype=bool)
        return self.scene.shape_mask(best)


# --- synthetic corpora -----------------------------------------------------

DEFAULT_PROMPTS = {
    "classes": [
        {"id": 1, "name": "building", "synonyms": ["building", "roof", "The roof of a building", "house"]},
        {"id": 2, "name": "lake", "synonyms": ["lake", "pond", "water"]},
    ],
    "unrelated": ["ground", "grass", "car", "cropland", "basketball court", "plain"],
}


@dataclass
class SceneRecipe:
    width: int = 256
    height: int = 256
    n_objects: int = 3
    n_classes: int = 2
    n_distractors: int = 1
    min_side: int = 16
    max_side: int = 64
    full_image_phantom: bool = False
    distractor_labels: tuple[str, ...] = ("car", "cropland", "basketball court")
    class_names: tuple[str, ...] = ("building", "lake")
    confidences: tuple[float, float] = (0.5, 0.95)
    extra: dict[str, Any] = field(default_factory=dict)


def random_scene(rng: np.random.Generator, recipe: SceneRecipe | None = None) -> Scene:
    """Non-overlapping rectangles: every class appears once before repeats."""
    recipe = recipe or SceneRecipe()
    n_total = recipe.n_objects + recipe.n_distractors
    rects: list[BBox] = []
    attempts = 0
    while len(rects) < n_total:
        attempts += 1
        if attempts > 10_000:
            raise RuntimeError("could not place non-overlapping shapes; loosen the recipe")
        w = int(rng.integers(recipe.min_side, recipe.max_side + 1))
        h = int(rng.integers(recipe.min_side, recipe.max_side + 1))
        x = int(rng.integers(0, recipe.width - w + 1))
        y = int(rng.integers(0, recipe.height - h + 1))
        cand = BBox(x, y, x + w, y + h)
        # 4 px gap keeps jittered duplicates of neighbours apart
        if all(
            cand.x_min >= r.x_max + 4 or r.x_min >= cand.x_max + 4
            or cand.y_min >= r.y_max + 4 or r.y_min >= cand.y_max + 4
            for r in rects
        ):
            rects.append(cand)

    colors: set[tuple[float, float, float]] = set()
    shapes = []
    lo, hi = recipe.confidences
    for i, rect in enumerate(rects):
        while True:
            color = tuple(float(c) for c in rng.integers(16, 240, size=3))
            if color not in colors and color != BACKGROUND:
                colors.add(color)
                break
        conf = round(float(rng.uniform(lo, hi)), 4)
        if i < recipe.n_objects:
            cid = i + 1 if i < recipe.n_classes else int(rng.integers(1, recipe.n_classes + 1))
            shapes.append(SceneShape(rect, recipe.class_names[cid - 1], conf, class_id=cid, color=color))
        else:
            label = recipe.distractor_labels[int(rng.integers(len(recipe.distractor_labels)))]
            detect_as = int(rng.integers(1, recipe.n_classes + 1))
            shapes.append(SceneShape(rect, label, conf, detect_as=detect_as, color=color))
    phantoms = ()
    if recipe.full_image_phantom:
        phantoms = (Phantom(BBox(0, 0, recipe.width, recipe.height), 1, 0.3),)
    return Scene(recipe.width, recipe.height, tuple(shapes), phantoms)


def load_scenes(path: str | Path) -> dict[str, Scene]:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return {stem: Scene.from_dict(d) for stem, d in (data.get("scenes") or {}).items()}


def save_scenes(path: str | Path, scenes: dict[str, Scene]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump({"scenes": {k: v.to_dict() for k, v in scenes.items()}}, fh, sort_keys=True)


def write_mock_corpus(
    root: str | Path,
    n_images: int = 20,
    seed: int = 0,
    recipe: SceneRecipe | None = None,
    backend: dict[str, Any] | None = None,
    prompts: dict[str, Any] | None = None,
) -> dict[str, Path]:
    """Write a self-contained mock dataset plus a run config under ``root``.

    Layout: ``images/*.png``, ``gt/*.png``, ``scenes.yaml``,
    ``prompts.yaml`` and ``config.yaml`` (mock backend). Returns those paths.
    """
    from promptseg.io import write_image, write_label_png

    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "gt").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    prompts = prompts or DEFAULT_PROMPTS
    scenes = {}
    for k in range(n_images):
        stem = f"scene_{k:03d}"
        scene = random_scene(rng, recipe)
        scenes[stem] = scene
        write_image(root / "images" / f"{stem}.png", render_scene(scene))
        write_label_png(root / "gt" / f"{stem}.png", scene_ground_truth(scene))
    save_scenes(root / "scenes.yaml", scenes)
    PromptSet.from_dict(prompts)  # validate before writing
    with open(root / "prompts.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(prompts, fh, sort_keys=False)
    config = {
        "prompts": "prompts.yaml",
        "seed": seed,
        "backend": {"kind": "mock", "scenes": "scenes.yaml", **(backend or {})},
    }
    with open(root / "config.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(config, fh, sort_keys=False)
    return {
        "root": root,
        "images": root / "images",
        "gt": root / "gt",
        "scenes": root / "scenes.yaml",
        "prompts": root / "prompts.yaml",
        "config": root / "config.yaml",
    }
