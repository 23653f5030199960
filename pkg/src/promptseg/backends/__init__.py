"""Model interfaces composed by the pipeline.

Three roles are needed: a text-prompted box detector, an image-text
similarity scorer and a point-prompted segmenter. Anything implementing the
protocols below can be plugged in; :mod:`promptseg.backends.mock` provides
deterministic scene-driven doubles and :mod:`promptseg.backends.adapters`
thin wrappers around pretrained models.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from promptseg.geometry import BBox

MAX_INTENSITY = 255.0


class BackendError(RuntimeError):
    """A model backend failed; carries the identity of the offending input."""

    def __init__(self, message: str, image: str | None = None, detection: int | None = None):
        self.image = image
        self.detection = detection
        where = []
        if image is not None:
            where.append(f"image={image}")
        if detection is not None:
            where.append(f"detection={detection}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


@dataclass(frozen=True, eq=False)
class Image:
    """A C x H x W array of intensities in ``[0, MAX_INTENSITY]``."""

    pixels: np.ndarray
    name: str = ""

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim == 2:
            px = px[None]
        if px.ndim != 3 or min(px.shape) < 1:
            raise ValueError(f"expected a C x H x W array, got shape {px.shape}")
        if not np.isfinite(px).all():
            raise ValueError("image intensities must be finite")
        object.__setattr__(self, "pixels", px)

    @property
    def channels(self) -> int:
        return self.pixels.shape[0]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]

    @classmethod
    def from_hwc(cls, array: np.ndarray, name: str = "") -> Image:
        array = np.asarray(array)
        if array.ndim == 2:
            array = array[..., None]
        return cls(np.moveaxis(array, -1, 0), name)

    def to_hwc_uint8(self) -> np.ndarray:
        hwc = np.moveaxis(self.pixels, 0, -1)
        return np.clip(np.rint(hwc), 0, 255).astype(np.uint8)


RawDetection = tuple[BBox, str, float]


@runtime_checkable
class Detector(Protocol):
    def detect(self, img: Image, vocabulary: Sequence[tuple[str, int]]) -> list[RawDetection]:
        """Boxes in ``img``'s own frame, each with the matched vocabulary text."""
        ...


@runtime_checkable
class ImageTextScorer(Protocol):
    def score(self, patch: Image, candidates: Sequence[str]) -> np.ndarray:
        """One unnormalized similarity per candidate text, same order."""
        ...


@runtime_checkable
class PointSegmenter(Protocol):
    def segment(self, img: Image, point: tuple[int, int]) -> np.ndarray:
        """Boolean H x W mask of the object at pixel ``point = (x, y)``."""
        ...


def check_point(img: Image, point: tuple[int, int]) -> None:
    x, y = point
    if not (0 <= x < img.width and 0 <= y < img.height):
        raise ValueError(f"point {point} outside image of size {img.width}x{img.height}")


def call_backend(fn, *args, image: str | None = None, detection: int | None = None):
    """Invoke a backend method, normalizing failures to :class:`BackendError`."""
    try:
        return fn(*args)
    except BackendError as err:
        if err.image is None and err.detection is None:
            raise BackendError(str(err), image, detection) from err
        raise
    except ValueError:
        raise
    except Exception as err:
        raise BackendError(f"{type(err).__name__}: {err}", image, detection) from err
