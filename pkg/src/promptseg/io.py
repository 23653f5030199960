"""Reading and writing images and label maps."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from promptseg.backends import Image

IMAGE_SUFFIXES = (".png", ".tif", ".tiff")


def list_images(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def read_image(path: str | Path) -> Image:
    """Load an 8-bit image as 3-channel RGB; grayscale is replicated, alpha dropped."""
    path = Path(path)
    with PILImage.open(path) as im:
        im = im.convert("RGB")
        array = np.asarray(im, dtype=np.float64)
    return Image.from_hwc(array, name=path.stem)


def write_image(path: str | Path, img: Image) -> None:
    hwc = img.to_hwc_uint8()
    if hwc.shape[-1] == 1:
        hwc = hwc[..., 0]
    PILImage.fromarray(hwc).save(path)


def write_label_png(path: str | Path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) > 255:
        raise ValueError("label values must fit in 8 bits")
    PILImage.fromarray(labels.astype(np.uint8)).save(path)


def read_label_png(path: str | Path) -> np.ndarray:
    with PILImage.open(path) as im:
        if im.mode not in ("L", "P", "I", "I;16"):
            raise ValueError(f"{path}: expected a single-channel label map, got mode {im.mode}")
        return np.asarray(im).astype(np.int64)
