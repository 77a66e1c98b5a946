"""PNG writers for masks and seed annotations."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from lexseg.postprocess.annotation import AnnotationImage


def write_mask_png(path, mask) -> None:
    """0 = background, 255 = foreground."""
    arr = (np.asarray(mask) > 0).astype(np.uint8) * 255
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode="L").save(path)


def read_mask_png(path) -> np.ndarray:
    return (np.asarray(Image.open(path).convert("L")) > 127).astype(np.uint8)


def write_annotation_png(path, annotation: AnnotationImage) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(annotation.to_png_levels(), mode="L").save(path)
