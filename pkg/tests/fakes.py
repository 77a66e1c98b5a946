"""Tiny on-disk VOC / SBD trees for ingestion tests."""

from pathlib import Path

import numpy as np
from PIL import Image

from lexseg.dataset import VOC_CLASSES


def _label_map(labels, size):
    """Each label gets its own horizontal band; a void border like VOC's."""
    arr = np.zeros((size, size), np.uint8)
    band = size // max(len(labels), 1)
    for k, name in enumerate(labels):
        arr[k * band : (k + 1) * band, 2 : size - 2] = VOC_CLASSES.index(name) + 1
    arr[0, :] = 255
    return arr


def write_voc(root, train, val, size=16, seed=0):
    """``train``/``val``: dict image_id -> list of class names."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    for sub in ("JPEGImages", "SegmentationClass", "ImageSets/Segmentation"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for split, items in (("train", train), ("val", val)):
        for image_id, labels in items.items():
            rgb = rng.integers(0, 256, (size, size, 3), dtype=np.uint8)
            Image.fromarray(rgb).save(root / "JPEGImages" / f"{image_id}.jpg")
            png = Image.fromarray(_label_map(labels, size), mode="P")
            # an explicit palette keeps PIL from re-indexing the class values
            png.putpalette(list(np.arange(256 * 3) % 256))
            png.save(root / "SegmentationClass" / f"{image_id}.png")
        (root / f"ImageSets/Segmentation/{split}.txt").write_text("".join(f"{i}\n" for i in items))
    return root


def write_sbd(root, items, size=16, seed=1):
    """Converted layout: index.txt, masks/<class>/<id>.png, images/<id>.jpg."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    (root / "images").mkdir(parents=True, exist_ok=True)
    for image_id, labels in items.items():
        Image.fromarray(rng.integers(0, 256, (size, size, 3), dtype=np.uint8)).save(root / "images" / f"{image_id}.jpg")
        full = _label_map(labels, size)
        for name in labels:
            d = root / "masks" / name
            d.mkdir(parents=True, exist_ok=True)
            m = (full == VOC_CLASSES.index(name) + 1).astype(np.uint8) * 255
            Image.fromarray(m, mode="L").save(d / f"{image_id}.png")
    (root / "index.txt").write_text("".join(f"{i}\n" for i in items))
    return root
