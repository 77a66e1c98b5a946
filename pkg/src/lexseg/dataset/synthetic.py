"""Desk-scale corpus: coloured shapes on faintly textured grey.

Shape colours are the fixture classifier's classes, so a shape's label is
also a class the fixture recognises. Colours are drawn as ``0.5 + 0.5 * s *
sign`` per channel with saturation ``s`` in [0.6, 1]; the background stays
within 0.06 of mid-grey, below the fixture's detection threshold.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from lexseg.classifier import FIXTURE_PALETTE
from lexseg.dataset.partitions import load_partitions
from lexseg.dataset.store import ArrayMasks, PerClassPNGMasks, Sample, SampleStore, read_rgb
from lexseg.errors import ResourceError

SYNTH_CLASSES = tuple(FIXTURE_PALETTE)
SHAPES = ("disc", "box", "triangle", "ellipse")
BACKGROUND_AMPLITUDE = 0.06
PIXEL_NOISE = 0.03
MIN_VISIBLE = 30  # pixels at the default 48 x 48 size; scales with area
REFERENCE_SIZE = 48


def synth_partitions():
    """Three folds of two colours over the sorted synthetic classes."""
    return load_partitions(SYNTH_CLASSES, folds=3)


def _shape_mask(kind: str, size: int, rng) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    r = rng.uniform(0.12, 0.24) * size
    cy, cx = rng.uniform(r, size - r, 2)
    if kind == "disc":
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= r**2
    if kind == "box":
        hy, hx = r * rng.uniform(0.6, 1.0, 2)
        return (np.abs(yy - cy) <= hy) & (np.abs(xx - cx) <= hx)
    if kind == "ellipse":
        ay, ax = r * rng.uniform(0.5, 1.0, 2)
        return ((yy - cy) / ay) ** 2 + ((xx - cx) / ax) ** 2 <= 1
    # triangle: three points on a jittered circle
    angles = rng.uniform(0, 2 * np.pi) + np.array([0, 2, 4]) * np.pi / 3 + rng.uniform(-0.3, 0.3, 3)
    pts = np.stack([cy + r * np.sin(angles), cx + r * np.cos(angles)], axis=1)
    inside = np.ones((size, size), bool)
    sign = None
    for i in range(3):
        (y0, x0), (y1, x1) = pts[i], pts[(i + 1) % 3]
        cross = (x1 - x0) * (yy - y0) - (y1 - y0) * (xx - x0)
        if sign is None:
            sign = np.sign((x1 - x0) * (pts[(i + 2) % 3][0] - y0) - (y1 - y0) * (pts[(i + 2) % 3][1] - x0))
        inside &= sign * cross >= 0
    return inside


def _background(size: int, rng) -> np.ndarray:
    noise = gaussian_filter(rng.standard_normal((size, size, 3)), sigma=(3, 3, 0))
    noise *= BACKGROUND_AMPLITUDE / max(np.abs(noise).max(), 1e-12)
    return 0.5 + noise


def _one_image(size: int, max_shapes: int, classes, rng):
    img = _background(size, rng)
    n = int(rng.integers(1, min(max_shapes, len(classes)) + 1))
    colours = rng.choice(len(classes), size=n, replace=False)
    owner = np.full((size, size), -1)
    areas = []
    for k, c in enumerate(colours):
        m = _shape_mask(SHAPES[rng.integers(len(SHAPES))], size, rng)
        owner[m] = k
        areas.append(m.sum())
        sat = rng.uniform(0.6, 1.0)
        signs = np.array(FIXTURE_PALETTE[classes[c]], dtype=np.float64)
        colour = 0.5 + 0.5 * sat * signs
        img[m] = colour + rng.uniform(-PIXEL_NOISE, PIXEL_NOISE, (int(m.sum()), 3))
    masks = {}
    for k, c in enumerate(colours):
        vis = owner == k
        if vis.sum() < max(MIN_VISIBLE * (size / REFERENCE_SIZE) ** 2, 0.4 * areas[k]):
            return None
        masks[classes[c]] = vis.astype(np.uint8)
    rgb = np.clip(np.round(img * 255), 0, 255).astype(np.uint8)
    return rgb, masks


def synth_shapes_corpus(n: int, seed: int = 0, size: int = 48, max_shapes: int = 3,
                        classes=SYNTH_CLASSES) -> SampleStore:
    """``n`` images of 1 to ``max_shapes`` distinct-colour shapes with exact masks.

    ``classes`` limits the palette, e.g. to a fold's training colours so
    held-out colours never appear as unlabelled background. Later shapes
    occlude earlier ones; draws where a shape ends up mostly hidden are
    rejected and redrawn, so every mask is non-empty.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if size < 8:
        raise ValueError("size must be >= 8")
    classes = tuple(classes)
    unknown = set(classes) - set(SYNTH_CLASSES)
    if unknown or not classes:
        raise ValueError(f"classes must be a non-empty subset of {SYNTH_CLASSES}")
    rng = np.random.default_rng(seed)
    samples = []
    while len(samples) < n:
        out = _one_image(size, max_shapes, classes, rng)
        if out is None:
            continue
        rgb, masks = out
        image_id = f"synth-{seed}-{len(samples):05d}"
        samples.append(Sample(image_id, frozenset(masks), ArrayMasks(masks), image_array=rgb))
    return SampleStore(samples, f"synth-{seed}")


def save_corpus(store: SampleStore, root) -> Path:
    """``images/<id>.png``, ``masks/<label>/<id>.png`` and ``manifest.tsv``."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    lines = ["image_id\tlabels\tsha256"]
    for s in store:
        img = s.image
        Image.fromarray(img).save(root / "images" / f"{s.image_id}.png")
        h = hashlib.sha256(img.tobytes())
        for label in sorted(s.labels):
            d = root / "masks" / label
            d.mkdir(parents=True, exist_ok=True)
            m = s.mask(label)
            Image.fromarray(m * 255).save(d / f"{s.image_id}.png")
            h.update(label.encode())
            h.update(m.tobytes())
        lines.append(f"{s.image_id}\t{','.join(sorted(s.labels))}\t{h.hexdigest()}")
    (root / "manifest.tsv").write_text("\n".join(lines) + "\n")
    return root


def load_corpus(root, in_memory: bool = True) -> SampleStore:
    root = Path(root)
    manifest = root / "manifest.tsv"
    if not manifest.is_file():
        raise ResourceError(f"{root} has no manifest.tsv; create it with `lexseg synth`")
    samples = []
    for line in manifest.read_text().splitlines()[1:]:
        if not line.strip():
            continue
        image_id, labels, _ = line.split("\t")
        labels = [x for x in labels.split(",") if x]
        paths = {lab: root / "masks" / lab / f"{image_id}.png" for lab in labels}
        img_path = root / "images" / f"{image_id}.png"
        masks = PerClassPNGMasks(paths)
        if in_memory:
            arr = read_rgb(img_path)
            masks = ArrayMasks({lab: masks.mask(lab) for lab in labels})
            samples.append(Sample(image_id, frozenset(labels), masks, img_path, arr))
        else:
            samples.append(Sample(image_id, frozenset(labels), masks, img_path))
    return SampleStore(samples, root.name)
