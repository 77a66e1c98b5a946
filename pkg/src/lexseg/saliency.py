"""Positive and negative saliency maps from guided-backprop gradients."""

from __future__ import annotations

import hashlib
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from lexseg.errors import EmptyCompositionError, LexsegWarning, ShapeError

POLARITIES = ("positive", "negative")
SALMAP_MAGIC = b"SALMAP"


@dataclass
class SaliencyMap:
    values: np.ndarray  # h x w, float in [0, 1]
    polarity: str = "positive"
    source_labels: tuple[int, ...] = field(default=())
    degenerate: bool = False

    @property
    def shape(self):
        return self.values.shape

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def zero_map(height: int, width: int, polarity: str = "positive") -> SaliencyMap:
    return SaliencyMap(np.zeros((height, width)), polarity, (), degenerate=True)


def single_label_saliency(grad, polarity: str = "positive", source_labels=()) -> SaliencyMap:
    """Max over the three gradient channels, then min-max scaling to [0, 1].

    A constant gradient carries no location signal and yields all zeros
    with ``degenerate`` set.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.ndim != 3 or grad.shape[0] != 3:
        raise ShapeError(f"expected a 3 x h x w gradient, got {grad.shape}")
    pooled = grad.max(axis=0)
    lo, hi = pooled.min(), pooled.max()
    if hi == lo:
        return SaliencyMap(np.zeros_like(pooled), polarity, tuple(source_labels), degenerate=True)
    return SaliencyMap((pooled - lo) / (hi - lo), polarity, tuple(source_labels))


def compose_saliency(maps) -> SaliencyMap:
    """Pixel-wise mean of same-sized, same-polarity maps (no rescaling)."""
    maps = list(maps)
    if not maps:
        raise EmptyCompositionError("cannot compose an empty list of saliency maps")
    shape, polarity = maps[0].shape, maps[0].polarity
    for m in maps:
        if m.shape != shape:
            raise ShapeError(f"saliency maps differ in size: {m.shape} vs {shape}")
        if m.polarity != polarity:
            raise ValueError("cannot compose maps of different polarity")
    values = np.mean(np.stack([m.values for m in maps]), axis=0)
    labels = []
    for m in maps:
        labels.extend(i for i in m.source_labels if i not in labels)
    return SaliencyMap(values, polarity, tuple(labels), degenerate=all(m.degenerate for m in maps))


def resize_map(values, height: int, width: int) -> np.ndarray:
    """Bilinear resize, clamped back into [0, 1]."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (height, width):
        t = torch.from_numpy(np.ascontiguousarray(values))[None, None]
        values = F.interpolate(t, size=(height, width), mode="bilinear", align_corners=False)[0, 0].numpy()
    return np.clip(values, 0.0, 1.0)


def image_digest(image) -> str:
    arr = np.ascontiguousarray(image)
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(str(arr.dtype).encode())
    h.update(arr.tobytes())
    return h.hexdigest()


def write_salmap(path, values) -> None:
    """Write ``SALMAP <w> <h>\\n`` followed by row-major little-endian float32s.

    The write goes to a temporary file first and is renamed into place, so
    concurrent writers never expose a partial file.
    """
    values = np.asarray(values)
    if values.ndim != 2:
        raise ShapeError("saliency map must be 2-D")
    h, w = values.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = f"SALMAP {w} {h}\n".encode("ascii") + values.astype("<f4").tobytes(order="C")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".salmap-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_salmap(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 3 or parts[0] != SALMAP_MAGIC:
            raise ValueError(f"{path}: not a SALMAP file")
        w, h = int(parts[1]), int(parts[2])
        data = fh.read()
    if len(data) != 4 * w * h:
        raise ValueError(f"{path}: expected {4 * w * h} payload bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f4").reshape(h, w).copy()


class SaliencyCache:
    """Composed maps on disk, keyed by image content, label list and backend.

    Values are stored as float32, so cached and fresh maps agree bitwise
    only when the caller also rounds fresh maps to float32; the pipeline
    always does.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def key(self, image, labels, backend_name: str) -> str:
        tag = f"{image_digest(image)}|{','.join(str(int(i)) for i in labels)}|{backend_name}"
        return hashlib.sha256(tag.encode()).hexdigest()

    def path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.salmap"

    def get(self, key: str):
        p = self.path(key)
        if not p.is_file():
            return None
        return read_salmap(p)

    def put(self, key: str, values) -> None:
        write_salmap(self.path(key), values)


def saliency_for_labels(image, labels, classifier, polarity: str = "positive", cache=None, tensor=None) -> SaliencyMap:
    """Mean single-label saliency over ``labels``, resized to the image.

    An empty label list yields a zero map and a warning.
    """
    height, width = np.asarray(image).shape[:2]
    labels = [int(i) for i in labels]
    if not labels:
        warnings.warn(f"no {polarity} proxy labels; using a zero map", LexsegWarning, stacklevel=2)
        return zero_map(height, width, polarity)
    key = None
    if cache is not None:
        key = cache.key(image, labels, classifier.name)
        hit = cache.get(key)
        if hit is not None:
            return SaliencyMap(hit.astype(np.float64), polarity, tuple(labels))
    if tensor is None:
        tensor = classifier.preprocess(image)
    maps = [
        single_label_saliency(classifier.guided_backprop_gradient(tensor, i), polarity, (i,))
        for i in labels
    ]
    composed = compose_saliency(maps)
    values = resize_map(composed.values, height, width).astype(np.float32).astype(np.float64)
    if cache is not None:
        cache.put(key, values)
    return SaliencyMap(values, polarity, composed.source_labels, composed.degenerate)


def generate_attention_maps(image, proxies, classifier, cache=None):
    """Positive and negative maps for a :class:`ProxyLabelSet`, at image size."""
    tensor = classifier.preprocess(image)
    pos = saliency_for_labels(image, proxies.positive_indices, classifier, "positive", cache, tensor)
    neg = saliency_for_labels(image, proxies.negative_indices, classifier, "negative", cache, tensor)
    return pos, neg
