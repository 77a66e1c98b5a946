"""Samples with lazily loaded images and per-label binary masks."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from lexseg.errors import ShapeError


def read_rgb(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


class MaskSource:
    def mask(self, label: str) -> np.ndarray:
        raise NotImplementedError


@dataclass
class ArrayMasks(MaskSource):
    masks: dict

    def mask(self, label):
        return np.asarray(self.masks[label], dtype=np.uint8)


@dataclass
class PaletteMask(MaskSource):
    """Indexed PNG where value ``i + 1`` marks class ``classes[i]`` (0 background, 255 void)."""

    path: Path
    classes: tuple

    def mask(self, label):
        with Image.open(self.path) as im:
            arr = np.asarray(im)
        return (arr == self.classes.index(label) + 1).astype(np.uint8)


@dataclass
class PerClassPNGMasks(MaskSource):
    """One binary PNG per label (any non-zero value is foreground)."""

    paths: dict

    def mask(self, label):
        with Image.open(self.paths[label]) as im:
            return (np.asarray(im.convert("L")) > 0).astype(np.uint8)


@dataclass
class Sample:
    image_id: str
    labels: frozenset
    masks: MaskSource
    image_path: Path | None = None
    image_array: np.ndarray | None = field(default=None, repr=False)

    @property
    def image(self) -> np.ndarray:
        if self.image_array is not None:
            return self.image_array
        return read_rgb(self.image_path)

    def mask(self, label: str) -> np.ndarray:
        """Binary {0, 1} mask of ``label`` at image size."""
        if label not in self.labels:
            raise KeyError(f"{label!r} not present in {self.image_id}")
        m = self.masks.mask(label)
        if self.image_array is not None and m.shape != self.image_array.shape[:2]:
            raise ShapeError(f"{self.image_id}/{label}: mask {m.shape} vs image {self.image_array.shape[:2]}")
        return m


class SampleStore:
    """Immutable-by-convention mapping of image id to :class:`Sample`."""

    def __init__(self, samples=(), name: str = ""):
        self.name = name
        self._samples = {}
        for s in samples:
            self._samples[s.image_id] = s

    def __len__(self):
        return len(self._samples)

    def __iter__(self):
        return iter(self._samples[k] for k in sorted(self._samples))

    def __contains__(self, image_id):
        return image_id in self._samples

    def __getitem__(self, image_id) -> Sample:
        return self._samples[image_id]

    @property
    def ids(self) -> list[str]:
        return sorted(self._samples)

    def labels(self) -> set[str]:
        out = set()
        for s in self._samples.values():
            out |= s.labels
        return out

    def without(self, ids) -> "SampleStore":
        ids = set(ids)
        return SampleStore((s for s in self if s.image_id not in ids), self.name)

    def merged(self, other: "SampleStore", name: str = "") -> "SampleStore":
        """Union by image id; entries of ``self`` win on collision."""
        samples = {s.image_id: s for s in other}
        samples.update({s.image_id: s for s in self})
        return SampleStore(samples.values(), name or self.name)

    def digest(self) -> str:
        """sha256 over every image and mask in id order."""
        h = hashlib.sha256()
        for s in self:
            h.update(s.image_id.encode())
            h.update(np.ascontiguousarray(s.image).tobytes())
            for label in sorted(s.labels):
                h.update(label.encode())
                h.update(np.ascontiguousarray(s.mask(label)).tobytes())
        return h.hexdigest()
