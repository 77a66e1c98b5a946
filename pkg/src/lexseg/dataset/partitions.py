"""Held-out-class folds over a label set."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from lexseg.errors import ConfigurationError, DataLeakError, ResourceError

VOC_CLASSES = (
    "aeroplane", "bicycle", "bird", "boat", "bottle",
    "bus", "car", "cat", "chair", "cow",
    "diningtable", "dog", "horse", "motorbike", "person",
    "pottedplant", "sheep", "sofa", "train", "tvmonitor",
)

# dataset class names that are not plain words
LABEL_TEXT = {"diningtable": "dining table", "pottedplant": "potted plant", "tvmonitor": "tv monitor"}


def label_text(name: str) -> str:
    """Natural-language form of a dataset class name, for the label mapper."""
    return LABEL_TEXT.get(name, name)


@dataclass(frozen=True)
class PartitionSpec:
    index: int
    test_labels: tuple[str, ...]
    train_labels: tuple[str, ...]

    def __post_init__(self):
        overlap = set(self.test_labels) & set(self.train_labels)
        if overlap:
            raise DataLeakError(f"partition {self.index}: labels in both train and test: {sorted(overlap)}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(sorted(self.test_labels + self.train_labels))

    def split_labels(self, split: str) -> tuple[str, ...]:
        if split == "train":
            return self.train_labels
        if split == "test":
            return self.test_labels
        raise ConfigurationError(f"split must be 'train' or 'test', got {split!r}")


def load_partitions(classes=VOC_CLASSES, folds: int = 4) -> list[PartitionSpec]:
    """Sort ``classes`` and cut them into ``folds`` consecutive test blocks.

    With the default 20 VOC classes this yields the usual four folds of five.
    """
    classes = tuple(sorted(classes))
    if folds < 1 or len(classes) % folds:
        raise ConfigurationError(f"{len(classes)} classes do not split into {folds} equal folds")
    size = len(classes) // folds
    out = []
    for i in range(folds):
        test = classes[i * size : (i + 1) * size]
        out.append(PartitionSpec(i, test, tuple(c for c in classes if c not in test)))
    return out


def get_partition(index: int, classes=VOC_CLASSES, folds: int = 4) -> PartitionSpec:
    parts = load_partitions(classes, folds)
    if not 0 <= index < len(parts):
        raise ConfigurationError(f"partition index must be in [0, {len(parts)}), got {index}")
    return parts[index]


def load_partition_file(path) -> PartitionSpec:
    """YAML with ``index``, ``test_labels`` and ``train_labels``; overlap is a data leak."""
    path = Path(path)
    if not path.is_file():
        raise ResourceError(f"partition file {path} not found")
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    try:
        return PartitionSpec(int(raw.get("index", 0)), tuple(raw["test_labels"]), tuple(raw["train_labels"]))
    except KeyError as exc:
        raise ConfigurationError(f"{path}: missing {exc.args[0]}") from None
