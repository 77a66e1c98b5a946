"""Episode streams: (image, target label, binary mask) units per split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lexseg.dataset.partitions import PartitionSpec
from lexseg.dataset.store import Sample, SampleStore
from lexseg.errors import DataLeakError


@dataclass
class Episode:
    sample: Sample
    target_label: str
    variant: str
    split: str

    @property
    def image(self) -> np.ndarray:
        return self.sample.image

    @property
    def mask(self) -> np.ndarray:
        return self.sample.mask(self.target_label)


class EpisodeStream:
    """Iterable of episodes. Training streams never end; test streams do.

    Every emitted episode is checked against the partition, so a stream can
    not hand out a label from the wrong split.
    """

    def __init__(self, store: SampleStore, partition: PartitionSpec, split: str, variant: str,
                 seed: int, labels=None, limit: int | None = None):
        allowed = set(partition.split_labels(split))
        if labels is not None:
            bad = set(labels) - allowed
            if bad:
                raise DataLeakError(f"labels {sorted(bad)} are not in the {split} split of partition {partition.index}")
            allowed = set(labels)
        self.store, self.partition, self.split = store, partition, split
        self.variant, self.seed, self.limit = variant, seed, limit
        self.allowed = allowed
        self.forbidden_labels = frozenset(partition.split_labels("test" if split == "train" else "train"))
        self._eligible = [(s, sorted(s.labels & allowed)) for s in store]
        self._eligible = [(s, ls) for s, ls in self._eligible if ls]

    def __len__(self):
        if self.split == "train":
            raise TypeError("training streams are unbounded")
        n = sum(len(ls) for _, ls in self._eligible)
        return n if self.limit is None else min(n, self.limit)

    def _emit(self, sample, label) -> Episode:
        if label not in self.allowed or label in self.forbidden_labels:
            raise DataLeakError(f"episode target {label!r} leaks across the {self.split} split")
        return Episode(sample, label, self.variant, self.split)

    def __iter__(self):
        rng = np.random.default_rng(self.seed)
        if self.split == "train":
            if not self._eligible:
                raise DataLeakError("no image carries a training label")
            emitted = 0
            while self.limit is None or emitted < self.limit:
                sample, labels = self._eligible[rng.integers(len(self._eligible))]
                yield self._emit(sample, labels[rng.integers(len(labels))])
                emitted += 1
        else:
            pairs = [(s, lab) for s, ls in self._eligible for lab in ls]
            order = rng.permutation(len(pairs))
            if self.limit is not None:
                order = order[: self.limit]
            for i in order:
                yield self._emit(*pairs[i])


def sample_episodes(store: SampleStore, partition: PartitionSpec, split: str, variant: str = "sem-2c-neg",
                    seed: int = 0, labels=None, limit: int | None = None) -> EpisodeStream:
    """Training: uniform image, then uniform present training label, forever.
    Test: every (image, present test label) pair once, in seeded order.
    """
    return EpisodeStream(store, partition, split, variant, seed, labels, limit)
