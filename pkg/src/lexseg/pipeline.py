"""End-to-end wiring: proxies -> attention channels -> likelihood -> mask.

Each ablation variant fixes which attention channels accompany the RGB
image:

==============  ========  =============================================
variant         channels  extra channels
==============  ========  =============================================
SEM-0-C-NONE    3         none
SEM-1-C-RAND    4         map from 5 random vocabulary labels
SEM-1-C-GT      4         positive proxy map
SEM-2-C-RAND    5         positive map, random-label map
SEM-2-C-MEAN    5         positive map, map of the classifier's top 5
SEM-2-C-NEG     5         positive map, negative proxy map
ORACLE          5         ground-truth mask, negative proxy map
NO-GRABCUT      5         as SEM-2-C-NEG, likelihood thresholded at 0.5
==============  ========  =============================================
"""

from __future__ import annotations

import logging
import threading
import zlib
from dataclasses import dataclass, field

import numpy as np

from lexseg.dataset.partitions import label_text
from lexseg.errors import ConfigurationError, DataLeakError, ShapeError
from lexseg.postprocess import (
    AnnotationImage,
    GrabCutParams,
    annotate_from_likelihood,
    grabcut_refine,
    threshold_baseline,
)
from lexseg.saliency import image_digest, saliency_for_labels
from lexseg.segnet.model import predict_likelihood
from lexseg.segnet.train import TrainExample
from lexseg.semantics.proxies import DEFAULT_K, ProxyLabelSet, build_proxy_set

log = logging.getLogger("lexseg")

RANDOM_LABELS = 5
TOP_LABELS = 5


@dataclass(frozen=True)
class VariantSpec:
    tag: str
    channels: int
    first: str | None  # source of channel 4
    second: str | None  # source of channel 5
    grabcut: bool = True
    trains_as: str | None = None  # shares weights with another variant

    @property
    def cli_name(self) -> str:
        return self.tag.lower().replace("-c-", "c-")

    @property
    def model_tag(self) -> str:
        return self.trains_as or self.tag


VARIANTS = {
    v.tag: v
    for v in (
        VariantSpec("SEM-0-C-NONE", 3, None, None),
        VariantSpec("SEM-1-C-RAND", 4, "random", None),
        VariantSpec("SEM-1-C-GT", 4, "positive", None),
        VariantSpec("SEM-2-C-RAND", 5, "positive", "random"),
        VariantSpec("SEM-2-C-MEAN", 5, "positive", "top"),
        VariantSpec("SEM-2-C-NEG", 5, "positive", "negative"),
        VariantSpec("ORACLE", 5, "truth", "negative"),
        VariantSpec("NO-GRABCUT", 5, "positive", "negative", grabcut=False, trains_as="SEM-2-C-NEG"),
    )
}


def _squash(name: str) -> str:
    return "".join(ch for ch in name.upper() if ch.isalnum())


def parse_variant(name) -> VariantSpec:
    """Accepts ``SEM-2-C-NEG``, ``sem-2c-neg``, ``sem_2c_neg`` and so on."""
    if isinstance(name, VariantSpec):
        return name
    key = _squash(str(name))
    for v in VARIANTS.values():
        if _squash(v.tag) == key:
            return v
    raise ConfigurationError(f"unknown variant {name!r}; choose from {', '.join(VARIANTS)}")


def normalize_rgb(image, mean, std) -> np.ndarray:
    rgb = np.asarray(image)
    rgb = rgb.astype(np.float64) / 255.0 if rgb.dtype == np.uint8 else rgb.astype(np.float64)
    chw = rgb.transpose(2, 0, 1)
    return (chw - np.asarray(mean)[:, None, None]) / np.asarray(std)[:, None, None]


def assemble_input(image, maps, mean=(0.5, 0.5, 0.5), std=(0.5, 0.5, 0.5)) -> np.ndarray:
    """Normalized RGB followed by the attention maps, as a float32 ``C x h x w`` array."""
    rgb = normalize_rgb(image, mean, std)
    h, w = rgb.shape[1:]
    chans = [rgb]
    for m in maps:
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (h, w):
            raise ShapeError(f"attention map {m.shape} does not match image {(h, w)}")
        if m.min() < 0 or m.max() > 1:
            raise ValueError("attention maps must lie in [0, 1]")
        chans.append(m[None])
    return np.concatenate(chans).astype(np.float32)


@dataclass
class AttentionInput:
    array: np.ndarray
    variant: VariantSpec
    proxies: ProxyLabelSet | None = None
    maps: dict = field(default_factory=dict)


class AttentionBuilder:
    """Produces the model input for (image, target label, variant).

    Proxy sets and saliency maps are memoized per image key and target, so
    repeated episodes over the same image cost one saliency pass. Safe to
    share between threads.
    """

    def __init__(self, classifier, ontology=None, table=None, mapper: str = "wordnet", k: int = DEFAULT_K,
                 seed: int = 0, cache=None, memoize: bool = True, mean=None, std=None):
        self.classifier = classifier
        self.vocab = classifier.vocabulary
        self.ontology, self.table, self.mapper, self.k = ontology, table, mapper, k
        self.seed, self.cache = seed, cache
        self.mean = tuple(mean if mean is not None else classifier.spec.mean)
        self.std = tuple(std if std is not None else classifier.spec.std)
        self._memo = {} if memoize else None
        self._lock = threading.Lock()

    def _remember(self, key, fn):
        if self._memo is None:
            return fn()
        with self._lock:
            if key in self._memo:
                return self._memo[key]
        value = fn()
        with self._lock:
            self._memo.setdefault(key, value)
        return value

    def _scores(self, image, key):
        return self._remember((key, "scores"), lambda: self.classifier.classify(image))

    def proxies(self, image, target: str, key=None) -> ProxyLabelSet:
        key = key or image_digest(image)
        return self._remember(
            (key, target, "proxies"),
            lambda: build_proxy_set(label_text(target), image, self.mapper, self.vocab, self.classifier,
                                    ontology=self.ontology, table=self.table, k=self.k),
        )

    def random_labels(self, key: str, target: str) -> list[int]:
        seed = [self.seed, zlib.crc32(f"{key}|{target}".encode())]
        labels = sorted(int(i) for i in np.random.default_rng(seed).choice(len(self.vocab), RANDOM_LABELS, replace=False))
        log.debug("random labels for %s/%s (seed %s): %s", key, target, seed, labels)
        return labels

    def _map(self, image, labels, polarity, key):
        labels = tuple(labels)
        return self._remember(
            (key, labels, polarity),
            lambda: saliency_for_labels(image, labels, self.classifier, polarity, self.cache).values,
        )

    def channel(self, source: str, image, target: str, key: str, gt_mask=None) -> np.ndarray:
        if source == "truth":
            if gt_mask is None:
                raise ConfigurationError("ORACLE needs the ground-truth mask")
            return np.asarray(gt_mask, dtype=np.float64)
        if source == "positive":
            return self._map(image, self.proxies(image, target, key).positive_indices, "positive", key)
        if source == "negative":
            return self._map(image, self.proxies(image, target, key).negative_indices, "negative", key)
        if source == "random":
            return self._map(image, self.random_labels(key, target), "positive", key)
        if source == "top":
            scores = self._scores(image, key)
            top = sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:TOP_LABELS]
            return self._map(image, top, "negative", key)
        raise ConfigurationError(f"unknown channel source {source!r}")

    def build(self, image, target: str, variant, gt_mask=None, key=None) -> AttentionInput:
        variant = parse_variant(variant)
        key = key or image_digest(image)
        maps = {}
        for slot, source in (("first", variant.first), ("second", variant.second)):
            if source is not None:
                maps[slot] = self.channel(source, image, target, key, gt_mask)
        arr = assemble_input(image, list(maps.values()), self.mean, self.std)
        if arr.shape[0] != variant.channels:
            raise ShapeError(f"{variant.tag} expects {variant.channels} channels, assembled {arr.shape[0]}")
        needs_proxies = "positive" in (variant.first, variant.second) or "negative" in (variant.first, variant.second)
        proxies = self.proxies(image, target, key) if needs_proxies else None
        return AttentionInput(arr, variant, proxies, maps)


@dataclass
class SegmentOutput:
    mask: np.ndarray
    likelihood: np.ndarray
    annotation: AnnotationImage | None
    attention: AttentionInput
    flags: tuple = ()


def segment(image, target: str, model, builder: AttentionBuilder, variant="SEM-2-C-NEG",
            params: GrabCutParams = GrabCutParams(), gt_mask=None, key=None, grabcut: bool | None = None) -> SegmentOutput:
    """Binary mask of ``target`` in ``image``.

    ``grabcut=False`` swaps GrabCut for the 0.5 threshold; by default the
    variant decides.
    """
    variant = parse_variant(variant)
    att = builder.build(image, target, variant, gt_mask, key)
    if model.config.input_channels != variant.channels:
        raise ShapeError(f"model takes {model.config.input_channels} channels but {variant.tag} supplies {variant.channels}")
    p = predict_likelihood(model, att.array)
    use_grabcut = variant.grabcut if grabcut is None else grabcut
    if not use_grabcut:
        return SegmentOutput(threshold_baseline(p, 0.5), p, None, att)
    annotation = annotate_from_likelihood(p, params)
    result = grabcut_refine(image, annotation, params, likelihood=p)
    flags = result.flags + (("degenerate_likelihood",) if annotation.degenerate else ())
    return SegmentOutput(result.mask, p, annotation, att, flags)


class TrainingExamples:
    """Turns a training episode stream into :class:`TrainExample` items."""

    def __init__(self, episodes, builder: AttentionBuilder, variant):
        self.episodes = episodes
        self.builder = builder
        self.variant = parse_variant(variant)
        self.forbidden_labels = getattr(episodes, "forbidden_labels", frozenset())

    def __iter__(self):
        for ep in self.episodes:
            if ep.target_label in self.forbidden_labels:
                raise DataLeakError(f"training episode carries held-out label {ep.target_label!r}")
            mask = ep.mask
            att = self.builder.build(ep.image, ep.target_label, self.variant, mask, key=ep.sample.image_id)
            yield TrainExample(att.array, mask, ep.target_label)
