"""Run variants over partitions and collect metrics reports."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from lexseg.dataset.episodes import sample_episodes
from lexseg.errors import ResourceError
from lexseg.evaluation.metrics import per_class_miou
from lexseg.evaluation.report import MetricsReport, render_overlay
from lexseg.pipeline import TrainingExamples, parse_variant, segment
from lexseg.postprocess import GrabCutParams
from lexseg.segnet.model import ModelConfig, build_model
from lexseg.segnet.train import TrainHyper, load_checkpoint, train


def default_workers() -> int:
    return os.cpu_count() or 1


def evaluate_partition(model, store, partition, builder, variant, params: GrabCutParams = GrabCutParams(),
                       seed: int = 0, workers: int | None = None, limit: int | None = None, overlay_dir=None):
    """Segment every test episode of ``partition`` and score it per class."""
    variant = parse_variant(variant)
    episodes = list(sample_episodes(store, partition, "test", variant.tag, seed, limit=limit))

    def run(ep):
        out = segment(ep.image, ep.target_label, model, builder, variant, params,
                      gt_mask=ep.mask, key=ep.sample.image_id)
        return ep, out.mask

    workers = workers or default_workers()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            outputs = list(pool.map(run, episodes))
    else:
        outputs = [run(ep) for ep in episodes]
    if overlay_dir is not None:
        for ep, mask in outputs:
            render_overlay(ep.image, ep.mask, mask,
                           Path(overlay_dir) / f"{ep.sample.image_id}_{ep.target_label}.png")
    return per_class_miou(((ep.target_label, mask, ep.mask) for ep, mask in outputs), partition)


@dataclass
class AblationSetup:
    train_store: object  # one store, or a dict of partition index -> store
    test_store: object
    partitions: list
    builder: object
    model_config: ModelConfig = field(default_factory=ModelConfig)
    hyper: TrainHyper = field(default_factory=TrainHyper)
    params: GrabCutParams = field(default_factory=GrabCutParams)
    checkpoints: dict = field(default_factory=dict)  # (variant tag, partition index) -> path
    train_missing: bool = False
    seed: int = 0
    workers: int | None = None
    test_limit: int | None = None


def train_variant_model(setup: AblationSetup, variant, partition):
    """Fresh model for ``variant`` trained on the partition's training labels."""
    variant = parse_variant(variant)
    config = replace(setup.model_config, input_channels=variant.channels, seed=setup.seed)
    model = build_model(config)
    hyper = replace(setup.hyper, seed=setup.seed, variant=variant.tag)
    store = setup.train_store
    if isinstance(store, dict):
        store = store[partition.index]
    stream = sample_episodes(store, partition, "train", variant.tag, setup.seed)
    state = train(model, TrainingExamples(stream, setup.builder, variant), hyper.steps, hyper)
    return model, state


def run_ablation(variants, setup: AblationSetup) -> dict:
    """One :class:`MetricsReport` per variant.

    Models come from ``setup.checkpoints`` or, with ``train_missing``, are
    trained on the spot. Variants that share weights (NO-GRABCUT and
    SEM-2-C-NEG) share the trained model.
    """
    models = {}
    reports = {}
    for name in variants:
        variant = parse_variant(name)
        report = MetricsReport(variant.tag, metadata={
            "seed": setup.seed, "steps": setup.hyper.steps, "backbone": setup.model_config.backbone,
        })
        for part in setup.partitions:
            key = (variant.model_tag, part.index)
            if key not in models:
                path = setup.checkpoints.get((variant.tag, part.index)) or setup.checkpoints.get(key)
                if path is not None:
                    models[key] = load_checkpoint(path)[0]
                elif setup.train_missing:
                    models[key] = train_variant_model(setup, variant.model_tag, part)[0]
                else:
                    raise ResourceError(f"no checkpoint for variant {variant.tag} on partition {part.index}")
            report.add(evaluate_partition(models[key], setup.test_store, part, setup.builder, variant,
                                          setup.params, setup.seed, setup.workers, setup.test_limit))
        reports[variant.tag] = report
    return reports
