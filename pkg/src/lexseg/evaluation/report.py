"""Metrics reports (TSV + JSON) and qualitative overlays."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from lexseg.evaluation.metrics import PartitionScores
from lexseg.evaluation.references import REFERENCE_ROWS


@dataclass
class MetricsReport:
    variant: str
    partitions: dict = field(default_factory=dict)  # index -> PartitionScores
    metadata: dict = field(default_factory=dict)
    references: dict = field(default_factory=lambda: dict(REFERENCE_ROWS))

    def add(self, scores: PartitionScores) -> None:
        self.partitions[scores.index] = scores

    @property
    def partition_miou(self) -> dict:
        return {i: s.miou for i, s in sorted(self.partitions.items())}

    @property
    def overall(self) -> float:
        """Mean of the partition mIOUs (not of the pooled classes)."""
        vals = list(self.partition_miou.values())
        return float(np.mean(vals)) if vals else float("nan")

    def rows(self):
        for i, s in sorted(self.partitions.items()):
            for c, iou in s.class_iou.items():
                yield {"variant": self.variant, "partition": i, "class": c, "iou": iou}

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "rows": list(self.rows()),
            "partition_miou": {str(i): v for i, v in self.partition_miou.items()},
            "overall_miou": self.overall,
            "metadata": self.metadata,
            "references": {k: list(v) for k, v in self.references.items()},
        }

    def to_tsv(self) -> str:
        lines = ["variant\tpartition\tclass\tiou"]
        lines += [f"{r['variant']}\t{r['partition']}\t{r['class']}\t{r['iou']:.6f}" for r in self.rows()]
        return "\n".join(lines) + "\n"

    def write(self, directory) -> tuple[Path, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        stem = self.variant.lower()
        tsv, js = d / f"{stem}.tsv", d / f"{stem}.json"
        tsv.write_text(self.to_tsv())
        js.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return tsv, js


def format_summary(reports) -> str:
    """Plain-text table: our variants (in percent), then the reference rows."""
    reports = list(reports)
    idx = sorted({i for r in reports for i in r.partitions})
    head = "row\t" + "\t".join(f"fold{i}" for i in idx) + "\tmean"
    lines = [head]
    for r in reports:
        cells = [f"{100 * r.partition_miou.get(i, float('nan')):.1f}" for i in idx]
        lines.append(f"{r.variant} (ours)\t" + "\t".join(cells) + f"\t{100 * r.overall:.1f}")
    for name, row in REFERENCE_ROWS.items():
        lines.append(f"{name} (reference)\t" + "\t".join("-" if v is None else f"{v}" for v in row[:4]) + f"\t{row[4]}")
    return "\n".join(lines) + "\n"


def _tint(image, mask, colour=(255, 0, 0), alpha=0.5) -> np.ndarray:
    out = np.asarray(image, dtype=np.float64).copy()
    m = np.asarray(mask).astype(bool)
    out[m] = (1 - alpha) * out[m] + alpha * np.asarray(colour, dtype=np.float64)
    return out.astype(np.uint8)


def render_overlay(image, gt, pred, path=None) -> np.ndarray:
    """Side-by-side image | ground truth | prediction, masks tinted over the image."""
    image = np.asarray(image)
    if image.dtype != np.uint8:
        image = np.clip(np.round(image * 255), 0, 255).astype(np.uint8)
    panel = np.concatenate([image, _tint(image, gt, (0, 200, 0)), _tint(image, pred, (220, 0, 0))], axis=1)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(panel).save(path)
    return panel
