"""Segmentation metrics, ablation runs and reports."""

from lexseg.evaluation.ablation import AblationSetup, evaluate_partition, run_ablation, train_variant_model
from lexseg.evaluation.mappers import MapperRow, compare_mappers, format_comparison, missing_labels
from lexseg.evaluation.metrics import PartitionScores, binary_iou, confusion, iou_from_counts, per_class_miou
from lexseg.evaluation.references import REFERENCE_ROWS, WORD2VEC_REFERENCE, WORDNET_REFERENCE, reference_row
from lexseg.evaluation.report import MetricsReport, format_summary, render_overlay

__all__ = [
    "AblationSetup",
    "MapperRow",
    "MetricsReport",
    "PartitionScores",
    "REFERENCE_ROWS",
    "WORD2VEC_REFERENCE",
    "WORDNET_REFERENCE",
    "binary_iou",
    "compare_mappers",
    "confusion",
    "evaluate_partition",
    "format_comparison",
    "format_summary",
    "iou_from_counts",
    "missing_labels",
    "per_class_miou",
    "reference_row",
    "render_overlay",
    "run_ablation",
    "train_variant_model",
]
