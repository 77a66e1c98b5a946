"""Likelihood image -> seed annotation -> binary mask."""

from lexseg.postprocess.annotation import (
    AnnotationImage,
    Code,
    GrabCutParams,
    annotate_from_likelihood,
    threshold_baseline,
)
from lexseg.postprocess.grabcut import (
    ColorGMM,
    GrabCutResult,
    grabcut_refine,
    grid_graph_cut,
    labelling_energy,
    promote_sure_foreground,
    smoothness_weights,
)
from lexseg.postprocess.io import read_mask_png, write_annotation_png, write_mask_png

__all__ = [
    "AnnotationImage",
    "Code",
    "ColorGMM",
    "GrabCutParams",
    "GrabCutResult",
    "annotate_from_likelihood",
    "grabcut_refine",
    "grid_graph_cut",
    "labelling_energy",
    "promote_sure_foreground",
    "read_mask_png",
    "smoothness_weights",
    "threshold_baseline",
    "write_annotation_png",
    "write_mask_png",
]
