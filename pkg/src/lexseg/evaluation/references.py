"""Published mIOU numbers kept as fixed constants for report rows."""

from __future__ import annotations

from types import MappingProxyType

# name -> (fold 0, fold 1, fold 2, fold 3, mean); None where only a mean was reported
REFERENCE_ROWS = MappingProxyType({
    "OSLSM 1-shot": (33.6, 55.3, 40.9, 33.5, 40.8),
    "coFCN 1-shot": (36.7, 50.6, 44.9, 32.3, 41.1),
    "SG 1-shot": (40.2, 58.4, 48.4, 38.4, 46.3),
    "OSLSM 5-shot": (35.9, 58.1, 42.7, 39.1, 43.9),
    "coFCN 5-shot": (37.5, 50.0, 44.1, 33.9, 41.4),
    "SG 5-shot": (41.9, 58.6, 48.6, 39.4, 47.1),
    "SEM-0-C-NONE": (39.6, 40.3, 37.4, 31.6, 37.2),
    "SEM-1-C-RAND": (31.2, 31.8, 41.8, 31.2, 34.0),
    "SEM-1-C-GT": (37.3, 42.8, 45.4, 43.3, 42.2),
    "SEM-2-C-RAND": (40.8, 57.9, 47.7, 38.5, 46.2),
    "SEM-2-C-MEAN": (43.1, 56.2, 47.12, 47.0, 48.4),
    "SEM-2-C-NEG": (48.7, 57.6, 48.9, 46.0, 50.3),
    "NO-GRABCUT": (None, None, None, None, 48.1),
    "ORACLE": (None, None, None, None, 95.0),
})

# Proxy labels a WordNet mapping should reach for each target (distractors omitted).
WORDNET_REFERENCE = MappingProxyType({
    "bottle": ("beer bottle", "pill bottle", "soda bottle", "water bottle"),
    "car": ("racer", "sports car", "streetcar", "freight car"),
    "dog": ("pug", "terrier", "shepherd", "tibetan terrier"),
    "chair": ("folding chair", "barber chair"),
    "cat": ("tabby cat", "tiger cat", "siamese cat"),
    "train": ("bullet train",),
    "sofa": ("studio couch",),
})

# Published word-vector neighbours per target, most similar first.
WORD2VEC_REFERENCE = MappingProxyType({
    "bottle": ("beer bottle", "bottle-screw", "pill bottle", "wine bottle", "soda bottle"),
    "car": ("car wheel", "racer", "sports car", "street car", "pickup truck", "fire truck"),
    "dog": ("terrier", "pit bull", "toy poodle", "wire-haired fox terrier"),
    "chair": ("folding chair", "barber chair", "desk", "toilet seat", "table lamp"),
    "cat": ("tabby cat", "fox terrier", "tiger cat", "toy terrier", "hamster"),
    "train": ("school bus", "freight car", "streetcar", "steam locomotive"),
    "sofa": ("folding chair", "pillow", "desk", "bookcase", "studio couch"),
})


def reference_row(name: str):
    return REFERENCE_ROWS[name]
