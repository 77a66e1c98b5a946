"""Likelihood image -> four-way GrabCut seed annotation."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class Code(IntEnum):
    SB = 0  # sure background
    PB = 1  # probable background
    PF = 2  # probable foreground
    SF = 3  # sure foreground


# grey levels for the debug PNG
PNG_LEVELS = {Code.SB: 0, Code.PB: 85, Code.PF: 170, Code.SF: 255}


@dataclass(frozen=True)
class GrabCutParams:
    t_fg: float = 0.7
    t_unk: float = 0.5
    t_bg: float = 0.15
    iterations: int = 5
    gmm_components: int = 5
    gamma: float = 50.0
    fallback_fraction: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.t_bg < self.t_unk < self.t_fg <= 1.0:
            raise ValueError(f"need 0 <= t_bg < t_unk < t_fg <= 1, got {self.t_bg}, {self.t_unk}, {self.t_fg}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.gmm_components < 1:
            raise ValueError("gmm_components must be >= 1")


@dataclass
class AnnotationImage:
    codes: np.ndarray  # h x w uint8 of Code values
    degenerate: bool = False

    @property
    def shape(self):
        return self.codes.shape

    def to_png_levels(self) -> np.ndarray:
        lut = np.array([PNG_LEVELS[c] for c in Code], dtype=np.uint8)
        return lut[self.codes]


def annotate_from_likelihood(p, params: GrabCutParams = GrabCutParams()) -> AnnotationImage:
    """Code each pixel relative to the image's own likelihood range.

    With ``d = p_max - p_min``, the first matching rule wins:
    SB if ``P <= p_min + t_bg*d``, PB if ``P < p_min + t_unk*d``,
    PF if ``P < p_min + t_fg*d``, otherwise SF. A flat image (``d == 0``)
    is all SB and flagged degenerate.
    """
    p = np.asarray(p, dtype=np.float64)
    p_min, p_max = p.min(), p.max()
    delta = p_max - p_min
    if delta == 0:
        return AnnotationImage(np.full(p.shape, Code.SB, dtype=np.uint8), degenerate=True)
    codes = np.full(p.shape, Code.SF, dtype=np.uint8)
    codes[p < p_min + params.t_fg * delta] = Code.PF
    codes[p < p_min + params.t_unk * delta] = Code.PB
    codes[p <= p_min + params.t_bg * delta] = Code.SB
    return AnnotationImage(codes)


def threshold_baseline(p, t: float = 0.5) -> np.ndarray:
    """Static threshold: 1 where ``P >= t``."""
    if not 0.0 < t < 1.0:
        raise ValueError("threshold must lie strictly between 0 and 1")
    return (np.asarray(p) >= t).astype(np.uint8)
