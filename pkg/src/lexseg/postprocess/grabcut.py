"""Iterative GMM + graph-cut foreground extraction seeded by an annotation.

Follows the usual GrabCut formulation: five full-covariance colour
components per side, contrast-sensitive 8-neighbour smoothness with
``gamma = 50`` and ``beta = 1 / (2 <|z_m - z_n|^2>)``, and hard terminal
links for the sure-background / sure-foreground seeds. The s-t cut itself
is delegated to PyMaxflow (Boykov-Kolmogorov).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import maxflow
import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.special import logsumexp

from lexseg.errors import LexsegWarning, ShapeError
from lexseg.postprocess.annotation import AnnotationImage, Code, GrabCutParams

# offsets (dy, dx) covering each undirected 8-neighbour edge exactly once
NEIGHBOUR_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))
COV_EPS = 1e-2


def _structure(dy: int, dx: int) -> np.ndarray:
    s = np.zeros((3, 3))
    s[1 + dy, 1 + dx] = 1
    return s


def grid_graph_cut(cost_fg, cost_bg, pairwise) -> tuple[np.ndarray, float]:
    """Minimise a binary energy on an image grid.

    ``E(L) = sum_i [L_i=1] cost_fg[i] + [L_i=0] cost_bg[i]
           + sum_{(i,j)} w_ij [L_i != L_j]``

    ``pairwise`` maps an offset ``(dy, dx)`` to an ``h x w`` array whose
    entry ``[y, x]`` is the weight of the edge between ``(y, x)`` and
    ``(y + dy, x + dx)``; entries pointing outside the grid are ignored.
    Weights must be non-negative. Returns the labelling (1 = foreground)
    and its energy.
    """
    cost_fg = np.asarray(cost_fg, dtype=np.float64)
    cost_bg = np.asarray(cost_bg, dtype=np.float64)
    if cost_fg.shape != cost_bg.shape or cost_fg.ndim != 2:
        raise ShapeError("unary cost arrays must be 2-D and equal in shape")
    h, w = cost_fg.shape
    g = maxflow.Graph[float]()
    nodes = g.add_grid_nodes((h, w))
    for (dy, dx), weights in pairwise.items():
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (h, w):
            raise ShapeError(f"pairwise weights for {(dy, dx)} must be {(h, w)}")
        if (weights < 0).any():
            raise ValueError("pairwise weights must be non-negative")
        g.add_grid_edges(nodes, weights=weights, structure=_structure(dy, dx), symmetric=True)
    # shifting both terminal costs by the same amount leaves the argmin unchanged
    base = np.minimum(cost_fg, cost_bg)
    g.add_grid_tedges(nodes, cost_bg - base, cost_fg - base)
    g.maxflow()
    labels = (~g.get_grid_segments(nodes)).astype(np.uint8)
    return labels, labelling_energy(labels, cost_fg, cost_bg, pairwise)


def labelling_energy(labels, cost_fg, cost_bg, pairwise) -> float:
    labels = np.asarray(labels).astype(bool)
    h, w = labels.shape
    energy = float(np.where(labels, cost_fg, cost_bg).sum())
    for (dy, dx), weights in pairwise.items():
        weights = np.asarray(weights, dtype=np.float64)
        ys = slice(max(0, -dy), h - max(0, dy))
        xs = slice(max(0, -dx), w - max(0, dx))
        ys2 = slice(max(0, dy), h + min(0, dy))
        xs2 = slice(max(0, dx), w + min(0, dx))
        cut = labels[ys, xs] != labels[ys2, xs2]
        energy += float((weights[ys, xs] * cut).sum())
    return energy


class ColorGMM:
    """Full-covariance Gaussian mixture over RGB values, fit by hard assignment."""

    def __init__(self, n_components: int = 5):
        self.n_components = n_components
        self.weights = self.means = self.covs = None

    def init_kmeans(self, pixels, seed: int = 0) -> np.ndarray:
        pixels = np.asarray(pixels, dtype=np.float64)
        k = min(self.n_components, len(np.unique(pixels, axis=0)))
        if k <= 1:
            labels = np.zeros(len(pixels), dtype=int)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                _, labels = kmeans2(pixels, k, iter=10, minit="++", seed=np.random.default_rng(seed))
        self.learn(pixels, labels)
        return labels

    def learn(self, pixels, labels) -> None:
        weights, means, covs = [], [], []
        n = len(pixels)
        for c in np.unique(labels):
            sel = pixels[labels == c]
            if len(sel) == 0:
                continue
            mu = sel.mean(axis=0)
            diff = sel - mu
            cov = diff.T @ diff / len(sel) + COV_EPS * np.eye(pixels.shape[1])
            weights.append(len(sel) / n)
            means.append(mu)
            covs.append(cov)
        self.weights = np.array(weights)
        self.means = np.array(means)
        self.covs = np.array(covs)

    def component_log_density(self, pixels) -> np.ndarray:
        """``log(pi_k N(x | mu_k, Sigma_k))`` for every pixel and component."""
        pixels = np.asarray(pixels, dtype=np.float64)
        d = pixels.shape[1]
        out = np.empty((len(pixels), len(self.weights)))
        for k, (pi, mu, cov) in enumerate(zip(self.weights, self.means, self.covs)):
            chol = np.linalg.cholesky(cov)
            z = np.linalg.solve(chol, (pixels - mu).T)
            maha = (z**2).sum(axis=0)
            logdet = 2 * np.log(np.diag(chol)).sum()
            out[:, k] = np.log(pi) - 0.5 * (maha + logdet + d * np.log(2 * np.pi))
        return out

    def log_density(self, pixels) -> np.ndarray:
        return logsumexp(self.component_log_density(pixels), axis=1)

    def assign(self, pixels) -> np.ndarray:
        return self.component_log_density(pixels).argmax(axis=1)


def smoothness_weights(image, gamma: float = 50.0) -> dict:
    """Contrast-sensitive n-link weights ``gamma / dist * exp(-beta |dz|^2)``."""
    img = np.asarray(image, dtype=np.float64)
    h, w, _ = img.shape
    sq = {}
    total, count = 0.0, 0
    for dy, dx in NEIGHBOUR_OFFSETS:
        diff = np.zeros((h, w))
        ys = slice(0, h - dy)
        xs = slice(max(0, -dx), w - max(0, dx))
        ys2 = slice(dy, h)
        xs2 = slice(max(0, dx), w + min(0, dx))
        d2 = ((img[ys, xs] - img[ys2, xs2]) ** 2).sum(axis=2)
        diff[ys, xs] = d2
        sq[(dy, dx)] = diff
        total += d2.sum()
        count += d2.size
    mean = total / count if count else 0.0
    beta = 0.0 if mean == 0 else 1.0 / (2.0 * mean)
    return {
        off: gamma / np.hypot(*off) * np.exp(-beta * d2) for off, d2 in sq.items()
    }


@dataclass
class GrabCutResult:
    mask: np.ndarray  # h x w uint8 in {0, 1}
    codes: np.ndarray  # annotation after refinement (PB/PF updated)
    flags: tuple[str, ...] = field(default=())
    iterations_run: int = 0


def promote_sure_foreground(annotation: AnnotationImage, likelihood, fraction: float = 0.01) -> AnnotationImage:
    """Turn the most likely ``fraction`` of PF pixels (at least one) into SF."""
    codes = annotation.codes.copy()
    pf = np.flatnonzero(codes.ravel() == Code.PF)
    if len(pf) == 0:
        return annotation
    n = max(1, int(np.ceil(fraction * len(pf))))
    scores = np.asarray(likelihood, dtype=np.float64).ravel()[pf]
    # stable order: highest likelihood first, then lowest pixel index
    top = pf[np.lexsort((pf, -scores))[:n]]
    codes.ravel()[top] = Code.SF
    return AnnotationImage(codes, annotation.degenerate)


def grabcut_refine(image, annotation: AnnotationImage, params: GrabCutParams = GrabCutParams(), likelihood=None) -> GrabCutResult:
    """Refine a seed annotation into a binary mask.

    SB pixels always end up 0 and SF pixels 1; only PB/PF pixels are
    relabelled. Runs exactly ``params.iterations`` rounds unless one side
    runs out of pixels. If there is no SF pixel but some PF, and
    ``likelihood`` is given, the top ``fallback_fraction`` of PF pixels are
    promoted to SF first.
    """
    img = np.asarray(image)
    if img.dtype == np.uint8:
        img = img.astype(np.float64)
    else:
        img = np.asarray(img, dtype=np.float64) * (255.0 if img.max() <= 1.0 else 1.0)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeError(f"expected h x w x 3 image, got {img.shape}")
    if img.shape[:2] != annotation.shape:
        raise ShapeError(f"image {img.shape[:2]} and annotation {annotation.shape} differ in size")

    flags = []
    codes = annotation.codes
    if not (codes == Code.SF).any() and (codes == Code.PF).any():
        flags.append("no_sure_foreground")
        if likelihood is not None:
            annotation = promote_sure_foreground(annotation, likelihood, params.fallback_fraction)
            codes = annotation.codes
            flags.append("sf_fallback")
    codes = codes.copy()
    sure_fg, sure_bg = codes == Code.SF, codes == Code.SB
    fg = codes >= Code.PF

    if not fg.any():
        warnings.warn("annotation has no foreground seeds; returning an empty mask", LexsegWarning, stacklevel=2)
        return GrabCutResult(np.zeros(codes.shape, np.uint8), codes, tuple(flags + ["empty_foreground"]))
    if fg.all():
        return GrabCutResult(np.ones(codes.shape, np.uint8), codes, tuple(flags + ["empty_background"]))

    h, w = codes.shape
    pixels = img.reshape(-1, 3)
    pairwise = smoothness_weights(img, params.gamma)
    hard = 9.0 * params.gamma

    fg_gmm, bg_gmm = ColorGMM(params.gmm_components), ColorGMM(params.gmm_components)
    fg_gmm.init_kmeans(pixels[fg.ravel()])
    bg_gmm.init_kmeans(pixels[~fg.ravel()])
    done = 0
    for _ in range(params.iterations):
        fsel, bsel = fg.ravel(), ~fg.ravel()
        if not fsel.any() or not bsel.any():
            flags.append("collapsed")
            break
        fg_gmm.learn(pixels[fsel], fg_gmm.assign(pixels[fsel]))
        bg_gmm.learn(pixels[bsel], bg_gmm.assign(pixels[bsel]))
        cost_fg = -fg_gmm.log_density(pixels).reshape(h, w)
        cost_bg = -bg_gmm.log_density(pixels).reshape(h, w)
        cost_fg[sure_fg], cost_bg[sure_fg] = 0.0, hard
        cost_fg[sure_bg], cost_bg[sure_bg] = hard, 0.0
        labels, _ = grid_graph_cut(cost_fg, cost_bg, pairwise)
        fg = labels.astype(bool) | sure_fg
        fg &= ~sure_bg
        done += 1

    unknown = ~(sure_fg | sure_bg)
    codes[unknown & fg] = Code.PF
    codes[unknown & ~fg] = Code.PB
    return GrabCutResult(fg.astype(np.uint8), codes, tuple(flags), done)
