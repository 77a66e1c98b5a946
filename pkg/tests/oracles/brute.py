"""Slow, obviously-correct reference implementations."""

import itertools

import numpy as np


def annotate_pixelwise(p, t_fg=0.7, t_unk=0.5, t_bg=0.15):
    """Per-pixel four-way coding, written as the rule reads."""
    p = np.asarray(p, dtype=np.float64)
    lo, hi = float(p.min()), float(p.max())
    d = hi - lo
    out = np.zeros(p.shape, dtype=np.uint8)
    for idx in np.ndindex(p.shape):
        v = float(p[idx])
        if d == 0 or v <= lo + t_bg * d:
            out[idx] = 0
        elif v < lo + t_unk * d:
            out[idx] = 1
        elif v < lo + t_fg * d:
            out[idx] = 2
        else:
            out[idx] = 3
    return out


def grid_edges(h, w, pairwise):
    for (dy, dx), weights in pairwise.items():
        for y in range(h):
            for x in range(w):
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w:
                    yield (y, x), (yy, xx), float(weights[y, x])


def min_energy_exhaustive(cost_fg, cost_bg, pairwise):
    """Minimum of the binary grid energy over all 2**(h*w) labellings."""
    h, w = cost_fg.shape
    edges = list(grid_edges(h, w, pairwise))
    best = np.inf
    for bits in itertools.product((0, 1), repeat=h * w):
        lab = np.array(bits).reshape(h, w)
        e = float(np.where(lab == 1, cost_fg, cost_bg).sum())
        for a, b, wt in edges:
            if lab[a] != lab[b]:
                e += wt
        best = min(best, e)
    return best


def min_energy_enumerated(cost_fg, cost_bg, pairwise, chunk=1 << 14):
    """Same minimum as :func:`min_energy_exhaustive`, enumerated in numpy chunks."""
    h, w = cost_fg.shape
    n = h * w
    edges = list(grid_edges(h, w, pairwise))
    ia = np.array([a[0] * w + a[1] for a, _, _ in edges], dtype=np.int64)
    ib = np.array([b[0] * w + b[1] for _, b, _ in edges], dtype=np.int64)
    wt = np.array([x for _, _, x in edges], dtype=np.float64)
    fg, bg = cost_fg.ravel(), cost_bg.ravel()
    shifts = np.arange(n, dtype=np.int64)
    best = np.inf
    for start in range(0, 1 << n, chunk):
        codes = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        lab = (codes[:, None] >> shifts) & 1
        e = np.where(lab == 1, fg, bg).sum(axis=1)
        if len(wt):
            e = e + ((lab[:, ia] != lab[:, ib]) * wt).sum(axis=1)
        best = min(best, float(e.min()))
    return best
