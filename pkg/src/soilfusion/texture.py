"""Gray-level co-occurrence and run-length texture kernels.

Channels are quantized into 16 fixed equal-width bins over [0, 255] so
features are comparable across a whole corpus. Both matrix types are
computed at distance 1 in four orientations; offsets are expressed as
(delta_col, delta_row) with rows growing downward:

    0 deg -> (+1,  0)     45 deg -> (+1, -1)
   90 deg -> ( 0, -1)    135 deg -> (-1, -1)

Co-occurrence matrices are symmetrized by adding the transpose, then
normalized to sum 1. Gray levels are 1-based throughout, which keeps the
low-gray-level run emphases finite.
"""

import numpy as np

from .errors import DegenerateImageError

LEVELS = 16
ORIENTATIONS = (0, 45, 90, 135)

_OFFSETS = {0: (1, 0), 45: (1, -1), 90: (0, -1), 135: (-1, -1)}


def quantize_channel(channel):
    """Map a [0, 255] integer channel onto 1-based levels in [1, 16]."""
    arr = np.asarray(channel)
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError("channel values must lie in [0, 255]")
    return (arr.astype(np.int64) * LEVELS) // 256 + 1


def glcm_counts(grid, orientation):
    """Symmetrized integer pair counts for one orientation.

    Raises DegenerateImageError when the grid has no neighbor pair at
    distance 1 in the given orientation.
    """
    grid = np.asarray(grid, dtype=np.int64)
    if grid.ndim != 2:
        raise ValueError("grid must be 2-D")
    if orientation not in _OFFSETS:
        raise ValueError(f"unsupported orientation {orientation}")
    dc, dr = _OFFSETS[orientation]
    h, w = grid.shape
    r0, r1 = max(0, -dr), h - max(0, dr)
    c0, c1 = max(0, -dc), w - max(0, dc)
    if r1 <= r0 or c1 <= c0:
        raise DegenerateImageError(
            f"no neighbor pair at distance 1 for orientation {orientation}"
        )
    a = grid[r0:r1, c0:c1]
    b = grid[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
    pairs = (a.ravel() - 1) * LEVELS + (b.ravel() - 1)
    counts = np.bincount(pairs, minlength=LEVELS * LEVELS).reshape(LEVELS, LEVELS)
    return counts + counts.T


def glcm_matrix(grid, orientation):
    """Normalized symmetric co-occurrence matrix (entries sum to 1)."""
    counts = glcm_counts(grid, orientation)
    return counts / counts.sum()


def glcm_features(p):
    """Six scalar features of a normalized symmetric co-occurrence matrix.

    Returns (contrast, dissimilarity, homogeneity, energy, ASM,
    correlation); correlation is defined as 1 when a marginal variance
    vanishes (constant image).
    """
    p = np.asarray(p, dtype=np.float64)
    n = p.shape[0]
    i = np.arange(1, n + 1, dtype=np.float64)
    diff = i[:, None] - i[None, :]
    diff2 = diff * diff

    contrast = float((diff2 * p).sum())
    dissimilarity = float((np.abs(diff) * p).sum())
    homogeneity = float((p / (1.0 + diff2)).sum())
    asm = float((p * p).sum())
    energy = float(np.sqrt(asm))

    pi = p.sum(axis=1)
    pj = p.sum(axis=0)
    mu_i = float((i * pi).sum())
    mu_j = float((i * pj).sum())
    var_i = float(((i - mu_i) ** 2 * pi).sum())
    var_j = float(((i - mu_j) ** 2 * pj).sum())
    if var_i <= 0.0 or var_j <= 0.0:
        correlation = 1.0
    else:
        cov = float(((i[:, None] - mu_i) * (i[None, :] - mu_j) * p).sum())
        correlation = cov / np.sqrt(var_i * var_j)
    return np.array([contrast, dissimilarity, homogeneity, energy, asm, correlation])


def _run_length_lines(grid, orientation):
    """Stack the grid's lines for an orientation as rows of a -1 padded array."""
    grid = np.asarray(grid, dtype=np.int64)
    h, w = grid.shape
    if orientation == 0:
        return grid, w
    if orientation == 90:
        return grid.T, h
    # Shear rows so diagonals line up as columns, then read them as rows.
    sheared = np.full((h, w + h - 1), -1, dtype=np.int64)
    rows = np.arange(h)
    if orientation == 45:  # anti-diagonals: r + c constant
        starts = rows
    elif orientation == 135:  # main diagonals: r - c constant
        starts = h - 1 - rows
    else:
        raise ValueError(f"unsupported orientation {orientation}")
    cols = starts[:, None] + np.arange(w)[None, :]
    sheared[rows[:, None], cols] = grid
    return sheared.T, min(h, w)


def glrlm_matrix(grid, orientation):
    """Integer run-length counts indexed by (gray level, run length).

    Shape is (16, Lmax) where Lmax is the longest possible line for the
    orientation; matrix[g-1, l-1] counts maximal runs of level g with
    length l.
    """
    lines, max_len = _run_length_lines(grid, orientation)
    if lines.size == 0:
        raise DegenerateImageError("empty grid")
    # Sentinel column breaks runs between consecutive lines after ravel.
    padded = np.concatenate(
        [lines, np.full((lines.shape[0], 1), -1, dtype=np.int64)], axis=1
    ).ravel()
    change = np.flatnonzero(np.diff(padded) != 0)
    starts = np.concatenate([[0], change + 1])
    ends = np.concatenate([change, [padded.size - 1]])
    levels = padded[starts]
    lengths = ends - starts + 1
    keep = levels > 0
    counts = np.zeros((LEVELS, max_len), dtype=np.int64)
    np.add.at(counts, (levels[keep] - 1, lengths[keep] - 1), 1)
    return counts


def glrlm_features(counts, total_pixels):
    """Eleven run-emphasis features of an integer run-length matrix.

    Returns (SRE, LRE, GLN, RLN, RP, LGRE, HGRE, SRLGE, SRHGE, LRLGE,
    LRHGE) using 1-based gray levels and run lengths.
    """
    r = np.asarray(counts, dtype=np.float64)
    n_runs = r.sum()
    if n_runs <= 0:
        raise DegenerateImageError("run-length matrix holds no runs")
    g2 = (np.arange(1, r.shape[0] + 1, dtype=np.float64) ** 2)[:, None]
    l2 = (np.arange(1, r.shape[1] + 1, dtype=np.float64) ** 2)[None, :]

    sre = (r / l2).sum() / n_runs
    lre = (r * l2).sum() / n_runs
    gln = (r.sum(axis=1) ** 2).sum() / n_runs
    rln = (r.sum(axis=0) ** 2).sum() / n_runs
    rp = n_runs / float(total_pixels)
    lgre = (r / g2).sum() / n_runs
    hgre = (r * g2).sum() / n_runs
    srlge = (r / (g2 * l2)).sum() / n_runs
    srhge = (r * g2 / l2).sum() / n_runs
    lrlge = (r * l2 / g2).sum() / n_runs
    lrhge = (r * g2 * l2).sum() / n_runs
    return np.array([sre, lre, gln, rln, rp, lgre, hgre, srlge, srhge, lrlge, lrhge])
