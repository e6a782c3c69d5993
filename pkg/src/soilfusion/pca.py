"""Principal component analysis and 0/1 dummy coding of categoricals."""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateInputError,
    TooFewSamplesError,
    UnknownCategoryError,
    ZeroVarianceColumnError,
)


@dataclass
class PcaResult:
    scores: np.ndarray          # rows x components
    loadings: np.ndarray        # variables x components
    eigenvalues: np.ndarray
    variance_explained: np.ndarray  # percentages, sums to 100


def pca(x, scale=False):
    """Centered (optionally unit-SD scaled) PCA via SVD.

    Components are ordered by decreasing variance; each loading column
    is oriented so its largest-magnitude entry is positive, making the
    decomposition deterministic.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 1:
        raise DegenerateInputError("input must be 2-D with at least one column")
    n, p = x.shape
    if n < 2:
        raise TooFewSamplesError("pca needs at least 2 rows")

    centered = x - x.mean(axis=0)
    if scale:
        sd = centered.std(axis=0, ddof=1)
        zero = np.flatnonzero(sd == 0.0)
        if zero.size:
            raise ZeroVarianceColumnError(
                f"cannot scale zero-variance column(s) {zero.tolist()}"
            )
        centered = centered / sd

    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    k = min(n - 1, p)
    s = s[:k]
    loadings = vt[:k].T
    eigenvalues = s**2 / (n - 1)
    total = eigenvalues.sum()
    if total == 0.0:
        raise DegenerateInputError("matrix has no variance")

    # Deterministic sign: flip columns whose largest-|.| entry is negative.
    anchor = np.argmax(np.abs(loadings), axis=0)
    signs = np.sign(loadings[anchor, np.arange(k)])
    signs[signs == 0] = 1.0
    loadings = loadings * signs

    scores = centered @ loadings
    return PcaResult(scores, loadings, eigenvalues, 100.0 * eigenvalues / total)


def filmer_pritchett_encode(values, categories, mode="dropFirst"):
    """0/1 dummy columns for a categorical column over a closed vocabulary.

    ``dropFirst`` omits the first category in canonical order (k-1
    columns); ``full`` emits one column per category.
    """
    if mode not in ("dropFirst", "full"):
        raise ValueError(f"unknown mode {mode!r}")
    categories = list(categories)
    index = {c: i for i, c in enumerate(categories)}
    emitted = categories[1:] if mode == "dropFirst" else categories
    columns = np.zeros((len(values), len(emitted)), dtype=np.float64)
    offset = 1 if mode == "dropFirst" else 0
    for row, value in enumerate(values):
        if value not in index:
            raise UnknownCategoryError(f"unknown category {value!r}")
        j = index[value] - offset
        if j >= 0:
            columns[row, j] = 1.0
    names = list(emitted)
    return columns, names
