"""Canonical 231-element image feature vector.

Layout: 72 co-occurrence features (channel R,G,B x orientation
0,45,90,135 x contrast, dissimilarity, homogeneity, energy, asm,
correlation), then 132 run-length features (channel x orientation x
sre, lre, gln, rln, rp, lgre, hgre, srlge, srhge, lrlge, lrhge), then
27 color statistics (R,G,B,H,S,V,L,a,b x mean, median, sd).
"""

from dataclasses import dataclass

import numpy as np

from . import color, texture
from .errors import EmptyInputError, MixedSampleIdsError

CHANNELS = ("R", "G", "B")
GLCM_FEATURES = ("contrast", "dissimilarity", "homogeneity", "energy", "asm", "correlation")
GLRLM_FEATURES = ("sre", "lre", "gln", "rln", "rp", "lgre", "hgre", "srlge", "srhge", "lrlge", "lrhge")
COLOR_CHANNELS = ("R", "G", "B", "H", "S", "V", "L", "a", "b")
COLOR_STATS = ("mean", "median", "sd")


def _build_names():
    names = []
    for ch in CHANNELS:
        for ang in texture.ORIENTATIONS:
            for feat in GLCM_FEATURES:
                names.append(f"glcm_{ch}_{ang}_{feat}")
    for ch in CHANNELS:
        for ang in texture.ORIENTATIONS:
            for feat in GLRLM_FEATURES:
                names.append(f"glrlm_{ch}_{ang}_{feat}")
    for ch in COLOR_CHANNELS:
        for stat in COLOR_STATS:
            names.append(f"color_{ch}_{stat}")
    return tuple(names)


FEATURE_NAMES = _build_names()
N_FEATURES = len(FEATURE_NAMES)
GLCM_BLOCK = slice(0, 72)
GLRLM_BLOCK = slice(72, 204)
COLOR_BLOCK = slice(204, 231)


@dataclass
class ImageFeatureVector:
    """One sample's canonical feature vector."""

    sample_id: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have {N_FEATURES} entries")


def _validate_image(image):
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError("image must have shape (height, width, 3)")
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ValueError("image must be at least 2x2 pixels")
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("pixel values must lie in [0, 255]")
    return arr


def extract_features(image):
    """Compute the 231-element feature vector of an (H, W, 3) RGB image."""
    arr = _validate_image(image)
    n_pixels = arr.shape[0] * arr.shape[1]

    glcm_vals = []
    glrlm_vals = []
    for c in range(3):
        grid = texture.quantize_channel(arr[..., c])
        for ang in texture.ORIENTATIONS:
            glcm_vals.append(texture.glcm_features(texture.glcm_matrix(grid, ang)))
        for ang in texture.ORIENTATIONS:
            counts = texture.glrlm_matrix(grid, ang)
            glrlm_vals.append(texture.glrlm_features(counts, n_pixels))

    h, s, v = color.hsv_planes(arr)
    l, a, b = color.lab_planes(arr)
    planes = (
        arr[..., 0].astype(np.float64),
        arr[..., 1].astype(np.float64),
        arr[..., 2].astype(np.float64),
        h, s, v, l, a, b,
    )
    color_vals = [color.channel_stats(p) for p in planes]

    return np.concatenate(
        [np.concatenate(glcm_vals), np.concatenate(glrlm_vals), np.ravel(color_vals)]
    )


def aggregate_replicates(vectors):
    """Element-wise mean of replicate feature vectors for one sample."""
    if not vectors:
        raise EmptyInputError("no replicate vectors to aggregate")
    ids = {v.sample_id for v in vectors}
    if len(ids) != 1:
        raise MixedSampleIdsError(f"replicates mix sample ids: {sorted(ids)}")
    stacked = np.vstack([v.values for v in vectors])
    return ImageFeatureVector(vectors[0].sample_id, stacked.mean(axis=0))
