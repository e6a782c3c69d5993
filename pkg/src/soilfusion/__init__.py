"""Soil fertility prediction from microscope images, auxiliary variables, and PXRF."""

__version__ = "0.1.0"

from .features import FEATURE_NAMES, ImageFeatureVector, aggregate_replicates, extract_features
from .forest import ForestParams, RegressionForest, predict, train_forest
from .fusion import FusionMatrix, SoilSample, assemble_matrix
from .pxrf import CorrectionFactorTable, apply_correction

__all__ = [
    "FEATURE_NAMES",
    "ImageFeatureVector",
    "aggregate_replicates",
    "extract_features",
    "ForestParams",
    "RegressionForest",
    "predict",
    "train_forest",
    "FusionMatrix",
    "SoilSample",
    "assemble_matrix",
    "CorrectionFactorTable",
    "apply_correction",
]
