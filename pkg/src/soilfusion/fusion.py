"""Sample loading, predictor assembly, and split plans.

Four predictor configurations are supported: image features alone
(IFS, 231 columns), elemental data alone (PXRF, 19), image features
plus one-hot auxiliary variables (IFS_AVS, 245), and the full fusion
(IFS_AVS_PXRF, 264). Samples missing the requested target are dropped
before assembly; samples missing a required predictor block are an
error unless the caller filters them out first.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import pxrf
from .errors import (
    MissingBlockError,
    SchemaError,
    TooFewSamplesError,
    UnknownCategoryError,
)
from .features import FEATURE_NAMES

ZONES = ("NHZ", "TAZ", "GAZ", "CSZ", "VAZ", "RLZ")
PARENT_MATERIALS = (
    "RecentAlluvium",
    "OlderAlluvium",
    "GraniteGneiss",
    "PeninsularColluvium",
    "DeltaicAlluvium",
)
SOIL_ORDERS = ("Inceptisols", "Entisols", "Alfisols")

TARGETS = ("B", "OC", "Mn", "S", "SAI")
TARGET_COLUMNS = {
    "B": "b_mg_kg",
    "OC": "oc_pct",
    "Mn": "mn_mg_kg",
    "S": "s_mg_kg",
    "SAI": "sai",
}

CONFIG_KINDS = ("IFS", "PXRF", "IFS_AVS", "IFS_AVS_PXRF")
CONFIG_WIDTHS = {"IFS": 231, "PXRF": 19, "IFS_AVS": 245, "IFS_AVS_PXRF": 264}

AUX_COLUMN_NAMES = tuple(
    [f"zone_{z}" for z in ZONES]
    + [f"pm_{p}" for p in PARENT_MATERIALS]
    + [f"order_{o}" for o in SOIL_ORDERS]
)
PXRF_COLUMN_NAMES = tuple(f"pxrf_{el}" for el in pxrf.ELEMENTS)


@dataclass
class SoilSample:
    sample_id: str
    zone: str
    parent_material: str
    soil_order: str
    targets: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.zone not in ZONES:
            raise UnknownCategoryError(f"unknown zone {self.zone!r}")
        if self.parent_material not in PARENT_MATERIALS:
            raise UnknownCategoryError(f"unknown parent material {self.parent_material!r}")
        if self.soil_order not in SOIL_ORDERS:
            raise UnknownCategoryError(f"unknown soil order {self.soil_order!r}")


@dataclass
class FusionMatrix:
    sample_ids: list
    column_names: list
    x: np.ndarray
    y: np.ndarray


@dataclass
class SplitPlan:
    calibration_ids: list
    test_ids: list
    folds: list
    seed: int


def encode_auxiliary(sample):
    """Full one-hot vector: 6 zone + 5 parent-material + 3 order columns."""
    vec = np.zeros(len(AUX_COLUMN_NAMES))
    vec[ZONES.index(sample.zone)] = 1.0
    vec[len(ZONES) + PARENT_MATERIALS.index(sample.parent_material)] = 1.0
    vec[len(ZONES) + len(PARENT_MATERIALS) + SOIL_ORDERS.index(sample.soil_order)] = 1.0
    return vec


def assemble_matrix(samples, feature_vectors, pxrf_records, kind, target):
    """Join predictor blocks for one (config, target) pair.

    ``feature_vectors`` and ``pxrf_records`` map sample_id to the 231-
    and 19-element arrays; a PXRF record containing NaN does not satisfy
    the PXRF block. Row order follows the input sample order.
    """
    if kind not in CONFIG_KINDS:
        raise ValueError(f"unknown config kind {kind!r}")
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}")
    needs_ifs = kind in ("IFS", "IFS_AVS", "IFS_AVS_PXRF")
    needs_avs = kind in ("IFS_AVS", "IFS_AVS_PXRF")
    needs_pxrf = kind in ("PXRF", "IFS_AVS_PXRF")

    columns = []
    if needs_ifs:
        columns.extend(FEATURE_NAMES)
    if needs_avs:
        columns.extend(AUX_COLUMN_NAMES)
    if needs_pxrf:
        columns.extend(PXRF_COLUMN_NAMES)

    ids, rows, y = [], [], []
    for sample in samples:
        value = sample.targets.get(target)
        if value is None:
            continue
        blocks = []
        if needs_ifs:
            if sample.sample_id not in feature_vectors:
                raise MissingBlockError(
                    f"sample {sample.sample_id!r} lacks image features"
                )
            blocks.append(np.asarray(feature_vectors[sample.sample_id]))
        if needs_avs:
            blocks.append(encode_auxiliary(sample))
        if needs_pxrf:
            record = pxrf_records.get(sample.sample_id)
            if record is None or not np.isfinite(record).all():
                raise MissingBlockError(
                    f"sample {sample.sample_id!r} lacks a complete PXRF record"
                )
            blocks.append(np.asarray(record))
        ids.append(sample.sample_id)
        rows.append(np.concatenate(blocks))
        y.append(float(value))

    x = np.vstack(rows) if rows else np.empty((0, len(columns)))
    assert x.shape[1] == CONFIG_WIDTHS[kind]
    return FusionMatrix(ids, list(columns), x, np.asarray(y))


def split_calibration_test(ids, fraction=0.8, seed=0):
    """Seeded random partition; calibration gets ceil(fraction * n) ids.

    The id list is canonicalized by sorting before permutation, so the
    split depends only on the id set, the fraction, and the seed.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie strictly between 0 and 1")
    ids = sorted(ids)
    n = len(ids)
    if n < 2:
        raise TooFewSamplesError("need at least 2 ids to split")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    perm = rng.permutation(n)
    n_cal = math.ceil(fraction * n)
    calibration = [ids[i] for i in perm[:n_cal]]
    test = [ids[i] for i in perm[n_cal:]]
    return SplitPlan(calibration, test, [], seed)


def kfold_indices(calibration_ids, k=5, seed=0):
    """Deal shuffled ids into k folds whose sizes differ by at most 1."""
    if k < 2:
        raise ValueError("k must be at least 2")
    ids = sorted(calibration_ids)
    n = len(ids)
    if n < k:
        raise TooFewSamplesError(f"need at least {k} ids for {k} folds")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    perm = rng.permutation(n)
    base, extra = divmod(n, k)
    folds, start = [], 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        folds.append([ids[i] for i in perm[start : start + size]])
        start += size
    return folds


def zone_holdout_splits(samples):
    """One (zone, train_ids, test_ids) triple per zone, in canonical order."""
    out = []
    for zone in ZONES:
        test = [s.sample_id for s in samples if s.zone == zone]
        train = [s.sample_id for s in samples if s.zone != zone]
        out.append((zone, train, test))
    return out


SAMPLES_COLUMNS = ["sample_id", "zone", "parent_material", "soil_order"] + [
    TARGET_COLUMNS[t] for t in TARGETS
]


def load_samples_csv(path):
    """Parse samples.csv into SoilSample records (blank target = missing)."""
    df = pd.read_csv(path, dtype={"sample_id": str})
    missing = [c for c in SAMPLES_COLUMNS if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {missing}")
    if df["sample_id"].duplicated().any():
        dupes = df.loc[df["sample_id"].duplicated(), "sample_id"].tolist()
        raise SchemaError(f"{path}: duplicate sample_id(s) {dupes}")
    samples = []
    for row in df.itertuples(index=False):
        targets = {}
        for t in TARGETS:
            raw = getattr(row, TARGET_COLUMNS[t])
            targets[t] = None if pd.isna(raw) else float(raw)
        samples.append(
            SoilSample(row.sample_id, row.zone, row.parent_material, row.soil_order, targets)
        )
    return samples


def load_features_csv(path):
    """Parse features.csv into {sample_id: 231-vector}."""
    df = pd.read_csv(path, dtype={"sample_id": str})
    if "sample_id" not in df.columns:
        raise SchemaError(f"{path}: missing column(s) ['sample_id']")
    missing = [c for c in FEATURE_NAMES if c not in df.columns]
    if missing:
        raise SchemaError(
            f"{path}: missing feature column(s) {missing[:5]}"
            + ("..." if len(missing) > 5 else "")
        )
    values = df[list(FEATURE_NAMES)].to_numpy(dtype=np.float64)
    if not np.isfinite(values).all():
        raise SchemaError(f"{path}: feature values must be finite")
    return {sid: values[i] for i, sid in enumerate(df["sample_id"])}


def write_features_csv(vectors, path):
    """Write ImageFeatureVector records with 9-significant-digit values."""
    df = pd.DataFrame(
        [{"sample_id": v.sample_id, **dict(zip(FEATURE_NAMES, v.values))} for v in vectors],
        columns=["sample_id", *FEATURE_NAMES],
    )
    df.to_csv(path, index=False, float_format="%.9g")
