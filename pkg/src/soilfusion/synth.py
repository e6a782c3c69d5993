"""Deterministic synthetic soil-image corpora with known ground truth.

Each sample gets a zone-specific base color (jittered per sample), a
multi-octave value-noise texture shared by its replicates, and
per-replicate pixel noise. Targets are computed from the *measured*
mean color statistics of the emitted images plus seeded noise, so the
recorded values can be recomputed exactly from the files. Synthetic
elemental readings are affine functions of the targets plus noise.
"""

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import pandas as pd
from PIL import Image

from . import color as color_mod
from .errors import InvalidSpecError
from .fusion import SOIL_ORDERS, PARENT_MATERIALS, TARGETS, TARGET_COLUMNS, ZONES
from .pxrf import ELEMENTS


@dataclass
class ZoneProfile:
    base_color: tuple          # mean RGB in [0, 255]
    jitter_sd: float = 14.0    # per-sample base color spread
    granularity: float = 0.3   # texture contrast knob in [0, 1]
    weight: float = 1.0        # share of samples
    pm_weights: dict = field(default_factory=dict)
    order_weights: dict = field(default_factory=dict)


DEFAULT_ZONE_PROFILES = {
    "NHZ": ZoneProfile((72, 54, 42), weight=82,
                       pm_weights={"RecentAlluvium": 62, "GraniteGneiss": 20},
                       order_weights={"Inceptisols": 48, "Entisols": 34},
                       granularity=0.35),
    "TAZ": ZoneProfile((95, 72, 55), weight=102,
                       pm_weights={"RecentAlluvium": 78, "OlderAlluvium": 24},
                       order_weights={"Inceptisols": 66, "Entisols": 36},
                       granularity=0.30),
    "GAZ": ZoneProfile((124, 102, 82), weight=238,
                       pm_weights={"RecentAlluvium": 150, "OlderAlluvium": 58,
                                   "PeninsularColluvium": 30},
                       order_weights={"Inceptisols": 119, "Entisols": 75, "Alfisols": 44},
                       granularity=0.25),
    "CSZ": ZoneProfile((138, 128, 116), weight=210,
                       pm_weights={"DeltaicAlluvium": 154, "RecentAlluvium": 38,
                                   "OlderAlluvium": 18},
                       order_weights={"Inceptisols": 77, "Entisols": 92, "Alfisols": 41},
                       granularity=0.20),
    "VAZ": ZoneProfile((168, 136, 100), weight=214,
                       pm_weights={"RecentAlluvium": 54, "OlderAlluvium": 60,
                                   "GraniteGneiss": 35, "PeninsularColluvium": 65},
                       order_weights={"Inceptisols": 71, "Entisols": 32, "Alfisols": 111},
                       granularity=0.40),
    "RLZ": ZoneProfile((152, 86, 60), weight=287,
                       pm_weights={"OlderAlluvium": 80, "GraniteGneiss": 171,
                                   "PeninsularColluvium": 36},
                       order_weights={"Inceptisols": 38, "Alfisols": 249},
                       granularity=0.50),
}

# target = intercept + sum(coef * measured stat) + granularity coef + noise.
# Channel means are on the 0-255 scale; mean_sat is the mean HSV
# saturation in [0, 1]; stats are averaged over the sample's replicates.
# OC, for example, is 3.0 * (1 - mean_r / 255) plus noise.
TARGET_RULES = {
    "OC":  {"intercept": 3.0, "coefs": {"mean_r": -3.0 / 255.0},
            "granularity": 0.0, "noise_sd": 0.02},
    "B":   {"intercept": 3.45, "coefs": {"mean_g": -3.2 / 255.0},
            "granularity": 0.0, "noise_sd": 0.03},
    "Mn":  {"intercept": 102.0, "coefs": {"mean_b": -90.0 / 255.0},
            "granularity": 150.0, "noise_sd": 2.0},
    "S":   {"intercept": 4.0, "coefs": {"mean_b": 70.0 / 255.0, "mean_sat": 30.0},
            "granularity": 0.0, "noise_sd": 1.0},
    "SAI": {"intercept": 2.5, "coefs": {"mean_sat": 38.0},
            "granularity": 10.0, "noise_sd": 0.5},
}

# element reading = intercept + sum(coef * target) + noise, clipped at 0
PXRF_RULES = {
    "Ca": (3000.0, {"SAI": 40.0}, 60.0),
    "K":  (9000.0, {"S": 220.0}, 150.0),
    "Fe": (18000.0, {"OC": 600.0}, 300.0),
    "Mn": (260.0, {"Mn": 7.5}, 8.0),
    "Rb": (45.0, {"B": 22.0}, 2.0),
    "Zr": (180.0, {"Mn": 0.8}, 6.0),
    "Zn": (40.0, {"OC": 30.0}, 2.0),
    "Ti": (3500.0, {"Mn": 9.0}, 90.0),
    "Ba": (300.0, {"SAI": 6.0}, 10.0),
    "Cr": (55.0, {"S": 0.8}, 3.0),
    "Cu": (18.0, {"B": 6.0}, 1.0),
    "Pb": (14.0, {"OC": 3.0}, 1.0),
    "Ni": (22.0, {"Mn": 0.15}, 1.5),
    "Ag": (1.2, {}, 0.2),
    "Sn": (3.0, {}, 0.5),
    "V":  (60.0, {"OC": 10.0}, 3.0),
    "Sr": (90.0, {"SAI": 2.5}, 4.0),
    "Sb": (1.5, {}, 0.3),
    "Ga": (12.0, {"B": 2.0}, 0.8),
}


@dataclass
class CorpusSpec:
    sample_count: int = 200
    image_size: int = 256
    replicates: int = 3
    seed: int = 0
    noise_octaves: int = 4
    replicate_noise_sd: float = 2.0
    target_noise_scale: float = 1.0  # scales every rule's noise_sd
    zone_profiles: dict = field(default_factory=lambda: dict(DEFAULT_ZONE_PROFILES))

    def validate(self):
        if self.sample_count < 1:
            raise InvalidSpecError("sample_count must be >= 1")
        if self.image_size < 2:
            raise InvalidSpecError("image_size must be >= 2")
        if self.replicates < 1:
            raise InvalidSpecError("replicates must be >= 1")
        if self.replicate_noise_sd < 0 or self.target_noise_scale < 0:
            raise InvalidSpecError("noise parameters must be >= 0")
        for zone, prof in self.zone_profiles.items():
            if zone not in ZONES:
                raise InvalidSpecError(f"unknown zone {zone!r}")
            if any(not 0 <= c <= 255 for c in prof.base_color):
                raise InvalidSpecError(f"{zone}: base color outside [0, 255]")
            if prof.jitter_sd < 0:
                raise InvalidSpecError(f"{zone}: jitter_sd must be >= 0")


def _quota_counts(weights, total):
    """Largest-remainder apportionment of `total` items over weights."""
    keys = list(weights)
    w = np.array([weights[k] for k in keys], dtype=np.float64)
    exact = w / w.sum() * total
    counts = np.floor(exact).astype(int)
    remainder = total - counts.sum()
    if remainder > 0:
        order = np.lexsort((np.arange(len(keys)), -(exact - counts)))
        for i in order[:remainder]:
            counts[i] += 1
    return dict(zip(keys, counts.tolist()))


def _value_noise(rng, size, octaves):
    """Multi-octave bilinear value noise in roughly [-1, 1]."""
    field_sum = np.zeros((size, size))
    amp_total = 0.0
    for o in range(octaves):
        cells = 4 * (2**o)
        lattice = rng.standard_normal((cells + 1, cells + 1))
        t = np.linspace(0.0, cells, size)
        i0 = np.minimum(t.astype(int), cells - 1)
        frac = t - i0
        rows = (
            lattice[i0][:, i0] * (1 - frac)[None, :]
            + lattice[i0][:, i0 + 1] * frac[None, :]
        )
        rows_next = (
            lattice[i0 + 1][:, i0] * (1 - frac)[None, :]
            + lattice[i0 + 1][:, i0 + 1] * frac[None, :]
        )
        amp = 0.5**o
        field_sum += amp * (rows * (1 - frac)[:, None] + rows_next * frac[:, None])
        amp_total += amp
    field_sum /= amp_total
    # Zero-mean modulation keeps the image's mean color on the jittered
    # base color rather than drifting with the coarse noise octaves.
    return field_sum - field_sum.mean()


def _sample_rng(seed, sample_index, tag):
    return np.random.default_rng(np.random.SeedSequence((seed, sample_index, tag)))


def _render_sample(spec, profile, sample_index):
    """All replicate images for one sample as uint8 arrays."""
    size = spec.image_size
    base_rng = _sample_rng(spec.seed, sample_index, 0)
    base = np.clip(
        np.asarray(profile.base_color, dtype=np.float64)
        + base_rng.normal(0.0, profile.jitter_sd, 3),
        0.0,
        255.0,
    )
    texture_rng = _sample_rng(spec.seed, sample_index, 1)
    field_arr = _value_noise(texture_rng, size, spec.noise_octaves)
    textured = base[None, None, :] * (1.0 + 0.6 * profile.granularity * field_arr[:, :, None])

    images = []
    for r in range(spec.replicates):
        rep_rng = _sample_rng(spec.seed, sample_index, 2 + r)
        noisy = textured + rep_rng.normal(0.0, spec.replicate_noise_sd, textured.shape)
        images.append(np.clip(np.rint(noisy), 0, 255).astype(np.uint8))
    return images


def _measured_stats(images):
    """Per-sample means (over replicates) of the color statistics rules use."""
    means = {"mean_r": [], "mean_g": [], "mean_b": [], "mean_sat": []}
    for img in images:
        arr = img.astype(np.float64)
        means["mean_r"].append(arr[..., 0].mean())
        means["mean_g"].append(arr[..., 1].mean())
        means["mean_b"].append(arr[..., 2].mean())
        _, s, _ = color_mod.hsv_planes(img)
        means["mean_sat"].append(s.mean())
    return {k: float(np.mean(v)) for k, v in means.items()}


def evaluate_target_rule(rule, stats, granularity):
    """Noise-free value of one target rule given measured statistics."""
    value = rule["intercept"]
    for key, coef in rule["coefs"].items():
        value += coef * stats[key]
    return value + rule["granularity"] * granularity


def generate_corpus(spec, out_dir):
    """Write images, samples.csv, pxrf.csv, and ground_truth.json."""
    spec.validate()
    out = Path(out_dir)
    images_dir = out / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    zone_counts = _quota_counts(
        {z: spec.zone_profiles[z].weight for z in ZONES if z in spec.zone_profiles},
        spec.sample_count,
    )
    zone_of = []
    for zone in ZONES:
        zone_of.extend([zone] * zone_counts.get(zone, 0))

    pm_of, order_of = [], []
    for zone in ZONES:
        count = zone_counts.get(zone, 0)
        if count == 0:
            continue
        prof = spec.zone_profiles[zone]
        pm_counts = _quota_counts(prof.pm_weights, count)
        order_counts = _quota_counts(prof.order_weights, count)
        for pm in PARENT_MATERIALS:
            pm_of.extend([pm] * pm_counts.get(pm, 0))
        for so in SOIL_ORDERS:
            order_of.extend([so] * order_counts.get(so, 0))

    width = len(str(spec.sample_count))
    sample_rows, pxrf_rows = [], []
    for i in range(spec.sample_count):
        sid = f"S{i + 1:0{width}d}"
        zone = zone_of[i]
        prof = spec.zone_profiles[zone]
        images = _render_sample(spec, prof, i)
        for r, img in enumerate(images, start=1):
            Image.fromarray(img, mode="RGB").save(images_dir / f"{sid}_{r}.png")

        stats = _measured_stats(images)
        noise_rng = _sample_rng(spec.seed, i, 50)
        targets = {}
        for t in TARGETS:
            rule = TARGET_RULES[t]
            value = evaluate_target_rule(rule, stats, prof.granularity)
            sd = rule["noise_sd"] * spec.target_noise_scale
            if sd > 0:
                value += noise_rng.normal(0.0, sd)
            targets[t] = max(0.0, value)

        pxrf_rng = _sample_rng(spec.seed, i, 60)
        reading = {"sample_id": sid}
        for el in ELEMENTS:
            intercept, coefs, sd = PXRF_RULES[el]
            val = intercept + sum(coefs[t] * targets[t] for t in coefs)
            if sd > 0:
                val += pxrf_rng.normal(0.0, sd)
            reading[el] = max(0.0, val)
        pxrf_rows.append(reading)

        sample_rows.append(
            {
                "sample_id": sid,
                "zone": zone,
                "parent_material": pm_of[i],
                "soil_order": order_of[i],
                **{TARGET_COLUMNS[t]: targets[t] for t in TARGETS},
            }
        )

    pd.DataFrame(sample_rows).to_csv(out / "samples.csv", index=False, float_format="%.9g")
    pd.DataFrame(pxrf_rows, columns=["sample_id", *ELEMENTS]).to_csv(
        out / "pxrf.csv", index=False, float_format="%.9g"
    )

    truth = {
        "seed": spec.seed,
        "sample_count": spec.sample_count,
        "image_size": spec.image_size,
        "replicates": spec.replicates,
        "target_rules": TARGET_RULES,
        "target_noise_scale": spec.target_noise_scale,
        "pxrf_rules": {el: [PXRF_RULES[el][0], PXRF_RULES[el][1], PXRF_RULES[el][2]] for el in ELEMENTS},
        "zone_profiles": {z: asdict(p) for z, p in spec.zone_profiles.items()},
        "zone_counts": zone_counts,
    }
    with open(out / "ground_truth.json", "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return zone_counts
