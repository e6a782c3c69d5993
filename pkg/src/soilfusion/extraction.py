"""Batch feature extraction over a directory of replicate images.

Files are named ``<sampleId>_<replicateIndex>.<ext>`` (the id may itself
contain underscores; the replicate index follows the last one). Output
is one aggregated row per sample, ordered by sample id, so results are
identical for any worker count.
"""

import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import NoImagesFoundError
from .features import ImageFeatureVector, aggregate_replicates, extract_features

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg"}


def worker_count(requested=None):
    """Resolve a worker count, honoring the SOILFUSION_THREADS cap."""
    count = requested if requested and requested > 0 else (os.cpu_count() or 1)
    cap = os.environ.get("SOILFUSION_THREADS")
    if cap:
        count = min(count, max(1, int(cap)))
    return max(1, count)


def parse_image_name(path):
    """Split a file name into (sample_id, replicate_index) or raise ValueError."""
    stem = Path(path).stem
    sample_id, _, replicate = stem.rpartition("_")
    if not sample_id or not replicate.isdigit():
        raise ValueError(f"cannot parse sample id from {Path(path).name!r}")
    return sample_id, int(replicate)


def load_image(path):
    """Decode an image file to an (H, W, 3) uint8 array."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def center_crop(image, size):
    """Central size x size window (clamped to the image dimensions)."""
    if size < 2:
        raise ValueError("center crop must be at least 2 pixels")
    h, w = image.shape[:2]
    ch, cw = min(size, h), min(size, w)
    r0, c0 = (h - ch) // 2, (w - cw) // 2
    return image[r0 : r0 + ch, c0 : c0 + cw]


def _extract_sample(args):
    sample_id, paths, crop = args
    vectors = []
    for p in paths:
        image = load_image(p)
        if crop:
            image = center_crop(image, crop)
        vectors.append(ImageFeatureVector(sample_id, extract_features(image)))
    return aggregate_replicates(vectors)


def extract_directory(images_dir, workers=1, crop=0):
    """Extract aggregated feature vectors for every sample in a directory.

    Returns (vectors ordered by sample id, failure list of (path, reason)
    strings for undecodable or unparseable files). ``crop`` > 0 extracts
    from the central crop x crop window of each image.
    """
    images_dir = Path(images_dir)
    if not images_dir.is_dir():
        raise NoImagesFoundError(f"{images_dir} is not a directory")

    failures = []
    groups = {}
    for path in sorted(images_dir.iterdir()):
        if path.suffix.lower() not in IMAGE_EXTENSIONS:
            continue
        try:
            sample_id, replicate = parse_image_name(path)
        except ValueError as exc:
            failures.append((str(path), str(exc)))
            continue
        groups.setdefault(sample_id, []).append((replicate, path))

    jobs = []
    for sample_id in sorted(groups):
        paths = [str(p) for _, p in sorted(groups[sample_id])]
        jobs.append((sample_id, paths, crop))
    if not jobs and not failures:
        raise NoImagesFoundError(f"no images found under {images_dir}")

    vectors = []
    workers = worker_count(workers)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_extract_sample_safe, jobs)
            for job, result in zip(jobs, results):
                _collect(job, result, vectors, failures)
    else:
        for job in jobs:
            _collect(job, _extract_sample_safe(job), vectors, failures)

    if not vectors:
        raise NoImagesFoundError(f"no decodable images under {images_dir}")
    return vectors, failures


def _extract_sample_safe(args):
    try:
        return _extract_sample(args)
    except Exception as exc:  # propagate as data, not a crashed pool
        return exc


def _collect(job, result, vectors, failures):
    sample_id, paths, _ = job
    if isinstance(result, Exception):
        failures.append((paths[0], f"sample {sample_id}: {result}"))
    else:
        vectors.append(result)
