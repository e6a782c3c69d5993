"""Command-line entry point.

Subcommands: extract, calibrate, run, synth, pca, holdout. All file
outputs are deterministic functions of the inputs and the seed.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import extraction, figures, fusion, pipeline, pxrf, synth
from .errors import NoImagesFoundError, SoilFusionError
from .pca import PcaResult, filmer_pritchett_encode, pca


def build_parser():
    parser = argparse.ArgumentParser(
        prog="soilfusion",
        description="Soil fertility prediction from microscope image features, "
        "auxiliary variables, and PXRF elemental data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract image features to a CSV")
    p.add_argument("--images", required=True, help="directory of <sampleId>_<k>.<ext> images")
    p.add_argument("--out", required=True, help="output features.csv path")
    p.add_argument("--workers", type=int, default=0, help="worker processes (0 = auto)")
    p.add_argument("--center-crop", type=int, default=0,
                   help="extract from the central NxN window (0 = whole image)")
    p.add_argument("--strict", action="store_true",
                   help="exit 2 when any image fails to decode")

    p = sub.add_parser("calibrate", help="compute/apply elemental correction factors")
    p.add_argument("--crm", help="crm_scans.csv (omit to use the built-in default table)")
    p.add_argument("--pxrf", required=True, help="raw pxrf.csv")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    _add_run_arguments(p)

    p = sub.add_parser("holdout", help="run only the zone-wise holdout table")
    _add_run_arguments(p)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--spec", help="flat key=value corpus spec file")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, dest="sample_count")
    p.add_argument("--image-size", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--target-noise-scale", type=float)

    p = sub.add_parser("pca", help="principal component analysis of a CSV")
    p.add_argument("--input", required=True, help="CSV with an id column plus variables")
    p.add_argument("--scale", action="store_true", help="scale columns to unit variance")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--dummy-mode", choices=["drop-first", "full"], default="drop-first",
                   help="dummy coding for non-numeric columns")
    p.add_argument("--no-figures", action="store_true")
    return parser


def _add_run_arguments(p):
    p.add_argument("--config", help="flat key=value pipeline config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--images-dir")
    p.add_argument("--samples", dest="samples_csv")
    p.add_argument("--pxrf", dest="pxrf_csv")
    p.add_argument("--crm", dest="crm_scans_csv")
    p.add_argument("--features", dest="features_csv")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--split-fraction", type=float, dest="split_fraction")
    p.add_argument("--folds", type=int)
    p.add_argument("--trees", type=int)
    p.add_argument("--min-leaf-size", type=int, dest="min_leaf_size")
    p.add_argument("--features-per-split", type=int, dest="features_per_split")
    p.add_argument("--targets", help="comma-separated subset of B,OC,Mn,S,SAI")
    p.add_argument("--configs", help="comma-separated subset of IFS,PXRF,IFS_AVS,IFS_AVS_PXRF")
    p.add_argument("--zone-holdout", action="store_const", const=True, dest="zone_holdout")
    p.add_argument("--holdout-config", dest="holdout_config")
    p.add_argument("--no-importance", action="store_const", const=False, dest="importance")
    p.add_argument("--allow-partial", action="store_const", const=True, dest="allow_partial")
    p.add_argument("--no-figures", action="store_const", const=False, dest="figures")
    p.add_argument("--workers", type=int)
    p.add_argument("--center-crop", type=int, dest="center_crop")


def _cmd_extract(args):
    vectors, failures = extraction.extract_directory(
        args.images, args.workers, crop=args.center_crop
    )
    fusion.write_features_csv(vectors, args.out)
    for path, why in failures:
        print(f"skipped {path}: {why}", file=sys.stderr)
    print(f"wrote {len(vectors)} sample rows to {args.out}", file=sys.stderr)
    return 2 if (failures and args.strict) else 0


def _cmd_calibrate(args):
    pipeline.calibrate_files(args.pxrf, args.out_dir, args.crm)
    print(f"wrote acf.csv and pxrf_corrected.csv to {args.out_dir}", file=sys.stderr)
    return 0


def _run_config(args, force_holdout=False):
    file_values = pipeline.parse_config_file(args.config) if args.config else {}
    override_keys = (
        "seed images_dir samples_csv pxrf_csv crm_scans_csv features_csv out_dir "
        "split_fraction folds trees min_leaf_size features_per_split targets configs "
        "zone_holdout holdout_config importance allow_partial figures workers "
        "center_crop"
    ).split()
    overrides = {k: getattr(args, k, None) for k in override_keys}
    config = pipeline.config_from_sources(file_values, overrides)
    if force_holdout:
        config.zone_holdout = True
    return config


def _cmd_run(args):
    config = _run_config(args)
    pipeline.run_pipeline(config)
    print(f"report written to {Path(config.out_dir) / 'report.json'}", file=sys.stderr)
    return 0


def _cmd_holdout(args):
    config = _run_config(args, force_holdout=True)
    config.configs = [config.holdout_config]
    config.importance = False
    pipeline.run_pipeline(config)
    print(f"zone holdout table written to {Path(config.out_dir) / 'zone_holdout.csv'}",
          file=sys.stderr)
    return 0


_SYNTH_KEYS = {
    "sample_count": int,
    "image_size": int,
    "replicates": int,
    "seed": int,
    "noise_octaves": int,
    "replicate_noise_sd": float,
    "target_noise_scale": float,
}


def _cmd_synth(args):
    spec = synth.CorpusSpec()
    if args.spec:
        for key, value in pipeline.parse_config_file(args.spec).items():
            if key in _SYNTH_KEYS:
                setattr(spec, key, _SYNTH_KEYS[key](value))
            elif key.startswith("zone_") and key.endswith("_weight"):
                zone = key[len("zone_"):-len("_weight")]
                spec.zone_profiles[zone] = replace(
                    spec.zone_profiles[zone], weight=float(value)
                )
            else:
                raise SoilFusionError(f"{args.spec}: unknown spec key {key!r}")
    for key in ("seed", "sample_count", "image_size", "replicates", "target_noise_scale"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(spec, key, value)
    counts = synth.generate_corpus(spec, args.out_dir)
    print(
        f"generated {spec.sample_count} samples x {spec.replicates} replicates "
        f"in {args.out_dir} (zones: {counts})",
        file=sys.stderr,
    )
    return 0


def _cmd_pca(args):
    df = pd.read_csv(args.input)
    if df.empty:
        raise SoilFusionError(f"{args.input}: no rows")
    id_col = None
    first = df.columns[0]
    if df[first].dtype == object:
        id_col = first
    labels = df[id_col].astype(str).tolist() if id_col else [str(i) for i in range(len(df))]

    blocks, names = [], []
    mode = "dropFirst" if args.dummy_mode == "drop-first" else "full"
    for col in df.columns:
        if col == id_col:
            continue
        if pd.api.types.is_numeric_dtype(df[col]):
            blocks.append(df[col].to_numpy(dtype=np.float64)[:, None])
            names.append(col)
        else:
            values = df[col].astype(str).tolist()
            categories = sorted(set(values))
            dummies, dummy_names = filmer_pritchett_encode(values, categories, mode)
            blocks.append(dummies)
            names.extend(f"{col}_{n}" for n in dummy_names)
    if not blocks:
        raise SoilFusionError(f"{args.input}: no usable variable columns")
    x = np.hstack(blocks)

    result = pca(x, scale=args.scale)
    _write_pca_outputs(result, labels, names, args.out_prefix)
    if not args.no_figures:
        figures.pca_figures(result, labels, names, args.out_prefix)
    print(f"wrote PCA outputs with prefix {args.out_prefix}", file=sys.stderr)
    return 0


def _write_pca_outputs(result: PcaResult, labels, names, prefix):
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    k = result.scores.shape[1]
    pcs = [f"PC{i + 1}" for i in range(k)]

    scores = pd.DataFrame(result.scores, columns=pcs)
    scores.insert(0, "id", labels)
    scores.to_csv(f"{prefix}_scores.csv", index=False, float_format="%.9g")

    loadings = pd.DataFrame(result.loadings, columns=pcs)
    loadings.insert(0, "variable", names)
    loadings.to_csv(f"{prefix}_loadings.csv", index=False, float_format="%.9g")

    var = pd.DataFrame(
        {
            "component": pcs,
            "eigenvalue": result.eigenvalues,
            "variance_pct": result.variance_explained,
            "cumulative_pct": np.cumsum(result.variance_explained),
        }
    )
    var.to_csv(f"{prefix}_variance.csv", index=False, float_format="%.9g")


_COMMANDS = {
    "extract": _cmd_extract,
    "calibrate": _cmd_calibrate,
    "run": _cmd_run,
    "holdout": _cmd_holdout,
    "synth": _cmd_synth,
    "pca": _cmd_pca,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except NoImagesFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SoilFusionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
