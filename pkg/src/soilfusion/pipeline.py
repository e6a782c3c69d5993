"""End-to-end orchestration: extract, calibrate, fuse, train, evaluate.

Calibration metrics come from pooled 5-fold out-of-fold predictions on
the 80% calibration partition; test metrics come from a model trained
on the full calibration set and applied to the held-out 20%. All
randomness derives from the config seed, so report.json is byte
identical across reruns.
"""

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import extraction, fusion, metrics, pxrf
from .errors import MissingBlockError, SchemaError, SoilFusionError
from .forest import ForestParams, cross_validate, predict, train_forest, variable_importance
from .fusion import CONFIG_KINDS, TARGETS, ZONES

IMPORTANCE_TOP_N = 20


@dataclass
class PipelineConfig:
    images_dir: str = ""
    samples_csv: str = ""
    pxrf_csv: str = ""
    crm_scans_csv: str = ""
    features_csv: str = ""      # optional precomputed features; skips extraction
    out_dir: str = "out"
    seed: int = 0
    split_fraction: float = 0.8
    folds: int = 5
    trees: int = 300
    min_leaf_size: int = 8
    features_per_split: int = 0
    bootstrap: bool = True
    targets: list = field(default_factory=lambda: list(TARGETS))
    configs: list = field(default_factory=lambda: list(CONFIG_KINDS))
    zone_holdout: bool = False
    holdout_config: str = "IFS_AVS_PXRF"
    importance: bool = True
    allow_partial: bool = False
    figures: bool = True
    workers: int = 0  # 0 = auto
    center_crop: int = 0  # 0 = whole image

    def forest_params(self, seed):
        return ForestParams(
            self.trees, self.min_leaf_size, self.features_per_split, self.bootstrap, seed
        )


_BOOL_KEYS = {"zone_holdout", "importance", "allow_partial", "figures", "bootstrap"}
_INT_KEYS = {
    "seed", "folds", "trees", "min_leaf_size", "features_per_split", "workers",
    "center_crop",
}
_FLOAT_KEYS = {"split_fraction"}
_LIST_KEYS = {"targets", "configs"}


def parse_config_file(path):
    """Parse a flat ``key = value`` config file into a dict."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def config_from_sources(file_values=None, overrides=None):
    """Build a PipelineConfig with precedence flag > file > default."""
    config = PipelineConfig()
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key, value in merged.items():
        if not hasattr(config, key):
            raise SchemaError(f"unknown config key {key!r}")
        if key in _BOOL_KEYS and isinstance(value, str):
            value = value.lower() in ("1", "true", "yes", "on")
        elif key in _INT_KEYS and isinstance(value, str):
            value = int(value)
        elif key in _FLOAT_KEYS and isinstance(value, str):
            value = float(value)
        elif key in _LIST_KEYS and isinstance(value, str):
            value = [v.strip() for v in value.split(",") if v.strip()]
        setattr(config, key, value)
    unknown_targets = set(config.targets) - set(TARGETS)
    if unknown_targets:
        raise SchemaError(f"unknown target(s) {sorted(unknown_targets)}")
    unknown_configs = set(config.configs) - set(CONFIG_KINDS)
    if unknown_configs:
        raise SchemaError(f"unknown config kind(s) {sorted(unknown_configs)}")
    return config


def _derived_seed(seed, *path):
    entropy = (seed,) + tuple(
        int.from_bytes(str(p).encode("utf-8"), "little") % (2**32) for p in path
    )
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def _filter_complete(samples, feature_vectors, pxrf_records, configs, allow_partial, log):
    """Drop (or reject) samples lacking a block any requested config needs."""
    needs_ifs = any(c != "PXRF" for c in configs)
    needs_pxrf = any(c in ("PXRF", "IFS_AVS_PXRF") for c in configs)
    kept, dropped = [], []
    for sample in samples:
        missing = []
        if needs_ifs and sample.sample_id not in feature_vectors:
            missing.append("image features")
        if needs_pxrf:
            record = pxrf_records.get(sample.sample_id)
            if record is None or not np.isfinite(record).all():
                missing.append("PXRF record")
        if missing:
            dropped.append((sample.sample_id, ", ".join(missing)))
        else:
            kept.append(sample)
    if dropped:
        if not allow_partial:
            detail = "; ".join(f"{sid} ({why})" for sid, why in dropped[:10])
            raise MissingBlockError(
                f"{len(dropped)} sample(s) lack required predictor blocks: {detail}"
            )
        for sid, why in dropped:
            log(f"dropping sample {sid}: missing {why}")
    return kept


def run_pipeline(config, log=None):
    """Execute the full protocol and write artifacts; returns the report dict."""
    log = log or (lambda msg: print(msg, file=sys.stderr))
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = extraction.worker_count(config.workers)

    samples = fusion.load_samples_csv(config.samples_csv)

    if config.features_csv:
        feature_vectors = fusion.load_features_csv(config.features_csv)
    else:
        vectors, failures = extraction.extract_directory(
            config.images_dir, workers, crop=config.center_crop
        )
        for path, why in failures:
            log(f"skipped {path}: {why}")
        fusion.write_features_csv(vectors, out / "features.csv")
        feature_vectors = {v.sample_id: v.values for v in vectors}

    raw_records = pxrf.read_pxrf_csv(config.pxrf_csv)
    if config.crm_scans_csv:
        table = pxrf.CorrectionFactorTable.from_crm_scans(
            pxrf.read_crm_scans(config.crm_scans_csv)
        )
    else:
        table = pxrf.CorrectionFactorTable.default()
    corrected = pxrf.correct_records(raw_records, table)
    pxrf.write_acf_csv(table, out / "acf.csv")
    pxrf.write_pxrf_csv(corrected, out / "pxrf_corrected.csv")

    samples = _filter_complete(
        samples, feature_vectors, corrected, config.configs, config.allow_partial, log
    )

    report = {
        "seed": config.seed,
        "split_fraction": config.split_fraction,
        "folds": config.folds,
        "targets": list(config.targets),
        "configs": list(config.configs),
        "bundles": {},
        "relative_change_vs_pxrf": {},
        "residual_correlation_vs_pxrf": {},
        "zone_holdout_rmse": None,
        "descriptive_stats_by_zone": {},
    }
    predictions_rows = []
    importance_rows = []

    for target in config.targets:
        eligible = [s for s in samples if s.targets.get(target) is not None]
        if len(eligible) < 2 * config.folds:
            raise SoilFusionError(
                f"target {target}: only {len(eligible)} samples with values"
            )
        ids = [s.sample_id for s in eligible]
        split = fusion.split_calibration_test(
            ids, config.split_fraction, _derived_seed(config.seed, "split", target)
        )
        folds = fusion.kfold_indices(
            split.calibration_ids, config.folds, _derived_seed(config.seed, "folds", target)
        )

        report["bundles"][target] = {}
        for kind in config.configs:
            bundle = _evaluate_bundle(
                config, target, kind, eligible, feature_vectors, corrected,
                split, folds, predictions_rows, importance_rows,
            )
            report["bundles"][target][kind] = bundle

        if "PXRF" in config.configs:
            report["relative_change_vs_pxrf"][target] = _relative_changes(
                report["bundles"][target], config.configs
            )
            report["residual_correlation_vs_pxrf"][target] = _residual_corr(
                report["bundles"][target]
            )

    report["descriptive_stats_by_zone"] = _zone_descriptive_stats(samples, config.targets)

    if config.zone_holdout:
        report["zone_holdout_rmse"] = _zone_holdout(
            config, samples, feature_vectors, corrected
        )

    _write_artifacts(report, config, out, predictions_rows, importance_rows)
    if config.figures:
        from . import figures

        figures.render_report_figures(report, out / "figures")
    return report


def _evaluate_bundle(config, target, kind, eligible, feature_vectors, pxrf_records,
                     split, folds, predictions_rows, importance_rows):
    cal_ids = set(split.calibration_ids)
    test_ids = set(split.test_ids)
    cal_samples = [s for s in eligible if s.sample_id in cal_ids]
    test_samples = [s for s in eligible if s.sample_id in test_ids]

    cal = fusion.assemble_matrix(cal_samples, feature_vectors, pxrf_records, kind, target)
    test = fusion.assemble_matrix(test_samples, feature_vectors, pxrf_records, kind, target)

    row_of = {sid: i for i, sid in enumerate(cal.sample_ids)}
    fold_rows = [np.array([row_of[sid] for sid in fold], dtype=np.int64) for fold in folds]

    params = config.forest_params(_derived_seed(config.seed, "forest", target, kind))
    oof = cross_validate(cal.x, cal.y, params, fold_rows)
    model = train_forest(cal.x, cal.y, params, cal.column_names)
    test_pred = predict(model, test.x)

    bundle = {
        "n_calibration": len(cal.sample_ids),
        "n_test": len(test.sample_ids),
        "r2_calibration": metrics.r_squared(cal.y, oof),
        "r2_test": metrics.r_squared(test.y, test_pred),
        "rmse_calibration": metrics.rmse(cal.y, oof),
        "rmse_test": metrics.rmse(test.y, test_pred),
        "bias_test": metrics.bias(test.y, test_pred),
        "ccc_test": metrics.concordance(test.y, test_pred),
        "test_series": {
            "sample_ids": list(test.sample_ids),
            "measured": [float(v) for v in test.y],
            "predicted": [float(v) for v in test_pred],
        },
        "importance_top": None,
    }

    for sid, m, p in zip(cal.sample_ids, cal.y, oof):
        predictions_rows.append((target, kind, sid, "calibration_oof", float(m), float(p)))
    for sid, m, p in zip(test.sample_ids, test.y, test_pred):
        predictions_rows.append((target, kind, sid, "test", float(m), float(p)))

    if config.importance:
        imp = variable_importance(model, cal.x, cal.y)
        score_of = dict(zip(imp.features, imp.scores))
        bundle["importance_top"] = [
            [name, float(score_of[name])] for name in imp.ranking[:IMPORTANCE_TOP_N]
        ]
        for rank, name in enumerate(imp.ranking, start=1):
            importance_rows.append((target, kind, rank, name, float(score_of[name])))
    return bundle


def _relative_changes(bundles, configs):
    baseline = bundles["PXRF"]
    out = {}
    for kind in configs:
        if kind == "PXRF":
            continue
        candidate = bundles[kind]
        out[kind] = {
            "r2_test_pct": metrics.relative_change(
                candidate["r2_test"], baseline["r2_test"]
            ),
            "rmse_test_pct": metrics.relative_change(
                candidate["rmse_test"], baseline["rmse_test"]
            ),
        }
    return out


def _residual_corr(bundles):
    """Correlation between IFS_AVS test residuals and PXRF-alone predictions."""
    if "IFS_AVS" not in bundles or "PXRF" not in bundles:
        return None
    left = bundles["IFS_AVS"]["test_series"]
    right = bundles["PXRF"]["test_series"]
    shared = [sid for sid in left["sample_ids"] if sid in set(right["sample_ids"])]
    if len(shared) < 2:
        return None
    l_idx = {sid: i for i, sid in enumerate(left["sample_ids"])}
    r_idx = {sid: i for i, sid in enumerate(right["sample_ids"])}
    residuals = [
        left["measured"][l_idx[s]] - left["predicted"][l_idx[s]] for s in shared
    ]
    reference = [right["predicted"][r_idx[s]] for s in shared]
    try:
        return metrics.residual_correlation(residuals, reference)
    except SoilFusionError:
        return None


def _zone_holdout(config, samples, feature_vectors, pxrf_records):
    """Per-zone holdout RMSE grid for the configured predictor set."""
    grid = {}
    for zone, train_ids, test_ids in fusion.zone_holdout_splits(samples):
        train_set, test_set = set(train_ids), set(test_ids)
        grid[zone] = {}
        for target in config.targets:
            eligible = [s for s in samples if s.targets.get(target) is not None]
            train = [s for s in eligible if s.sample_id in train_set]
            test = [s for s in eligible if s.sample_id in test_set]
            if len(train) < 2 * config.min_leaf_size or not test:
                grid[zone][target] = None
                continue
            tr = fusion.assemble_matrix(
                train, feature_vectors, pxrf_records, config.holdout_config, target
            )
            te = fusion.assemble_matrix(
                test, feature_vectors, pxrf_records, config.holdout_config, target
            )
            params = config.forest_params(
                _derived_seed(config.seed, "holdout", zone, target)
            )
            model = train_forest(tr.x, tr.y, params, tr.column_names)
            grid[zone][target] = metrics.rmse(te.y, predict(model, te.x))
    return grid


def _zone_descriptive_stats(samples, targets):
    """Per-zone summary of the measured target values (degenerate cells null)."""
    stats = {}
    for zone in ZONES:
        stats[zone] = {}
        values_by_target = {
            t: [s.targets[t] for s in samples if s.zone == zone and s.targets.get(t) is not None]
            for t in targets
        }
        stats[zone]["n"] = max((len(v) for v in values_by_target.values()), default=0)
        for t in targets:
            try:
                stats[zone][t] = metrics.descriptive_stats(values_by_target[t])
            except SoilFusionError:
                stats[zone][t] = None
    return stats


def write_report_json(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_artifacts(report, config, out, predictions_rows, importance_rows):
    write_report_json(report, out / "report.json")

    metric_rows = []
    for target in config.targets:
        for kind in config.configs:
            b = report["bundles"][target][kind]
            metric_rows.append(
                {
                    "target": target,
                    "config": kind,
                    "n_calibration": b["n_calibration"],
                    "n_test": b["n_test"],
                    "r2_calibration": b["r2_calibration"],
                    "r2_test": b["r2_test"],
                    "rmse_calibration": b["rmse_calibration"],
                    "rmse_test": b["rmse_test"],
                    "bias_test": b["bias_test"],
                    "ccc_test": b["ccc_test"],
                }
            )
    pd.DataFrame(metric_rows).to_csv(out / "metrics.csv", index=False, float_format="%.9g")

    pd.DataFrame(
        predictions_rows,
        columns=["target", "config", "sample_id", "split", "measured", "predicted"],
    ).to_csv(out / "predictions.csv", index=False, float_format="%.9g")

    if importance_rows:
        pd.DataFrame(
            importance_rows, columns=["target", "config", "rank", "feature", "score"]
        ).to_csv(out / "importance.csv", index=False, float_format="%.9g")

    rel_rows = []
    for target, kinds in report["relative_change_vs_pxrf"].items():
        for kind, vals in kinds.items():
            rel_rows.append(
                {
                    "target": target,
                    "config": kind,
                    "r2_test_pct": vals["r2_test_pct"],
                    "rmse_test_pct": vals["rmse_test_pct"],
                }
            )
    if rel_rows:
        pd.DataFrame(rel_rows).to_csv(
            out / "relative_change.csv", index=False, float_format="%.9g"
        )

    if report["zone_holdout_rmse"] is not None:
        rows = []
        for zone in ZONES:
            row = {"zone": zone}
            row.update({t: report["zone_holdout_rmse"][zone][t] for t in config.targets})
            rows.append(row)
        pd.DataFrame(rows).to_csv(
            out / "zone_holdout.csv", index=False, float_format="%.9g"
        )

    stat_rows = []
    for zone in ZONES:
        zstats = report["descriptive_stats_by_zone"].get(zone, {})
        for target in config.targets:
            cell = zstats.get(target)
            row = {"zone": zone, "target": target}
            for key in ("min", "max", "mean", "sd", "skewness", "kurtosis", "cv"):
                row[key] = None if cell is None else cell[key]
            stat_rows.append(row)
    pd.DataFrame(stat_rows).to_csv(
        out / "descriptive_stats.csv", index=False, float_format="%.9g"
    )


def calibrate_files(pxrf_csv, out_dir, crm_scans_csv=None):
    """The calibrate subcommand: write acf.csv and pxrf_corrected.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if crm_scans_csv:
        scans = pxrf.read_crm_scans(crm_scans_csv)
        if not any(scans.values()):
            raise SchemaError(f"{crm_scans_csv}: no element rows found")
        table = pxrf.CorrectionFactorTable.from_crm_scans(scans)
    else:
        table = pxrf.CorrectionFactorTable.default()
    records = pxrf.read_pxrf_csv(pxrf_csv)
    corrected = pxrf.correct_records(records, table)
    pxrf.write_acf_csv(table, out / "acf.csv")
    pxrf.write_pxrf_csv(corrected, out / "pxrf_corrected.csv")
    return table
