"""Matplotlib renderings of the report artifacts.

Everything here consumes the plot-ready report dict produced by the
pipeline; the metric computations themselves never touch graphics.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .fusion import ZONES

_CONFIG_COLORS = {
    "IFS": "#d1814e",
    "IFS_AVS": "#7a9e43",
    "IFS_AVS_PXRF": "#4472a8",
    "PXRF": "#9467bd",
}


def render_report_figures(report, out_dir):
    """Write the standard figure set for one pipeline report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if report["relative_change_vs_pxrf"]:
        written.append(relative_change_figure(report, out / "relative_change.png"))
    written.append(predicted_vs_measured_figure(report, out / "predicted_vs_measured.png"))
    if any(b.get("importance_top") for t in report["bundles"].values() for b in t.values()):
        written.append(importance_figure(report, out / "variable_importance.png"))
    if report["zone_holdout_rmse"] is not None:
        written.append(zone_holdout_figure(report, out / "zone_holdout.png"))
    return [w for w in written if w]


def relative_change_figure(report, path):
    targets = [t for t in report["targets"] if t in report["relative_change_vs_pxrf"]]
    if not targets:
        return None
    kinds = [k for k in report["configs"] if k != "PXRF"]
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.2))
    width = 0.8 / max(1, len(kinds))
    xs = np.arange(len(targets))
    for panel, metric_key, title in (
        (0, "r2_test_pct", "Test R2 change vs PXRF alone (%)"),
        (1, "rmse_test_pct", "Test RMSE change vs PXRF alone (%)"),
    ):
        ax = axes[panel]
        for i, kind in enumerate(kinds):
            vals = [report["relative_change_vs_pxrf"][t][kind][metric_key] for t in targets]
            ax.bar(xs + i * width, vals, width, label=kind,
                   color=_CONFIG_COLORS.get(kind, "gray"))
        ax.axhline(0.0, color="black", linewidth=0.8)
        ax.set_xticks(xs + width * (len(kinds) - 1) / 2)
        ax.set_xticklabels(targets)
        ax.set_title(title, fontsize=10)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def predicted_vs_measured_figure(report, path):
    targets = report["targets"]
    kinds = report["configs"]
    best_kind = "IFS_AVS_PXRF" if "IFS_AVS_PXRF" in kinds else kinds[0]
    fig, axes = plt.subplots(1, len(targets), figsize=(3.2 * len(targets), 3.4))
    if len(targets) == 1:
        axes = [axes]
    for ax, target in zip(axes, targets):
        series = report["bundles"][target][best_kind]["test_series"]
        measured = np.array(series["measured"])
        predicted = np.array(series["predicted"])
        ax.scatter(measured, predicted, s=12, alpha=0.7,
                   color=_CONFIG_COLORS.get(best_kind, "gray"), edgecolors="none")
        lo = min(measured.min(), predicted.min())
        hi = max(measured.max(), predicted.max())
        ax.plot([lo, hi], [lo, hi], "r--", linewidth=0.8)
        r2 = report["bundles"][target][best_kind]["r2_test"]
        ax.set_title(f"{target} ({best_kind})\ntest R2 = {r2:.2f}", fontsize=9)
        ax.set_xlabel("measured")
    axes[0].set_ylabel("predicted")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def importance_figure(report, path, top_n=15):
    targets = [
        t for t in report["targets"]
        if any(report["bundles"][t][k].get("importance_top") for k in report["configs"])
    ]
    if not targets:
        return None
    fig, axes = plt.subplots(1, len(targets), figsize=(3.4 * len(targets), 4.6))
    if len(targets) == 1:
        axes = [axes]
    for ax, target in zip(axes, targets):
        kind = next(
            k for k in ("IFS_AVS_PXRF", "IFS_AVS", "IFS", "PXRF")
            if k in report["configs"] and report["bundles"][target][k].get("importance_top")
        )
        top = report["bundles"][target][kind]["importance_top"][:top_n]
        names = [n for n, _ in reversed(top)]
        scores = [s for _, s in reversed(top)]
        ax.barh(range(len(names)), scores, color=_CONFIG_COLORS.get(kind, "gray"))
        ax.set_yticks(range(len(names)))
        ax.set_yticklabels(names, fontsize=6)
        ax.set_title(f"{target} ({kind})", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def zone_holdout_figure(report, path):
    grid = report["zone_holdout_rmse"]
    targets = report["targets"]
    data = np.array(
        [[np.nan if grid[z][t] is None else grid[z][t] for t in targets] for z in ZONES]
    )
    # Column-normalized shading keeps targets with large units readable.
    col_max = np.nanmax(data, axis=0)
    shaded = data / np.where(col_max > 0, col_max, 1.0)
    fig, ax = plt.subplots(figsize=(1.4 * len(targets) + 2, 4))
    ax.imshow(shaded, cmap="YlOrRd", aspect="auto", vmin=0, vmax=1)
    ax.set_xticks(range(len(targets)))
    ax.set_xticklabels(targets)
    ax.set_yticks(range(len(ZONES)))
    ax.set_yticklabels(ZONES)
    for i in range(len(ZONES)):
        for j in range(len(targets)):
            if np.isfinite(data[i, j]):
                ax.text(j, i, f"{data[i, j]:.2f}", ha="center", va="center", fontsize=8)
    ax.set_title("Holdout RMSE by zone", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def pca_figures(result, row_labels, column_names, out_prefix):
    """Biplot and scree figure for a PCA result."""
    out_prefix = Path(out_prefix)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(6, 5.4))
    scores = result.scores
    ax.scatter(scores[:, 0], scores[:, 1] if scores.shape[1] > 1 else np.zeros(len(scores)),
               s=14, alpha=0.6, color="#4472a8", edgecolors="none")
    if result.loadings.shape[1] > 1:
        span = max(np.abs(scores[:, :2]).max(), 1e-9)
        arrows = result.loadings[:, :2] * span * 0.9
        # Label only the strongest arrows to keep wide matrices readable.
        strength = np.linalg.norm(result.loadings[:, :2], axis=1)
        show = np.argsort(-strength)[: min(12, len(column_names))]
        for j in show:
            ax.annotate(
                "", xy=(arrows[j, 0], arrows[j, 1]), xytext=(0, 0),
                arrowprops={"arrowstyle": "->", "color": "#b33"},
            )
            ax.text(arrows[j, 0] * 1.05, arrows[j, 1] * 1.05, column_names[j],
                    fontsize=7, color="#b33")
    ax.set_xlabel(f"PC1 ({result.variance_explained[0]:.1f}%)")
    if len(result.variance_explained) > 1:
        ax.set_ylabel(f"PC2 ({result.variance_explained[1]:.1f}%)")
    ax.axhline(0, color="gray", linewidth=0.5)
    ax.axvline(0, color="gray", linewidth=0.5)
    fig.tight_layout()
    biplot = out_prefix.parent / (out_prefix.name + "_biplot.png")
    fig.savefig(biplot, dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5, 3.4))
    k = min(len(result.variance_explained), 15)
    ax.bar(range(1, k + 1), result.variance_explained[:k], color="#4472a8")
    ax.set_xlabel("component")
    ax.set_ylabel("variance explained (%)")
    fig.tight_layout()
    scree = out_prefix.parent / (out_prefix.name + "_scree.png")
    fig.savefig(scree, dpi=150)
    plt.close(fig)
    return [biplot, scree]
