"""Matplotlib renderers for the report paths (files only, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def render_loss_curve(losses, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(losses)), losses, lw=1.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title("training loss")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_stage_metrics(record, path: str | Path) -> None:
    names = list(record.stage_seeds.keys())
    coverage = [record.stage_quality[n].coverage for n in names]
    precision = [record.stage_quality[n].precision for n in names]
    counts = [len(record.stage_seeds[n]) for n in names]
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    x = range(len(names))
    axes[0].bar([i - 0.2 for i in x], coverage, width=0.4, label="coverage")
    if all(p is not None for p in precision):
        axes[0].bar([i + 0.2 for i in x], precision, width=0.4, label="precision")
    axes[0].set_xticks(list(x), names)
    axes[0].set_ylim(0, 1.55)
    axes[0].legend()
    axes[0].set_title("seed quality per stage")
    axes[1].bar(x, counts, color="tab:gray")
    axes[1].set_xticks(list(x), names)
    axes[1].set_title("seed count per stage")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_type_comparison(rows, path: str | Path) -> None:
    """Grouped bars of precision / coverage / hits@1 per strategy,
    averaged over runs."""
    strategies = []
    for row in rows:
        if row.strategy not in strategies:
            strategies.append(row.strategy)
    metrics = {"precision": {}, "coverage": {}, "hits@1": {}}
    for s in strategies:
        subset = [r for r in rows if r.strategy == s]
        metrics["precision"][s] = sum(r.quality.precision or 0.0 for r in subset) / len(subset)
        metrics["coverage"][s] = sum(r.quality.coverage for r in subset) / len(subset)
        metrics["hits@1"][s] = sum(r.ranking.hits1 for r in subset) / len(subset)
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.25
    for offset, (mname, values) in enumerate(metrics.items()):
        xs = [i + (offset - 1) * width for i in range(len(strategies))]
        ax.bar(xs, [values[s] for s in strategies], width=width, label=mname)
    ax.set_xticks(range(len(strategies)), strategies)
    ax.set_ylim(0, 1.55)
    ax.legend()
    ax.set_title("seed strategies, mean over runs")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_coverage_components(report, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    g_n = max(report.g_n, 1e-30)
    g_edge = max(report.g_edge, 1)
    parts = {
        "aggregated": report.s_a / (2 * g_n),
        "edges": report.edge_covered / (2 * g_edge),
        "scattered": report.s_f / g_n,
    }
    ax.bar(list(parts.keys()), list(parts.values()))
    ax.set_title(f"coverage components (total {report.coverage:.3f})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
