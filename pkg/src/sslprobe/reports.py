"""Comparison of two methods over the number of labeled images per class."""

from pathlib import Path

import pandas as pd

from sslprobe.errors import ContractError
from sslprobe.metrics import METHOD_LABELS, METRIC_COLUMNS, EvalReport


def _long_frame(reports: list[EvalReport]) -> pd.DataFrame:
    rows = []
    for r in reports:
        for field in METRIC_COLUMNS:
            value = getattr(r, field)
            if value is not None:
                rows.append(
                    {"dataset": r.dataset, "method": r.method, "n": r.n_per_class, "seed": r.seed,
                     "metric": field, "value": value}
                )
    return pd.DataFrame(rows)


def aggregate_seeds(reports: list[EvalReport]) -> pd.DataFrame:
    """Mean and population std of each metric over seeds, per (dataset, method, n)."""
    frame = _long_frame(reports)
    grouped = frame.groupby(["dataset", "method", "n", "metric"], sort=True)["value"]
    out = grouped.agg(mean="mean", std=lambda v: v.std(ddof=0), seeds="count").reset_index()
    return out


def compare_reports(
    reports: list[EvalReport], method: str = "ssl", reference: str = "baseline"
) -> pd.DataFrame:
    """Per-metric ``method - reference`` differences for every n both methods share.

    Columns: dataset, n, metric, reference_mean, reference_std, method_mean,
    method_std, difference, seeds.
    """
    agg = aggregate_seeds(reports)
    ours = agg[agg["method"] == method].drop(columns="method")
    theirs = agg[agg["method"] == reference].drop(columns="method")
    if ours.empty or theirs.empty:
        raise ContractError(f"Comparison needs reports for both {method!r} and {reference!r}")
    merged = ours.merge(theirs, on=["dataset", "n", "metric"], suffixes=("_m", "_r"))
    merged["difference"] = merged["mean_m"] - merged["mean_r"]
    merged = merged.rename(
        columns={
            "mean_m": "method_mean",
            "std_m": "method_std",
            "mean_r": "reference_mean",
            "std_r": "reference_std",
            "seeds_m": "seeds",
        }
    ).drop(columns="seeds_r")
    order = {m: i for i, m in enumerate(METRIC_COLUMNS)}
    merged = merged.sort_values(["dataset", "n", "metric"], key=lambda s: s.map(order) if s.name == "metric" else s)
    return merged[
        ["dataset", "n", "metric", "reference_mean", "reference_std", "method_mean", "method_std", "difference", "seeds"]
    ].reset_index(drop=True)


def difference_table(comparison: pd.DataFrame) -> pd.DataFrame:
    """Wide form: one row per (dataset, n), one column per metric difference."""
    wide = comparison.pivot_table(index=["dataset", "n"], columns="metric", values="difference")
    wide = wide[[m for m in METRIC_COLUMNS if m in wide.columns]]
    wide.columns = [METRIC_COLUMNS[m] for m in wide.columns]
    return wide.reset_index()


def render_comparison(comparison: pd.DataFrame, method: str = "ssl", reference: str = "baseline") -> str:
    wide = difference_table(comparison)
    title = f"{METHOD_LABELS[method]} - {METHOD_LABELS[reference]}"
    body = wide.to_string(index=False, float_format=lambda v: f"{v:+.4f}")
    return f"{title}\n{body}\n"


def plot_differences(comparison: pd.DataFrame, path: str | Path, metrics: tuple[str, ...] | None = None) -> Path:
    """Grouped bars of per-metric differences over n, one panel per dataset."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    metrics = metrics or ("top1", "top3", "mean_iou", "acc_iou_05")
    datasets = sorted(comparison["dataset"].unique())
    fig, axes = plt.subplots(len(datasets), 1, figsize=(8, 3.2 * len(datasets)), squeeze=False)
    for ax, dataset in zip(axes[:, 0], datasets):
        part = comparison[(comparison["dataset"] == dataset) & comparison["metric"].isin(metrics)]
        wide = part.pivot_table(index="n", columns="metric", values="difference")
        wide = wide[[m for m in metrics if m in wide.columns]]
        wide.columns = [METRIC_COLUMNS[m] for m in wide.columns]
        wide.plot.bar(ax=ax, rot=0)
        ax.axhline(0.0, color="black", linewidth=0.8)
        ax.set_title(dataset)
        ax.set_xlabel("Images per class")
        ax.set_ylabel("Difference")
    fig.tight_layout()
    p = Path(path)
    fig.savefig(p, dpi=120)
    plt.close(fig)
    return p


def plot_metric_curves(reports: list[EvalReport], path: str | Path, metrics: tuple[str, ...]) -> Path:
    """Metric value over n, one line per (method, metric), one panel per dataset."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    agg = aggregate_seeds(reports)
    agg = agg[agg["metric"].isin(metrics)]
    if agg.empty:
        raise ContractError(f"No report values for metrics {metrics}")
    datasets = sorted(agg["dataset"].unique())
    fig, axes = plt.subplots(1, len(datasets), figsize=(5 * len(datasets), 3.6), squeeze=False)
    for ax, dataset in zip(axes[0], datasets):
        part = agg[agg["dataset"] == dataset]
        for (method, metric), line in part.groupby(["method", "metric"]):
            line = line.sort_values("n")
            ax.plot(line["n"], line["mean"], marker="o", label=f"{METHOD_LABELS[method]} {METRIC_COLUMNS[metric]}")
        ax.set_xscale("log")
        ax.set_title(dataset)
        ax.set_xlabel("Images per class")
        ax.legend(fontsize=7)
    fig.tight_layout()
    p = Path(path)
    fig.savefig(p, dpi=120)
    plt.close(fig)
    return p
