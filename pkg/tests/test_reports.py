import pytest

from sslprobe.errors import ContractError
from sslprobe.reports import (
    aggregate_seeds,
    compare_reports,
    difference_table,
    plot_differences,
    plot_metric_curves,
    render_comparison,
)


def _difference(comparison, dataset: str, n: int, metric: str) -> float:
    row = comparison[(comparison["dataset"] == dataset) & (comparison["n"] == n) & (comparison["metric"] == metric)]
    assert len(row) == 1
    return float(row["difference"].iloc[0])


def test_full_differences(full_table) -> None:
    comparison = compare_reports(full_table, "ssl", "baseline")
    assert _difference(comparison, "FULL", 3, "mean_iou") == pytest.approx(0.2484, abs=1e-4)
    assert _difference(comparison, "FULL", 3, "top1") == pytest.approx(0.2223 - 0.6259, abs=1e-4)
    assert _difference(comparison, "FULL", 200, "acc_iou_07") == pytest.approx(0.0230, abs=1e-4)
    assert set(comparison["n"]) == {3, 5, 10, 20, 50, 100, 200}
    assert (comparison["seeds"] == 1).all()


def test_tiny_differences(tiny_table) -> None:
    comparison = compare_reports(tiny_table)
    assert _difference(comparison, "TINY", 10, "top1") == pytest.approx(-0.3822, abs=1e-4)
    assert _difference(comparison, "TINY", 10, "acc_iou_05") == pytest.approx(0.3299, abs=1e-4)
    assert "top5" not in set(comparison["metric"])
    assert comparison["metric"].tolist()[:6] == ["top1", "top3", "mean_iou", "acc_iou_05", "acc_iou_07", "top1"]


def test_reversed_comparison_negates(tiny_table) -> None:
    forward = compare_reports(tiny_table, "ssl", "baseline")
    backward = compare_reports(tiny_table, "baseline", "ssl")
    assert (forward["difference"] + backward["difference"]).abs().max() < 1e-12


def test_seed_aggregation_uses_population_std(tiny_table) -> None:
    base = tiny_table[0]
    reports = [
        base.model_copy(update={"seed": 0, "top1": 0.4}),
        base.model_copy(update={"seed": 1, "top1": 0.6}),
    ]
    agg = aggregate_seeds(reports)
    row = agg[agg["metric"] == "top1"].iloc[0]
    assert row["mean"] == pytest.approx(0.5)
    assert row["std"] == pytest.approx(0.1)
    assert row["seeds"] == 2


def test_comparison_needs_both_methods(tiny_table) -> None:
    ssl_only = [r for r in tiny_table if r.method == "ssl"]
    with pytest.raises(ContractError):
        compare_reports(ssl_only, "ssl", "baseline")


def test_difference_table(tiny_table) -> None:
    wide = difference_table(compare_reports(tiny_table))
    assert list(wide.columns) == ["dataset", "n", "Top-1 Acc", "Top-3 Acc", "Mean IoU", "Acc IoU 0.5", "Acc IoU 0.7"]
    assert wide["n"].tolist() == [10, 20, 50, 100, 200, 500]
    text = render_comparison(compare_reports(tiny_table))
    assert text.startswith("SSL - Baseline\n")
    assert "-0.3822" in text


def test_plots_written(tmp_path, tiny_table, full_table) -> None:
    reports = tiny_table + full_table
    bars = plot_differences(compare_reports(reports), tmp_path / "differences.png")
    curves = plot_metric_curves(reports, tmp_path / "curves.png", ("top1", "mean_iou"))
    for path in (bars, curves):
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    with pytest.raises(ContractError):
        plot_metric_curves(tiny_table, tmp_path / "none.png", ("top5",))
