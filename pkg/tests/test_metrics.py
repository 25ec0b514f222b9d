import numpy as np
import pytest
from pydantic import ValidationError

from sslprobe.errors import ContractError, MissingArtifactError
from sslprobe.metrics import (
    EvalReport,
    PredictionRecord,
    ReportContext,
    build_report,
    iou,
    loc_accuracy,
    load_reports,
    mean_iou,
    render_table,
    reports_frame,
    save_report,
    target_rank,
    topn_accuracy,
)

FULL_BOX = np.array([0.0, 0.0, 1.0, 1.0])


def _pred(logits, target: int = 0, pred_box=FULL_BOX, target_box=FULL_BOX, record_id: str = "r") -> PredictionRecord:
    return PredictionRecord(
        record_id=record_id,
        logits=np.asarray(logits, dtype=np.float64),
        pred_box=np.asarray(pred_box, dtype=np.float64),
        target=target,
        target_box=np.asarray(target_box, dtype=np.float64),
    )


def _height_preds(heights) -> list[PredictionRecord]:
    return [_pred([1.0, 0.0], pred_box=[0.0, 0.0, 1.0, v]) for v in heights]


def _random_preds(rng, count: int, k: int) -> list[PredictionRecord]:
    preds = []
    for i in range(count):
        gt = np.sort(rng.uniform(size=2)), np.sort(rng.uniform(size=2))
        pb = np.sort(rng.uniform(size=2)), np.sort(rng.uniform(size=2))
        preds.append(
            _pred(
                rng.normal(size=k),
                target=int(rng.integers(k)),
                pred_box=[pb[0][0], pb[1][0], pb[0][1], pb[1][1]],
                target_box=[gt[0][0], gt[1][0], gt[0][1], gt[1][1]],
                record_id=f"r{i}",
            )
        )
    return preds


def test_iou_cases() -> None:
    box = [0.1, 0.2, 0.7, 0.9]
    assert iou(box, box) == pytest.approx(1.0)
    assert iou([0.0, 0.0, 0.2, 0.2], [0.5, 0.5, 0.9, 0.9]) == 0.0
    assert iou([0.0, 0.0, 0.5, 0.5], [0.25, 0.25, 0.75, 0.75]) == pytest.approx(1 / 7)
    assert iou([0.3, 0.3, 0.3, 0.3], [0.3, 0.3, 0.3, 0.3]) == 0.0


def test_iou_batched() -> None:
    a = np.array([[0.0, 0.0, 0.5, 0.5], [0.0, 0.0, 1.0, 1.0]])
    b = np.array([[0.25, 0.25, 0.75, 0.75], [0.0, 0.0, 1.0, 0.5]])
    np.testing.assert_allclose(iou(a, b), [1 / 7, 0.5])


def test_mean_iou_and_accuracy() -> None:
    preds = _height_preds([0.6, 0.4, 0.8])
    assert mean_iou(preds) == pytest.approx(0.6)
    assert loc_accuracy(preds, 0.5) == pytest.approx(2 / 3)
    assert loc_accuracy(preds, 0.7) == pytest.approx(1 / 3)


def test_threshold_is_strict() -> None:
    assert loc_accuracy(_height_preds([0.5]), 0.5) == 0.0


@pytest.mark.parametrize("threshold", [0.0, 1.0, -0.2, 1.3])
def test_threshold_domain(threshold) -> None:
    with pytest.raises(ContractError):
        loc_accuracy(_height_preds([0.6]), threshold)


def test_accuracy_decreases_with_threshold(rng) -> None:
    preds = _random_preds(rng, 200, 4)
    values = [loc_accuracy(preds, t) for t in np.linspace(0.05, 0.95, 19)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert loc_accuracy(preds, 0.5) >= loc_accuracy(preds, 0.7)


def test_target_rank_ties_go_to_lower_index() -> None:
    logits = np.array([1.0, 1.0, 1.0])
    assert [target_rank(logits, t) for t in range(3)] == [0, 1, 2]
    assert target_rank(np.array([0.1, 0.5, 0.4]), 2) == 1


def test_topn_accuracy() -> None:
    preds = [
        _pred([0.1, 0.5, 0.4], target=2),
        _pred([0.9, 0.05, 0.05], target=0),
        _pred([0.3, 0.2, 0.5], target=1),
    ]
    assert topn_accuracy(preds, 1) == pytest.approx(1 / 3)
    assert topn_accuracy(preds, 2) == pytest.approx(2 / 3)
    assert topn_accuracy(preds, 3) == 1.0
    with pytest.raises(ContractError):
        topn_accuracy(preds, 4)
    with pytest.raises(ContractError):
        topn_accuracy([], 1)


def test_metrics_ignore_record_order(rng) -> None:
    preds = _random_preds(rng, 50, 6)
    shuffled = [preds[i] for i in rng.permutation(len(preds))]
    assert mean_iou(shuffled) == pytest.approx(mean_iou(preds), abs=1e-12)
    assert loc_accuracy(shuffled, 0.5) == loc_accuracy(preds, 0.5)
    assert topn_accuracy(shuffled, 3) == topn_accuracy(preds, 3)


@pytest.mark.parametrize("k, has_top3, has_top5", [(2, False, False), (5, True, False), (6, True, True)])
def test_report_topn_columns(rng, k, has_top3, has_top5) -> None:
    preds = _random_preds(rng, 30, k)
    report = build_report(preds, ReportContext(dataset="SYNTHETIC", method="ssl", n_per_class=10))
    assert (report.top3 is not None) == has_top3
    assert (report.top5 is not None) == has_top5
    assert report.num_records == 30
    assert report.num_classes == k
    assert report.loc_threshold_rule == "strict"


def test_report_extra_thresholds_and_ranks(rng) -> None:
    preds = _random_preds(rng, 30, 4)
    context = ReportContext(dataset="TINY", method="baseline", n_per_class=10)
    report = build_report(preds, context, thresholds=(0.3, 0.5, 0.7), top_n=(1, 2))
    assert report.extra["acc_iou_0.3"] == loc_accuracy(preds, 0.3)
    assert report.extra["top2"] == topn_accuracy(preds, 2)
    with pytest.raises(ContractError):
        build_report([], context)


def test_tiny_table_row(tiny_table) -> None:
    row = tiny_table[1].table_row()
    assert list(row) == ["n", "Method", "Top-1 Acc", "Top-3 Acc", "Mean IoU", "Acc IoU 0.5", "Acc IoU 0.7"]
    assert row["n"] == 10
    assert row["Method"] == "SSL"
    assert row["Mean IoU"] == 0.4759


def test_full_table_has_top5(full_table) -> None:
    assert list(reports_frame(full_table).columns) == [
        "n",
        "Method",
        "Top-1 Acc",
        "Top-3 Acc",
        "Top-5 Acc",
        "Mean IoU",
        "Acc IoU 0.5",
        "Acc IoU 0.7",
    ]
    assert "Top-5 Acc" not in reports_frame([full_table[0].model_copy(update={"top5": None})]).columns


def test_report_validation() -> None:
    fields = dict(dataset="TINY", method="ssl", n_per_class=10, top1=0.5, mean_iou=0.5, acc_iou_05=0.4, acc_iou_07=0.2)
    EvalReport(**fields)
    with pytest.raises(ValidationError):
        EvalReport(**(fields | {"dataset": ""}))
    with pytest.raises(ValidationError):
        EvalReport(**(fields | {"acc_iou_07": 0.5}))
    with pytest.raises(ValidationError):
        EvalReport(**(fields | {"top1": 1.2}))
    with pytest.raises(ValidationError):
        EvalReport(**(fields | {"n_per_class": 0}))


def test_render_order(tiny_table) -> None:
    frame = reports_frame(list(reversed(tiny_table)))
    assert frame["n"].tolist() == [10, 10, 20, 20, 50, 50, 100, 100, 200, 200, 500, 500]
    assert frame["Method"].tolist()[:2] == ["Baseline", "SSL"]
    text = render_table(tiny_table)
    assert text.splitlines()[1].split()[:3] == ["10", "Baseline", "0.8262"]


def test_save_and_load_reports(tmp_path, tiny_table) -> None:
    for report in tiny_table[:4]:
        save_report(report, tmp_path / report.method / f"n{report.n_per_class}")
    loaded = load_reports(tmp_path)
    key = lambda r: (r.n_per_class, r.method)  # noqa: E731
    assert sorted(loaded, key=key) == sorted(tiny_table[:4], key=key)
    assert (tmp_path / "ssl" / "n10" / "report_TINY_ssl_n10_s0.csv").exists()


def test_load_reports_missing(tmp_path) -> None:
    with pytest.raises(MissingArtifactError):
        load_reports(tmp_path / "absent")
    with pytest.raises(MissingArtifactError):
        load_reports(tmp_path)


def test_topn_grows_with_n(rng) -> None:
    preds = _random_preds(rng, 100, 8)
    values = [topn_accuracy(preds, n) for n in range(1, 9)]
    assert all(a <= b for a, b in zip(values, values[1:]))
    assert values[-1] == 1.0
