"""Evaluation metrics and the report schema of the comparison tables."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from sslprobe.errors import ContractError, MissingArtifactError
from sslprobe.utils import sanitize_tag

Dataset = Literal["TINY", "FULL", "SYNTHETIC"]
Method = Literal["baseline", "ssl", "random"]

METHOD_LABELS = {"baseline": "Baseline", "ssl": "SSL", "random": "Random"}
METRIC_COLUMNS = {
    "top1": "Top-1 Acc",
    "top3": "Top-3 Acc",
    "top5": "Top-5 Acc",
    "mean_iou": "Mean IoU",
    "acc_iou_05": "Acc IoU 0.5",
    "acc_iou_07": "Acc IoU 0.7",
}


@dataclass(frozen=True)
class PredictionRecord:
    record_id: str
    logits: np.ndarray
    pred_box: np.ndarray
    target: int
    target_box: np.ndarray


def iou(a, b) -> np.ndarray | float:
    """|a & b| / |a | b| for corner boxes (..., 4); both empty gives 0.

    ``a`` may be mis-ordered (a predicted box); its width and height are
    clamped at zero.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    area_a = np.clip(a[..., 2] - a[..., 0], 0, None) * np.clip(a[..., 3] - a[..., 1], 0, None)
    area_b = np.clip(b[..., 2] - b[..., 0], 0, None) * np.clip(b[..., 3] - b[..., 1], 0, None)
    inter_w = np.clip(np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0]), 0, None)
    inter_h = np.clip(np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1]), 0, None)
    inter = inter_w * inter_h
    union = area_a + area_b - inter
    out = np.divide(inter, union, out=np.zeros_like(union), where=union > 0)
    return float(out) if out.ndim == 0 else out


def _ious(preds: list[PredictionRecord]) -> np.ndarray:
    if not preds:
        raise ContractError("Metrics need at least one prediction")
    return iou(np.stack([p.pred_box for p in preds]), np.stack([p.target_box for p in preds]))


def mean_iou(preds: list[PredictionRecord]) -> float:
    return float(np.mean(_ious(preds)))


def loc_accuracy(preds: list[PredictionRecord], threshold: float) -> float:
    """Fraction of records whose IoU is strictly greater than ``threshold``."""
    if not 0.0 < threshold < 1.0:
        raise ContractError(f"IoU threshold must be in (0, 1), got {threshold}")
    return float(np.mean(_ious(preds) > threshold))


def target_rank(logits: np.ndarray, target: int) -> int:
    """0-based rank of the target; ties go to the lower class index."""
    t = logits[target]
    above = np.sum(logits > t)
    tied_before = np.sum(logits[:target] == t)
    return int(above + tied_before)


def topn_accuracy(preds: list[PredictionRecord], n: int) -> float:
    if not preds:
        raise ContractError("Metrics need at least one prediction")
    k = len(preds[0].logits)
    if not 1 <= n <= k:
        raise ContractError(f"Top-{n} accuracy is undefined for {k} classes")
    return float(np.mean([target_rank(np.asarray(p.logits), p.target) < n for p in preds]))


class ReportContext(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dataset: Dataset
    method: Method
    n_per_class: int = Field(ge=1)
    seed: int = 0


class EvalReport(BaseModel):
    """One cell of the comparison tables."""

    model_config = ConfigDict(extra="forbid")

    dataset: Dataset
    method: Method
    n_per_class: int = Field(ge=1)
    seed: int = 0
    top1: float = Field(ge=0.0, le=1.0)
    top3: float | None = Field(None, ge=0.0, le=1.0)
    top5: float | None = Field(None, ge=0.0, le=1.0)
    mean_iou: float = Field(ge=0.0, le=1.0)
    acc_iou_05: float = Field(ge=0.0, le=1.0)
    acc_iou_07: float = Field(ge=0.0, le=1.0)
    num_records: int = 0
    num_classes: int = 0
    loc_threshold_rule: Literal["strict"] = "strict"
    extra: dict[str, float] = Field(default_factory=dict)
    config_digest: str = ""

    @model_validator(mode="after")
    def _ordered_thresholds(self):
        if self.acc_iou_07 > self.acc_iou_05:
            raise ValueError("acc_iou_07 cannot exceed acc_iou_05")
        return self

    def table_row(self) -> dict[str, object]:
        """Row in the column order of the comparison tables."""
        row: dict[str, object] = {"n": self.n_per_class, "Method": METHOD_LABELS[self.method]}
        for field, label in METRIC_COLUMNS.items():
            value = getattr(self, field)
            if value is not None:
                row[label] = value
        return row

    @property
    def file_stem(self) -> str:
        return sanitize_tag(f"report_{self.dataset}_{self.method}_n{self.n_per_class}_s{self.seed}")


def build_report(
    preds: list[PredictionRecord],
    context: ReportContext,
    thresholds: tuple[float, ...] = (0.5, 0.7),
    top_n: tuple[int, ...] = (1, 3, 5),
) -> EvalReport:
    """Assemble every metric; Top-3 needs K >= 3 and Top-5 is kept only when K > 5."""
    if not preds:
        raise ContractError("Cannot build a report from zero predictions")
    k = len(preds[0].logits)
    extra: dict[str, float] = {}
    for th in thresholds:
        if th not in (0.5, 0.7):
            extra[f"acc_iou_{th:g}"] = loc_accuracy(preds, th)
    for n in top_n:
        if n not in (1, 3, 5) and n <= k:
            extra[f"top{n}"] = topn_accuracy(preds, n)
    return EvalReport(
        dataset=context.dataset,
        method=context.method,
        n_per_class=context.n_per_class,
        seed=context.seed,
        top1=topn_accuracy(preds, 1),
        top3=topn_accuracy(preds, 3) if k >= 3 else None,
        top5=topn_accuracy(preds, 5) if k > 5 else None,
        mean_iou=mean_iou(preds),
        acc_iou_05=loc_accuracy(preds, 0.5),
        acc_iou_07=loc_accuracy(preds, 0.7),
        num_records=len(preds),
        num_classes=k,
        extra=extra,
    )


def reports_frame(reports: list[EvalReport]) -> pd.DataFrame:
    """Table rows sorted by n, then Baseline before SSL."""
    order = {label: i for i, label in enumerate(METHOD_LABELS.values())}
    frame = pd.DataFrame([r.table_row() for r in reports])
    frame = frame.sort_values(["n", "Method"], key=lambda s: s.map(order) if s.name == "Method" else s)
    return frame.reset_index(drop=True)


def render_table(reports: list[EvalReport]) -> str:
    return reports_frame(reports).to_string(index=False, float_format=lambda v: f"{v:.4f}")


def save_report(report: EvalReport, directory: str | Path) -> tuple[Path, Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    json_path = d / f"{report.file_stem}.json"
    csv_path = d / f"{report.file_stem}.csv"
    json_path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    pd.DataFrame([report.table_row()]).to_csv(csv_path, index=False, float_format="%.4f")
    return json_path, csv_path


def load_reports(directory: str | Path) -> list[EvalReport]:
    d = Path(directory)
    if not d.is_dir():
        raise MissingArtifactError(f"Report directory not found: {d}")
    reports = [
        EvalReport.model_validate(json.loads(p.read_text(encoding="utf-8")))
        for p in sorted(d.rglob("report_*.json"))
    ]
    if not reports:
        raise MissingArtifactError(f"No report_*.json files under {d}")
    return reports
