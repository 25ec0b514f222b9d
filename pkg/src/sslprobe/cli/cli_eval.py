import logging
from pathlib import Path

from sslprobe.data import load_image
from sslprobe.errors import ConfigError, MissingArtifactError
from sslprobe.experiment import labeled_test, labeled_train, run_dir
from sslprobe.explain import comparison_panel, gradcam, overlay, save_heatmap
from sslprobe.metrics import (
    METHOD_LABELS,
    EvalReport,
    ReportContext,
    build_report,
    load_reports,
    render_table,
    reports_frame,
    save_report,
)
from sslprobe.model import load_detector
from sslprobe.reports import compare_reports, difference_table, plot_differences, plot_metric_curves, render_comparison
from sslprobe.settings import ExperimentConfig
from sslprobe.train import predict
from sslprobe.utils import sanitize_tag

logger = logging.getLogger(__name__)


def _detector_paths(config: ExperimentConfig, detectors: list[str | Path] | None) -> list[Path]:
    if detectors:
        return [Path(d) for d in detectors]
    found = sorted((Path(config.output_dir) / "train").rglob("detector.ckpt"))
    if not found:
        raise MissingArtifactError(f"No detector.ckpt under {Path(config.output_dir) / 'train'}")
    return found


def eval_command(
    config: ExperimentConfig,
    detectors: list[str | Path] | None = None,
    force: bool = False,
    verbose: bool = False,
) -> list[EvalReport]:
    """Evaluate detectors on the held-out test split; one report per detector."""
    ds = config.dataset
    reports = []
    for path in _detector_paths(config, detectors):
        detector, ckpt = load_detector(path)
        test = labeled_test(config, detector.class_names)
        preds = predict(detector, test, ds.image_side, ds.mean, ds.std, config.eval.batch_size)
        n = int(ckpt.extra.get("n_per_class", 1))
        context = ReportContext(
            dataset=ds.regime,
            method=ckpt.method,
            n_per_class=n,
            seed=int(ckpt.extra.get("seed", config.detector.seed)),
        )
        report = build_report(preds, context, tuple(config.eval.thresholds), tuple(config.eval.top_n))
        report = report.model_copy(update={"config_digest": config.digest()})
        directory = run_dir(config, "eval", ckpt.method, f"n{n}", force=force)
        json_path, _ = save_report(report, directory)
        print(f"Saved {json_path}")
        reports.append(report)
    print(render_table(reports))
    return reports


def gradcam_command(
    config: ExperimentConfig,
    detector_path: str | Path,
    record_ids: list[str] | None = None,
    split: str = "test",
    limit: int = 8,
    compare: str | Path | None = None,
    force: bool = False,
    verbose: bool = False,
) -> list[Path]:
    """Heatmap overlays (PNG) plus raw maps (.bin/.json) for selected records.

    With ``compare`` a second detector explains the same records and each PNG
    is a side-by-side panel: image, ``compare`` overlay, ``detector_path``
    overlay. Raw maps are then written as ``<id>_<method>.bin/.json``.
    """
    detector, ckpt = load_detector(detector_path)
    explained = [(detector, ckpt)]
    if compare is not None:
        other, other_ckpt = load_detector(compare)
        if other.class_names != detector.class_names:
            raise ConfigError(f"Cannot compare detectors over {other.class_names} and {detector.class_names}")
        explained.insert(0, (other, other_ckpt))

    manifest = labeled_test(config, detector.class_names) if split == "test" else labeled_train(config)
    if record_ids:
        try:
            records = [manifest.find(rid) for rid in record_ids]
        except KeyError as e:
            raise MissingArtifactError(f"Record {e.args[0]!r} is not in the {split} manifest") from e
    else:
        records = list(manifest.records[:limit])

    ds = config.dataset
    settings = config.gradcam
    n = ckpt.extra.get("n_per_class", 0)
    tag = "_vs_".join(c.method for _, c in explained)
    directory = run_dir(config, "gradcam", f"{tag}_n{n}", force=force)
    saved = []
    for record in records:
        image, _ = load_image(record, ds.image_side, ds.mean, ds.std)
        target = None
        if settings.target == "ground-truth" and record.is_labeled:
            target = detector.class_names.index(record.category)
        heatmaps = [gradcam(d, image, target, settings.score, record.record_id) for d, _ in explained]
        stem = directory / sanitize_tag(record.record_id)
        png = stem.with_suffix(".png")
        if compare is None:
            overlay(image, heatmaps[0], settings.opacity, ds.mean, ds.std).save(png)
            save_heatmap(heatmaps[0], stem)
        else:
            labels = [METHOD_LABELS.get(c.method, c.method) for _, c in explained]
            comparison_panel(image, heatmaps, labels, settings.opacity, ds.mean, ds.std).save(png)
            for heatmap, (_, c) in zip(heatmaps, explained, strict=True):
                save_heatmap(heatmap, stem.with_name(f"{stem.name}_{c.method}"))
        saved.append(png)
    print(f"Saved {len(saved)} heatmaps to {directory}")
    return saved


def compare_command(
    config: ExperimentConfig,
    report_dir: str | Path | None = None,
    method: str = "ssl",
    reference: str = "baseline",
    force: bool = False,
    verbose: bool = False,
) -> Path:
    """Tables in report column order, method-minus-reference differences and plots over n."""
    reports = load_reports(report_dir or Path(config.output_dir) / "eval")
    comparison = compare_reports(reports, method, reference)
    directory = run_dir(config, "compare", force=force)

    reports_frame(reports).to_csv(directory / "reports_table.csv", index=False, float_format="%.4f")
    comparison.to_csv(directory / "comparison.csv", index=False, float_format="%.4f")
    difference_table(comparison).to_csv(directory / "differences.csv", index=False, float_format="%.4f")
    text = f"{render_table(reports)}\n\n{render_comparison(comparison, method, reference)}"
    (directory / "comparison.txt").write_text(text, encoding="utf-8")
    plot_differences(comparison, directory / "differences.png")
    plot_metric_curves(reports, directory / "curves_accuracy.png", ("top1", "top3"))
    plot_metric_curves(reports, directory / "curves_localization.png", ("acc_iou_05", "acc_iou_07"))

    print(text)
    print(f"Saved {directory}")
    return directory
