"""ssl-probe CLI: contrastive pre-training and frozen linear-probe detection.

Command hierarchy:
  sslprobe synth             - Generate the synthetic train/test/pool manifests
  sslprobe pretrain          - SSL pre-training on the unlabeled pool
  sslprobe import-baseline   - Write the ImageNet (or random) comparison backbone
  sslprobe train CKPT        - Train detector heads on a frozen backbone, per n
  sslprobe eval [DETECTORS]  - Evaluate detectors on the test split
  sslprobe gradcam DETECTOR  - Grad-CAM heatmaps for selected records
  sslprobe compare           - Method-minus-reference tables and plots over n

Usage examples:
  sslprobe synth -c configs/ci.toml
  sslprobe pretrain -c configs/ci.toml -v
  sslprobe import-baseline -c configs/ci.toml --source random
  sslprobe train runs/ci/pretrain/backbone.ckpt -c configs/ci.toml
  sslprobe train runs/ci/random/backbone.ckpt -c configs/ci.toml
  sslprobe eval -c configs/ci.toml
  sslprobe compare -c configs/ci.toml --reference random
  sslprobe gradcam runs/ci/train/ssl/n32/detector.ckpt --compare runs/ci/train/random/n32/detector.ckpt

Every command accepts --config, --out, --seed, --force and --verbose.
The dataset root can be overridden with SSLPROBE_DATA_ROOT.

Exit codes: 1 invalid config, 2 missing artifact, 3 runtime failure.
"""

import logging
from pathlib import Path
from typing import Annotated

import typer

from sslprobe.cli.cli_data import synth_command
from sslprobe.cli.cli_eval import compare_command, eval_command, gradcam_command
from sslprobe.cli.cli_train import import_baseline_command, pretrain_command, train_command
from sslprobe.errors import SSLProbeError
from sslprobe.settings import ExperimentConfig, load_config

app = typer.Typer(no_args_is_help=True)

ConfigOption = Annotated[Path | None, typer.Option("--config", "-c", help="TOML config file")]
OutOption = Annotated[Path | None, typer.Option("--out", "-o", help="Output directory (overrides the config)")]
SeedOption = Annotated[int | None, typer.Option("--seed", help="Seed for subsets, splits and training")]
ForceOption = Annotated[bool, typer.Option("--force", help="Overwrite a non-empty output directory")]
VerboseOption = Annotated[bool, typer.Option("--verbose", "-v", help="Debug logging and progress bars")]


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _run(command, config: Path | None, out: Path | None, seed: int | None, verbose: bool, *args, **kwargs):
    _setup_logging(verbose)
    try:
        experiment: ExperimentConfig = load_config(config).with_overrides(out, seed)
        return command(experiment, *args, verbose=verbose, **kwargs)
    except SSLProbeError as e:
        typer.echo(f"Error: {e}", err=True)
        raise typer.Exit(code=e.exit_code)


@app.command(help="Generate the synthetic train/test/pool manifests")
def synth(
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    force: ForceOption = False,
    verbose: VerboseOption = False,
):
    _run(synth_command, config, out, seed, verbose, force=force)


@app.command(help="Contrastive pre-training of the backbone on the unlabeled pool")
def pretrain(
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    force: ForceOption = False,
    verbose: VerboseOption = False,
):
    _run(pretrain_command, config, out, seed, verbose, force=force)


@app.command(help="Write a comparison backbone from ImageNet weights or a random init")
def import_baseline(
    source: str = typer.Option("imagenet", "--source", "-s", help="imagenet or random"),
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    force: ForceOption = False,
    verbose: VerboseOption = False,
):
    _run(import_baseline_command, config, out, seed, verbose, source=source, force=force)


@app.command(help="Train detector heads on a frozen backbone for each images-per-class value")
def train(
    checkpoint: Path = typer.Argument(..., help="Backbone checkpoint"),
    n: list[int] | None = typer.Option(None, "--n", help="Images per class (repeatable, default: config n list)"),
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    force: ForceOption = False,
    verbose: VerboseOption = False,
):
    _run(train_command, config, out, seed, verbose, checkpoint, n_values=n or None, force=force)


@app.command(name="eval", help="Evaluate detectors on the test split")
def evaluate(
    detectors: list[Path] | None = typer.Argument(None, help="Detector checkpoints (default: all under train/)"),
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    force: ForceOption = False,
    verbose: VerboseOption = False,
):
    _run(eval_command, config, out, seed, verbose, detectors=detectors or None, force=force)


@app.command(help="Grad-CAM heatmaps for selected records")
def gradcam(
    detector: Path = typer.Argument(..., help="Detector checkpoint"),
    record: list[str] | None = typer.Option(None, "--record", "-r", help="Record id (repeatable)"),
    split: str = typer.Option("test", "--split", help="test or train"),
    limit: int = typer.Option(8, "--limit", help="Records to explain when no --record is given"),
    compare: Path | None = typer.Option(
        None, "--compare", help="Second detector (e.g. the baseline) shown side by side on the same records"
    ),
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    force: ForceOption = False,
    verbose: VerboseOption = False,
):
    _run(
        gradcam_command,
        config,
        out,
        seed,
        verbose,
        detector,
        record_ids=record or None,
        split=split,
        limit=limit,
        compare=compare,
        force=force,
    )


@app.command(help="Per-metric differences between two methods over n, with plots")
def compare(
    reports: Path | None = typer.Option(None, "--reports", help="Report directory (default: <out>/eval)"),
    method: str = typer.Option("ssl", "--method", help="ssl, baseline or random"),
    reference: str = typer.Option("baseline", "--reference", help="ssl, baseline or random"),
    config: ConfigOption = None,
    out: OutOption = None,
    seed: SeedOption = None,
    force: ForceOption = False,
    verbose: VerboseOption = False,
):
    _run(
        compare_command,
        config,
        out,
        seed,
        verbose,
        report_dir=reports,
        method=method,
        reference=reference,
        force=force,
    )


if __name__ == "__main__":
    app()
