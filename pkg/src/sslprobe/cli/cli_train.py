import logging
from pathlib import Path

from sslprobe.data import write_manifest
from sslprobe.errors import ConfigError, IncompatibleCheckpointError
from sslprobe.experiment import cell_splits, labeled_train, run_dir, ssl_pool
from sslprobe.model import (
    BackboneFactory,
    ProjectionHead,
    import_torchvision_baseline,
    load_checkpoint,
    random_checkpoint,
    save_checkpoint,
    save_detector,
)
from sslprobe.settings import ExperimentConfig
from sslprobe.train import pretrain_ssl, train_detector

logger = logging.getLogger(__name__)


def pretrain_command(config: ExperimentConfig, force: bool = False, verbose: bool = False) -> Path:
    """Contrastive pre-training on the unlabeled pool; writes pretrain/backbone.ckpt."""
    pool = ssl_pool(config)
    directory = run_dir(config, "pretrain", force=force)
    ds = config.dataset
    backbone = BackboneFactory.create(config.backbone, seed=config.ssl.seed)
    head = ProjectionHead(backbone.out_channels, out_dim=config.ssl.projection_dim, seed=config.ssl.seed)
    ckpt, record = pretrain_ssl(
        config.ssl,
        pool,
        backbone,
        head,
        image_side=ds.image_side,
        mean=ds.mean,
        std=ds.std,
        config_digest=config.digest(),
        verbose=verbose,
    )
    path = save_checkpoint(ckpt, directory / "backbone.ckpt")
    record.checkpoint_ref = str(path)
    record.save(directory)
    print(f"Saved {path}")
    return path


def train_command(
    config: ExperimentConfig,
    checkpoint: str | Path,
    n_values: list[int] | None = None,
    force: bool = False,
    verbose: bool = False,
) -> list[Path]:
    """Linear probing on a frozen backbone, one detector per images-per-class value."""
    ckpt = load_checkpoint(checkpoint)
    if ckpt.kind != "backbone":
        raise IncompatibleCheckpointError("backbone", f"{ckpt.kind}:{ckpt.arch}")
    if ckpt.arch != config.backbone:
        raise IncompatibleCheckpointError(config.backbone, ckpt.arch)

    ds = config.dataset
    train = labeled_train(config)
    saved = []
    for n in n_values or ds.n_list:
        train_set, val_set = cell_splits(config, train, n)
        directory = run_dir(config, "train", ckpt.method, f"n{n}", force=force)
        logger.info("Training %s detector, n=%d (%d train / %d val)", ckpt.method, n, len(train_set), len(val_set))
        detector, record = train_detector(
            config.detector,
            ckpt,
            train_set,
            val_set,
            image_side=ds.image_side,
            mean=ds.mean,
            std=ds.std,
            verbose=verbose,
        )
        path = save_detector(
            detector,
            ckpt,
            directory / "detector.ckpt",
            config_digest=config.digest(),
            extra={"n_per_class": n, "method": ckpt.method, "seed": config.detector.seed, "dataset": ds.regime},
        )
        write_manifest(train_set, directory / "train_manifest.json")
        write_manifest(val_set, directory / "val_manifest.json")
        record.checkpoint_ref = str(path)
        record.save(directory)
        print(f"Saved {path}")
        saved.append(path)
    return saved


def import_baseline_command(
    config: ExperimentConfig, source: str = "imagenet", force: bool = False, verbose: bool = False
) -> Path:
    """Write a comparison backbone: torchvision ImageNet weights or a seeded random init."""
    if source == "imagenet":
        if config.backbone != "efficientnet-b1":
            raise ConfigError(f"backbone: ImageNet weights exist only for efficientnet-b1, got {config.backbone!r}")
        ckpt = import_torchvision_baseline(config.backbone)
        directory = run_dir(config, "baseline", force=force)
    elif source == "random":
        ckpt = random_checkpoint(config.backbone, seed=config.ssl.seed)
        directory = run_dir(config, "random", force=force)
    else:
        raise ConfigError(f"source: expected imagenet or random, got {source!r}")
    path = save_checkpoint(ckpt, directory / "backbone.ckpt")
    print(f"Saved {path}")
    return path
