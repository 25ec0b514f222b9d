"""Resolves an ExperimentConfig into manifests, matrix cells and run directories."""

import logging
from pathlib import Path

from sslprobe.data import (
    DatasetManifest,
    DatasetSourceFactory,
    SubsetSpec,
    build_subset,
    filter_single_object,
    ingest_unlabeled,
    ingest_voc,
    read_manifest,
    restrict_classes,
    split_train_val,
    write_manifest,
)
from sslprobe.errors import MissingArtifactError
from sslprobe.settings import ExperimentConfig
from sslprobe.utils import derive_seed, prepare_output_dir

logger = logging.getLogger(__name__)

# Independent seed streams for the generated splits.
SYNTHETIC_STREAMS = {"train": 0, "test": 1, "pool": 2}


def run_dir(config: ExperimentConfig, *parts: str, force: bool = False) -> Path:
    """Create ``<output_dir>/<parts...>`` write-once and drop the config snapshot in it."""
    path = prepare_output_dir(Path(config.output_dir).joinpath(*parts), force=force)
    config.write_snapshot(path)
    return path


def synthetic_dir(config: ExperimentConfig) -> Path:
    return Path(config.output_dir) / "synthetic"


def generate_synthetic(config: ExperimentConfig, directory: Path) -> dict[str, Path]:
    ds = config.dataset
    sizes = {
        "train": (ds.synthetic_images, True),
        "test": (ds.synthetic_test_images, True),
        "pool": (ds.synthetic_pool_images, False),
    }
    paths = {}
    for split, (num_images, labeled) in sizes.items():
        source = DatasetSourceFactory.create(
            "synthetic",
            num_images=num_images,
            classes=list(ds.class_list),
            image_side=ds.image_side,
            labeled=labeled,
            output_dir=directory / "images" / split if ds.write_images else None,
        )
        manifest = source.load(split, seed=derive_seed(ds.seed, SYNTHETIC_STREAMS[split]))
        paths[split] = write_manifest(manifest, directory / f"{split}.json")
        logger.info("Synthetic %s split: %d images", split, len(manifest))
    return paths


def _synthetic_manifest(config: ExperimentConfig, split: str) -> DatasetManifest:
    path = synthetic_dir(config) / f"{split}.json"
    if not path.exists():
        raise MissingArtifactError(f"Synthetic manifest not found: {path} (run `sslprobe synth` first)")
    return read_manifest(path)


def _voc(config: ExperimentConfig, root: str, image_set: str, split: str) -> DatasetManifest:
    ds = config.dataset
    manifest = ingest_voc(root, image_set=image_set, classes=ds.class_list, split=split, seed=ds.seed)
    return filter_single_object(manifest) if ds.single_object else manifest


def labeled_train(config: ExperimentConfig) -> DatasetManifest:
    ds = config.dataset
    if ds.source == "synthetic":
        return _synthetic_manifest(config, "train")
    return _voc(config, ds.voc_train_root, ds.voc_train_set, "train")


def labeled_test(config: ExperimentConfig, class_names: tuple[str, ...] | None = None) -> DatasetManifest:
    ds = config.dataset
    if ds.source == "synthetic":
        manifest = _synthetic_manifest(config, "test")
    else:
        manifest = _voc(config, ds.voc_test_root, ds.voc_test_set, "test")
    return restrict_classes(manifest, class_names) if class_names else manifest


def ssl_pool(config: ExperimentConfig) -> DatasetManifest:
    """Unlabeled pre-training images; without an unlabeled directory the VOC train images are used."""
    ds = config.dataset
    if ds.source == "synthetic":
        return _synthetic_manifest(config, "pool")
    if ds.unlabeled_dir is not None:
        return ingest_unlabeled(ds.unlabeled_dir, seed=ds.seed)
    return labeled_train(config)


def cell_splits(config: ExperimentConfig, train: DatasetManifest, n: int) -> tuple[DatasetManifest, DatasetManifest]:
    """(train, val) of one matrix cell: n images per class, split per class."""
    ds = config.dataset
    regime = ds.regime if ds.regime != "SYNTHETIC" else None
    subset = build_subset(train, SubsetSpec(ds.class_list, n, seed=ds.seed, regime=regime))
    return split_train_val(subset, ds.train_fraction, ds.seed)
