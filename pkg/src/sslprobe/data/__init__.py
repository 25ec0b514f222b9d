"""Dataset ingestion and protocol subsets.

- types: BoundingBox, ImageRecord, DatasetManifest, SubsetSpec
- voc: VOC annotation parsing and box normalization
- sources: VOC, unlabeled-directory and synthetic dataset sources
- subsets: single-object filter, n-per-class subsets, stratified splits
- images: decoding and normalization into tensors
- synthetic: deterministic single-shape images
"""

from sslprobe.data.images import ManifestImageDataset, denormalize, load_image
from sslprobe.data.sources import (
    DatasetSourceFactory,
    ingest_unlabeled,
    ingest_voc,
    read_manifest,
    write_manifest,
)
from sslprobe.data.subsets import build_subset, filter_single_object, restrict_classes, split_train_val
from sslprobe.data.synthetic import SHAPE_VOCABULARY, generate_synthetic_dataset
from sslprobe.data.types import (
    FULL_N_VALUES,
    TINY_N_VALUES,
    BoundingBox,
    DatasetManifest,
    ImageRecord,
    SubsetSpec,
    regime_n_values,
)
from sslprobe.data.voc import (
    TINY_CLASSES,
    VOC_CLASSES,
    full_classes,
    normalize_box,
    parse_voc_annotation,
    tiny_classes,
)

__all__ = [
    "BoundingBox",
    "DatasetManifest",
    "DatasetSourceFactory",
    "FULL_N_VALUES",
    "ImageRecord",
    "ManifestImageDataset",
    "SHAPE_VOCABULARY",
    "SubsetSpec",
    "TINY_CLASSES",
    "TINY_N_VALUES",
    "VOC_CLASSES",
    "build_subset",
    "denormalize",
    "filter_single_object",
    "full_classes",
    "generate_synthetic_dataset",
    "ingest_unlabeled",
    "ingest_voc",
    "load_image",
    "normalize_box",
    "parse_voc_annotation",
    "read_manifest",
    "regime_n_values",
    "restrict_classes",
    "split_train_val",
    "tiny_classes",
    "write_manifest",
]
