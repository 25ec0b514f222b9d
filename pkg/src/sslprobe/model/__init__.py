"""Differentiable components and their persistence.

- backbones: pluggable feature extractors (tiny-cnn, efficientnet-b1), freezing
- heads: projection head and the two linear detection heads
- detector: backbone + heads
- checkpoint: versioned binary checkpoints, baseline import
"""

from sslprobe.model.backbones import BackboneFactory, FeatureExtractor, encode, freeze, is_frozen
from sslprobe.model.checkpoint import (
    BackboneCheckpoint,
    backbone_from_checkpoint,
    checkpoint_from_backbone,
    import_torchvision_baseline,
    load_checkpoint,
    load_detector,
    random_checkpoint,
    save_checkpoint,
    save_detector,
)
from sslprobe.model.detector import Detector
from sslprobe.model.heads import DetectionHeads, ProjectionHead, detect, project

__all__ = [
    "BackboneCheckpoint",
    "BackboneFactory",
    "DetectionHeads",
    "Detector",
    "FeatureExtractor",
    "ProjectionHead",
    "backbone_from_checkpoint",
    "checkpoint_from_backbone",
    "detect",
    "encode",
    "freeze",
    "import_torchvision_baseline",
    "is_frozen",
    "load_checkpoint",
    "load_detector",
    "project",
    "random_checkpoint",
    "save_checkpoint",
    "save_detector",
]
