import torch
from torch import nn

from sslprobe.model.backbones import FeatureExtractor
from sslprobe.model.heads import DetectionHeads


class Detector(nn.Module):
    """Frozen backbone plus the two linear heads."""

    def __init__(self, backbone: FeatureExtractor, heads: DetectionHeads, class_names: tuple[str, ...]):
        super().__init__()
        self.backbone = backbone
        self.heads = heads
        self.class_names = tuple(class_names)

    @property
    def num_classes(self) -> int:
        return self.heads.num_classes

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        _, pooled = self.backbone(x)
        return self.heads(pooled)

    def forward_with_features(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """(feature map, logits, boxes) with the feature map open to autograd."""
        fmap = self.backbone.feature_map(x).detach().requires_grad_(True)
        logits, boxes = self.heads(fmap.mean(dim=(2, 3)))
        return fmap, logits, boxes
