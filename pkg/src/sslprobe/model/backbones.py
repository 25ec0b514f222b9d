from abc import ABC, abstractmethod
from typing import ClassVar

import torch
from torch import nn
from torchvision import models

from sslprobe.errors import ContractError


def init_he(module: nn.Module, seed: int) -> None:
    """Seeded He (fan-in) init for conv/affine weights, zero biases, unit norms."""
    generator = torch.Generator().manual_seed(seed)
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu", generator=generator)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, (nn.BatchNorm2d, nn.BatchNorm1d)):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


class FeatureExtractor(nn.Module, ABC):
    """Convolutional trunk returning (feature map, pooled vector).

    The pooled vector is the exact spatial mean of the final feature map.
    Once frozen, the module stays in evaluation mode so batch-norm
    statistics are frozen with the weights.
    """

    arch_id: ClassVar[str]
    out_channels: int

    def __init__(self):
        super().__init__()
        self._frozen = False

    @abstractmethod
    def feature_map(self, x: torch.Tensor) -> torch.Tensor:
        pass

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ContractError(f"Expected a (B, 3, H, W) batch, got {tuple(x.shape)}")
        fmap = self.feature_map(x)
        return fmap, fmap.mean(dim=(2, 3))

    def train(self, mode: bool = True):
        return super().train(mode and not self._frozen)


def coordinate_planes(x: torch.Tensor) -> torch.Tensor:
    """(B, 2, H, W) planes holding the column and row position in [-1, 1]."""
    batch, _, height, width = x.shape
    ys = torch.linspace(-1.0, 1.0, height, device=x.device, dtype=x.dtype)
    xs = torch.linspace(-1.0, 1.0, width, device=x.device, dtype=x.dtype)
    yv, xv = torch.meshgrid(ys, xs, indexing="ij")
    return torch.stack((xv, yv)).expand(batch, -1, -1, -1)


class TinyCNN(FeatureExtractor):
    """Four stride-2 conv blocks (about 0.1M parameters) for desk-scale runs.

    Each block also sees the two coordinate planes, so the spatial mean of
    the last map can encode where the object sits.
    """

    arch_id = "tiny-cnn"

    def __init__(self, channels: tuple[int, ...] = (16, 32, 64, 128)):
        super().__init__()
        blocks = []
        in_ch = 3
        for out_ch in channels:
            blocks.append(
                nn.Sequential(
                    nn.Conv2d(in_ch + 2, out_ch, kernel_size=3, stride=2, padding=1, bias=False),
                    nn.BatchNorm2d(out_ch),
                    nn.ReLU(inplace=True),
                )
            )
            in_ch = out_ch
        self.blocks = nn.ModuleList(blocks)
        self.out_channels = in_ch

    def feature_map(self, x):
        for block in self.blocks:
            x = block(torch.cat((x, coordinate_planes(x)), dim=1))
        return x


class EfficientNetB1(FeatureExtractor):
    """Convolutional base of torchvision's EfficientNet-B1 (1280 channels)."""

    arch_id = "efficientnet-b1"

    def __init__(self, weights=None):
        super().__init__()
        self.features = models.efficientnet_b1(weights=weights).features
        self.out_channels = 1280

    def feature_map(self, x):
        return self.features(x)


class BackboneFactory:
    @staticmethod
    def create(arch: str, seed: int | None = 0) -> FeatureExtractor:
        """Build a backbone; ``seed=None`` keeps the module's own init."""
        if arch == TinyCNN.arch_id:
            backbone = TinyCNN()
        elif arch == EfficientNetB1.arch_id:
            backbone = EfficientNetB1()
        else:
            raise ValueError(f"Invalid backbone architecture: {arch}")
        if seed is not None:
            init_he(backbone, seed)
        return backbone


def freeze(backbone: FeatureExtractor) -> FeatureExtractor:
    """Exclude every backbone parameter from optimization. There is no unfreeze."""
    for p in backbone.parameters():
        p.requires_grad_(False)
    backbone._frozen = True
    backbone.eval()
    return backbone


def is_frozen(backbone: FeatureExtractor) -> bool:
    return backbone._frozen and not any(p.requires_grad for p in backbone.parameters())


def encode(backbone: FeatureExtractor, batch: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """(feature maps (B, C, h, w), pooled (B, C))."""
    return backbone(batch)
