import torch
from torch import nn

from sslprobe.errors import ContractError
from sslprobe.model.backbones import init_he


def _check_dim(pooled: torch.Tensor, expected: int, what: str) -> None:
    if pooled.ndim != 2 or pooled.shape[1] != expected:
        raise ContractError(f"{what} expects (B, {expected}) input, got {tuple(pooled.shape)}")


class ProjectionHead(nn.Module):
    """Two affine layers with one nonlinearity between them (pre-training only)."""

    def __init__(
        self,
        in_dim: int,
        hidden_dim: int | None = None,
        out_dim: int = 128,
        activation: bool = True,
        seed: int | None = 0,
    ):
        super().__init__()
        hidden_dim = hidden_dim or in_dim
        self.in_dim = in_dim
        self.net = nn.Sequential(
            nn.Linear(in_dim, hidden_dim),
            nn.ReLU() if activation else nn.Identity(),
            nn.Linear(hidden_dim, out_dim),
        )
        if seed is not None:
            init_he(self, seed)

    def forward(self, pooled: torch.Tensor) -> torch.Tensor:
        _check_dim(pooled, self.in_dim, "Projection head")
        return self.net(pooled)


class DetectionHeads(nn.Module):
    """One affine layer for class logits, one affine layer + sigmoid for the unit box."""

    def __init__(self, in_dim: int, num_classes: int, seed: int | None = 0):
        super().__init__()
        if num_classes < 1:
            raise ContractError(f"num_classes must be positive, got {num_classes}")
        self.in_dim = in_dim
        self.num_classes = num_classes
        self.classifier = nn.Linear(in_dim, num_classes)
        self.localizer = nn.Linear(in_dim, 4)
        if seed is not None:
            init_he(self, seed)

    def forward(self, pooled: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        _check_dim(pooled, self.in_dim, "Detection heads")
        return self.classifier(pooled), torch.sigmoid(self.localizer(pooled))


def project(head: ProjectionHead, pooled: torch.Tensor) -> torch.Tensor:
    """Raw embeddings; normalization happens inside the similarity."""
    return head(pooled)


def detect(heads: DetectionHeads, pooled: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    return heads(pooled)
