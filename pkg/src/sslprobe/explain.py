"""Grad-CAM heatmaps for the classification decision of a detector."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image, ImageDraw

from sslprobe.config import PIXEL_MEAN, PIXEL_STD
from sslprobe.data.images import denormalize
from sslprobe.errors import ContractError, MissingArtifactError
from sslprobe.model import Detector

Score = Literal["classification", "combined"]

# Pixels above each panel tile reserved for its caption.
CAPTION_HEIGHT = 14


@dataclass
class Heatmap:
    """Normalized (H, W) map in [0, 1] plus the raw feature-resolution map."""

    values: np.ndarray
    target: int
    record_id: str = ""
    raw: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def gradcam(
    detector: Detector,
    image: torch.Tensor,
    target: int | None = None,
    score: Score = "classification",
    record_id: str = "",
) -> Heatmap:
    """Class-discriminative heatmap at input resolution.

    Channel weights are the spatially averaged gradients of the score
    w.r.t. the final feature map. With ``target=None`` the predicted class
    is explained. ``score="combined"`` adds the sum of the box outputs to
    the class logit.

    Raises:
        ContractError: image is not (3, H, W) or target is out of range.
    """
    if image.ndim != 3 or image.shape[0] != 3:
        raise ContractError(f"Expected a (3, H, W) image, got {tuple(image.shape)}")
    detector.eval()
    height, width = image.shape[1:]

    with torch.enable_grad():
        fmap, logits, boxes = detector.forward_with_features(image.unsqueeze(0))
        if target is None:
            target = int(logits[0].argmax())
        if not 0 <= target < detector.num_classes:
            raise ContractError(f"Target class {target} out of range for {detector.num_classes} classes")
        value = logits[0, target]
        if score == "combined":
            value = value + boxes[0].sum()
        (grads,) = torch.autograd.grad(value, fmap)

    weights = grads.mean(dim=(2, 3), keepdim=True)
    raw = F.relu((weights * fmap).sum(dim=1, keepdim=True)).detach()
    up = F.interpolate(raw, size=(height, width), mode="bilinear", align_corners=False)[0, 0]
    lo, hi = up.min(), up.max()
    values = (up - lo) / (hi - lo) if hi > lo else torch.zeros_like(up)
    return Heatmap(
        values=values.clamp(0.0, 1.0).cpu().numpy(),
        target=target,
        record_id=record_id,
        raw=raw[0, 0].cpu().numpy(),
    )


def overlay(
    image: torch.Tensor,
    heatmap: Heatmap,
    opacity: float = 0.5,
    mean: float = PIXEL_MEAN,
    std: float = PIXEL_STD,
) -> Image.Image:
    """Blend a viridis rendering of the heatmap over the de-normalized image."""
    from matplotlib import colormaps

    if not 0.0 <= opacity <= 1.0:
        raise ContractError(f"Opacity must be in [0, 1], got {opacity}")
    if tuple(image.shape[1:]) != heatmap.shape:
        raise ContractError(f"Heatmap {heatmap.shape} does not match image {tuple(image.shape[1:])}")

    base = denormalize(image, mean, std).permute(1, 2, 0).cpu().numpy() * 255.0
    colored = colormaps["viridis"](heatmap.values)[..., :3] * 255.0
    blended = np.rint((1.0 - opacity) * base + opacity * colored)
    return Image.fromarray(np.clip(blended, 0, 255).astype(np.uint8), mode="RGB")


def comparison_panel(
    image: torch.Tensor,
    heatmaps: list[Heatmap],
    labels: list[str],
    opacity: float = 0.5,
    mean: float = PIXEL_MEAN,
    std: float = PIXEL_STD,
) -> Image.Image:
    """Side-by-side panel: the plain image, then one labeled overlay per heatmap.

    All heatmaps must explain the same image, e.g. a baseline and an SSL
    detector on one record.
    """
    if not heatmaps or len(heatmaps) != len(labels):
        raise ContractError(f"Need one label per heatmap, got {len(heatmaps)} heatmaps and {len(labels)} labels")
    base = denormalize(image, mean, std).permute(1, 2, 0).cpu().numpy() * 255.0
    tiles = [Image.fromarray(np.clip(np.rint(base), 0, 255).astype(np.uint8), mode="RGB")]
    tiles += [overlay(image, heatmap, opacity, mean, std) for heatmap in heatmaps]
    captions = ["image", *labels]

    width, height = tiles[0].size
    panel = Image.new("RGB", (width * len(tiles), height + CAPTION_HEIGHT), "white")
    draw = ImageDraw.Draw(panel)
    for i, (tile, caption) in enumerate(zip(tiles, captions, strict=True)):
        panel.paste(tile, (i * width, CAPTION_HEIGHT))
        draw.text((i * width + 2, 1), caption, fill="black")
    return panel


def save_heatmap(heatmap: Heatmap, path_stem: str | Path) -> tuple[Path, Path]:
    """Write ``<stem>.bin`` (little-endian float32, row-major) and ``<stem>.json``."""
    stem = Path(path_stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    bin_path = stem.with_suffix(".bin")
    json_path = stem.with_suffix(".json")
    bin_path.write_bytes(heatmap.values.astype("<f4").tobytes(order="C"))
    sidecar = {
        "shape": list(heatmap.shape),
        "dtype": "float32",
        "record_id": heatmap.record_id,
        "target": heatmap.target,
    }
    json_path.write_text(json.dumps(sidecar, indent=2), encoding="utf-8")
    return bin_path, json_path


def load_heatmap(path_stem: str | Path) -> Heatmap:
    stem = Path(path_stem)
    bin_path = stem.with_suffix(".bin")
    json_path = stem.with_suffix(".json")
    if not bin_path.exists() or not json_path.exists():
        raise MissingArtifactError(f"Heatmap files not found for {stem}")
    sidecar = json.loads(json_path.read_text(encoding="utf-8"))
    values = np.frombuffer(bin_path.read_bytes(), dtype="<f4").reshape(sidecar["shape"])
    return Heatmap(values=values.astype(np.float32), target=int(sidecar["target"]), record_id=sidecar["record_id"])
