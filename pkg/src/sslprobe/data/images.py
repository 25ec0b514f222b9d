"""Image decoding, resizing and normalization."""

from pathlib import Path

import torch
from PIL import Image, UnidentifiedImageError
from torch.utils.data import Dataset
from torchvision.transforms import functional as TF

from sslprobe.config import IMAGE_CACHE_LIMIT, IMAGE_SIDE, PIXEL_MEAN, PIXEL_STD
from sslprobe.data.synthetic import SYNTHETIC_PREFIX, parse_synthetic_ref, render_synthetic_image
from sslprobe.data.types import BoundingBox, DatasetManifest, ImageRecord
from sslprobe.errors import IngestionError


def open_rgb(record: ImageRecord) -> Image.Image:
    if record.image_ref.startswith(SYNTHETIC_PREFIX):
        seed, index, category = parse_synthetic_ref(record.image_ref)
        image, _ = render_synthetic_image(seed, index, category, record.width)
        return image
    path = Path(record.image_ref)
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except (OSError, UnidentifiedImageError) as exc:
        raise IngestionError(record.image_ref, str(exc))


def resized_pixels(image: Image.Image, side: int) -> torch.Tensor:
    """Plain resize to (side, side); uint8 (3, side, side)."""
    if image.size != (side, side):
        image = image.resize((side, side), Image.Resampling.BILINEAR)
    return TF.pil_to_tensor(image)


def normalize_pixels(pixels: torch.Tensor, mean: float, std: float) -> torch.Tensor:
    """Map uint8 pixels to (v / 255 - mean) / std."""
    return (pixels.to(torch.float32) / 255.0 - mean) / std


def load_image(
    record: ImageRecord,
    side: int = IMAGE_SIDE,
    mean: float = PIXEL_MEAN,
    std: float = PIXEL_STD,
) -> tuple[torch.Tensor, BoundingBox | None]:
    """Decode a record into a (3, side, side) tensor.

    The unit box is returned unchanged: a plain resize rescales both axes
    independently, so unit coordinates stay valid.
    """
    pixels = resized_pixels(open_rgb(record), side)
    return normalize_pixels(pixels, mean, std), record.box


def denormalize(image: torch.Tensor, mean: float = PIXEL_MEAN, std: float = PIXEL_STD) -> torch.Tensor:
    return (image * std + mean).clamp(0.0, 1.0)


class ManifestImageDataset(Dataset):
    """(index, image) pairs over a manifest, for DataLoader workers.

    Decoded images are kept as uint8 pixels, for at most ``cache_limit``
    records; later records are decoded on every access.
    """

    def __init__(
        self,
        manifest: DatasetManifest,
        side: int = IMAGE_SIDE,
        mean: float = PIXEL_MEAN,
        std: float = PIXEL_STD,
        cache_limit: int = IMAGE_CACHE_LIMIT,
    ):
        self.manifest = manifest
        self.side = side
        self.mean = mean
        self.std = std
        self.cache_limit = cache_limit
        self._cache: dict[int, torch.Tensor] = {}

    def __len__(self) -> int:
        return len(self.manifest)

    def __getitem__(self, idx: int) -> tuple[int, torch.Tensor]:
        pixels = self._cache.get(idx)
        if pixels is None:
            pixels = resized_pixels(open_rgb(self.manifest.records[idx]), self.side)
            if len(self._cache) < self.cache_limit:
                self._cache[idx] = pixels
        return idx, normalize_pixels(pixels, self.mean, self.std)
