"""Deterministic single-shape images for desk-scale runs and CI.

Each image is a textured gray background with exactly one saturated shape.
The recorded box is the tight bounding box of the rendered shape mask, so
it is exact by construction.
"""

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from sslprobe.data.types import DatasetManifest, ImageRecord, Split
from sslprobe.data.voc import normalize_box
from sslprobe.errors import ContractError

SHAPE_VOCABULARY: dict[str, tuple[str, tuple[int, int, int]]] = {
    "red-disc": ("disc", (230, 25, 25)),
    "blue-square": ("square", (25, 60, 230)),
    "green-triangle": ("triangle", (20, 200, 40)),
    "yellow-disc": ("disc", (240, 220, 20)),
    "magenta-square": ("square", (220, 30, 220)),
    "cyan-triangle": ("triangle", (20, 220, 230)),
    "orange-disc": ("disc", (250, 140, 0)),
    "purple-square": ("square", (120, 20, 170)),
}

SYNTHETIC_PREFIX = "synthetic:"


def synthetic_ref(seed: int, index: int, category: str) -> str:
    return f"{SYNTHETIC_PREFIX}{seed}:{index}:{category}"


def parse_synthetic_ref(image_ref: str) -> tuple[int, int, str]:
    seed, index, category = image_ref.removeprefix(SYNTHETIC_PREFIX).split(":")
    return int(seed), int(index), category


def _shape_geometry(rng: np.random.Generator, side: int) -> tuple[int, int, int]:
    """(center x, center y, half size) keeping the shape inside the frame."""
    half = int(rng.integers(max(2, side // 8), max(3, side * 3 // 10) + 1))
    cx = int(rng.integers(half, side - half))
    cy = int(rng.integers(half, side - half))
    return cx, cy, half


def _draw_shape(draw: ImageDraw.ImageDraw, shape: str, cx: int, cy: int, half: int, fill) -> None:
    bounds = [cx - half, cy - half, cx + half - 1, cy + half - 1]
    if shape == "disc":
        draw.ellipse(bounds, fill=fill)
    elif shape == "square":
        draw.rectangle(bounds, fill=fill)
    else:
        draw.polygon(
            [(cx, cy - half), (cx - half, cy + half - 1), (cx + half - 1, cy + half - 1)],
            fill=fill,
        )


def render_synthetic_image(
    seed: int, index: int, category: str, side: int
) -> tuple[Image.Image, np.ndarray]:
    """Render one sample. Returns the RGB image and its boolean shape mask."""
    shape, color = SHAPE_VOCABULARY[category]
    rng = np.random.default_rng([seed, index])
    cx, cy, half = _shape_geometry(rng, side)

    # Low-contrast gray texture: coarse blobs plus fine noise, never saturated.
    coarse = rng.uniform(100, 150, size=(max(2, side // 16),) * 2)
    coarse = np.kron(coarse, np.ones((16, 16)))[:side, :side]
    if coarse.shape[0] < side:
        coarse = np.pad(coarse, ((0, side - coarse.shape[0]), (0, side - coarse.shape[1])), mode="edge")
    noise = rng.normal(0, 6, size=(side, side, 3))
    background = np.clip(coarse[..., None] + noise, 80, 170).astype(np.uint8)

    image = Image.fromarray(background, mode="RGB")
    _draw_shape(ImageDraw.Draw(image), shape, cx, cy, half, color)

    mask_image = Image.new("L", (side, side), 0)
    _draw_shape(ImageDraw.Draw(mask_image), shape, cx, cy, half, 255)
    return image, np.asarray(mask_image) > 0


def tight_pixel_box(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Half-open pixel box (xmin, ymin, xmax, ymax) around the True pixels."""
    ys, xs = np.nonzero(mask)
    return int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1


def generate_synthetic_dataset(
    num_images: int,
    classes: list[str],
    image_side: int = 224,
    seed: int = 0,
    output_dir: Path | None = None,
    split: Split = "train",
    labeled: bool = True,
) -> DatasetManifest:
    """Build a manifest of single-shape images.

    Classes are assigned round-robin so every class gets
    ``num_images // len(classes)`` images (the first classes get one extra
    when it does not divide). With ``output_dir`` the images are written as
    PNG and referenced by path, otherwise they stay virtual and are rendered
    on demand by ``load_image``. ``labeled=False`` produces an unlabeled pool.
    """
    unknown = [c for c in classes if c not in SHAPE_VOCABULARY]
    if unknown or not classes:
        raise ContractError(
            f"Synthetic classes must be drawn from {sorted(SHAPE_VOCABULARY)}, got {unknown or classes}"
        )
    class_names = tuple(sorted(set(classes)))
    if output_dir is not None:
        output_dir.mkdir(parents=True, exist_ok=True)

    records = []
    for index in range(num_images):
        category = class_names[index % len(class_names)]
        image, mask = render_synthetic_image(seed, index, category, image_side)
        record_id = f"syn-{seed}-{index:05d}"
        if output_dir is not None:
            path = output_dir / f"{record_id}.png"
            image.save(path, format="PNG")
            image_ref = str(path)
        else:
            image_ref = synthetic_ref(seed, index, category)
        if labeled:
            box = normalize_box(tight_pixel_box(mask), image_side, image_side)
            records.append(
                ImageRecord(
                    record_id=record_id,
                    image_ref=image_ref,
                    width=image_side,
                    height=image_side,
                    source="synthetic",
                    category=category,
                    box=box,
                )
            )
        else:
            records.append(
                ImageRecord(
                    record_id=record_id,
                    image_ref=image_ref,
                    width=image_side,
                    height=image_side,
                    source="unlabeled-pool",
                    object_count=0,
                )
            )

    return DatasetManifest(
        records=tuple(records),
        class_names=class_names if labeled else (),
        split=split if labeled else "pool",
        seed=seed,
    )
