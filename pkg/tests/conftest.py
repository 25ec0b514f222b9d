from dataclasses import replace

import numpy as np
import pytest
import torch

from sslprobe.data import BoundingBox, DatasetManifest, ImageRecord, generate_synthetic_dataset
from sslprobe.metrics import EvalReport
from sslprobe.model import BackboneFactory

SHAPES = ["blue-square", "red-disc"]

# (n, method, top1, top3, mean_iou, acc_iou_05, acc_iou_07)
TINY_ROWS = [
    (10, "baseline", 0.8262, 0.9717, 0.2594, 0.1916, 0.0440),
    (10, "ssl", 0.4440, 0.8094, 0.4759, 0.5215, 0.2408),
    (20, "baseline", 0.8806, 0.9885, 0.2818, 0.2168, 0.0408),
    (20, "ssl", 0.4911, 0.8293, 0.4887, 0.5455, 0.2450),
    (50, "baseline", 0.9277, 0.9969, 0.4095, 0.3937, 0.1099),
    (50, "ssl", 0.5911, 0.9288, 0.5004, 0.5602, 0.2492),
    (100, "baseline", 0.9361, 0.9969, 0.4778, 0.5162, 0.1539),
    (100, "ssl", 0.6346, 0.9403, 0.5202, 0.5969, 0.2764),
    (200, "baseline", 0.9518, 0.9969, 0.4895, 0.5361, 0.2000),
    (200, "ssl", 0.6754, 0.9550, 0.5259, 0.6115, 0.2974),
    (500, "baseline", 0.9560, 0.9958, 0.5261, 0.5958, 0.2963),
    (500, "ssl", 0.7037, 0.9675, 0.5371, 0.6157, 0.3120),
]

# (n, method, top1, top3, top5, mean_iou, acc_iou_05, acc_iou_07)
FULL_ROWS = [
    (3, "baseline", 0.6259, 0.8236, 0.8880, 0.1685, 0.1206, 0.0541),
    (3, "ssl", 0.2223, 0.4691, 0.6215, 0.4169, 0.4080, 0.1464),
    (5, "baseline", 0.6248, 0.8203, 0.8984, 0.1699, 0.0983, 0.0131),
    (5, "ssl", 0.2615, 0.4981, 0.6412, 0.4410, 0.4659, 0.1830),
    (10, "baseline", 0.7160, 0.8957, 0.9483, 0.2669, 0.2108, 0.0552),
    (10, "ssl", 0.3124, 0.6051, 0.7378, 0.4712, 0.4992, 0.2391),
    (20, "baseline", 0.8225, 0.9437, 0.9716, 0.3526, 0.2911, 0.0683),
    (20, "ssl", 0.3905, 0.6696, 0.7946, 0.4850, 0.5390, 0.2441),
    (50, "baseline", 0.8547, 0.9596, 0.9776, 0.4595, 0.4861, 0.1770),
    (50, "ssl", 0.4702, 0.7302, 0.8454, 0.4985, 0.5516, 0.2769),
    (100, "baseline", 0.8755, 0.9645, 0.9803, 0.4907, 0.5483, 0.2474),
    (100, "ssl", 0.5210, 0.7766, 0.8684, 0.5056, 0.5576, 0.2927),
    (200, "baseline", 0.8815, 0.9656, 0.9820, 0.5073, 0.5680, 0.2807),
    (200, "ssl", 0.5904, 0.8334, 0.9126, 0.5146, 0.5685, 0.3037),
]


def _voc_xml(objects, width: int = 500, height: int = 375) -> bytes:
    parts = [
        "<annotation><folder>VOC2012</folder><filename>x.jpg</filename>",
        f"<size><width>{width}</width><height>{height}</height><depth>3</depth></size>",
    ]
    for name, (x1, y1, x2, y2) in objects:
        parts.append(
            f"<object><name>{name}</name><pose>Unspecified</pose><difficult>0</difficult>"
            f"<bndbox><xmin>{x1}</xmin><ymin>{y1}</ymin><xmax>{x2}</xmax><ymax>{y2}</ymax></bndbox></object>"
        )
    parts.append("</annotation>")
    return "".join(parts).encode("utf-8")


def _labeled_manifest(counts: dict[str, int], object_counts: list[int] | None = None) -> DatasetManifest:
    box = BoundingBox(0.1, 0.2, 0.6, 0.7)
    records = []
    for category, count in counts.items():
        for i in range(count):
            records.append(
                ImageRecord(
                    record_id=f"{category}-{i:04d}",
                    image_ref=f"/nowhere/{category}-{i:04d}.jpg",
                    width=100,
                    height=80,
                    source="voc2012",
                    category=category,
                    box=box,
                )
            )
    if object_counts is not None:
        records = [replace(r, object_count=c) for r, c in zip(records, object_counts)]
    return DatasetManifest(records=tuple(records), class_names=tuple(sorted(counts)), split="train", seed=0)


@pytest.fixture
def voc_xml():
    return _voc_xml


@pytest.fixture
def labeled_manifest():
    return _labeled_manifest


@pytest.fixture
def synthetic_train() -> DatasetManifest:
    return generate_synthetic_dataset(16, SHAPES, image_side=32, seed=0)


@pytest.fixture
def backbone():
    return BackboneFactory.create("tiny-cnn", seed=0)


@pytest.fixture
def tiny_table() -> list[EvalReport]:
    return [
        EvalReport(
            dataset="TINY", method=m, n_per_class=n, top1=t1, top3=t3, mean_iou=miou, acc_iou_05=a5, acc_iou_07=a7
        )
        for n, m, t1, t3, miou, a5, a7 in TINY_ROWS
    ]


@pytest.fixture
def full_table() -> list[EvalReport]:
    return [
        EvalReport(
            dataset="FULL",
            method=m,
            n_per_class=n,
            top1=t1,
            top3=t3,
            top5=t5,
            mean_iou=miou,
            acc_iou_05=a5,
            acc_iou_07=a7,
        )
        for n, m, t1, t3, t5, miou, a5, a7 in FULL_ROWS
    ]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _seeded_torch():
    torch.manual_seed(0)
