"""Dataset types: boxes, image records, manifests and subset specs."""

from __future__ import annotations

import json
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field, replace
from typing import Literal

from sslprobe.errors import ContractError, InvalidAnnotationError

Source = Literal["voc2012", "voc2007", "unlabeled-pool", "synthetic"]
Split = Literal["train", "val", "test", "pool"]

TINY_N_VALUES = (10, 20, 50, 100, 200, 500)
FULL_N_VALUES = (3, 5, 10, 20, 50, 100, 200)


def regime_n_values(regime: Literal["TINY", "FULL"]) -> tuple[int, ...]:
    """Images-per-class values of the experiment matrix for a regime."""
    if regime == "TINY":
        return TINY_N_VALUES
    if regime == "FULL":
        return FULL_N_VALUES
    raise ValueError(f"Invalid regime: {regime}")


@dataclass(frozen=True)
class BoundingBox:
    """Ground-truth box in unit coordinates, corner format."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.x_min <= self.x_max <= 1.0):
            raise InvalidAnnotationError(
                f"x range [{self.x_min}, {self.x_max}] is not ordered inside [0, 1]"
            )
        if not (0.0 <= self.y_min <= self.y_max <= 1.0):
            raise InvalidAnnotationError(
                f"y range [{self.y_min}, {self.y_max}] is not ordered inside [0, 1]"
            )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    def to_pixels(self, width: int, height: int) -> tuple[int, int, int, int]:
        return (
            round(self.x_min * width),
            round(self.y_min * height),
            round(self.x_max * width),
            round(self.y_max * height),
        )


@dataclass(frozen=True)
class ImageRecord:
    """One image with provenance. Labeled records carry category and box,
    unlabeled records carry neither."""

    record_id: str
    image_ref: str
    width: int
    height: int
    source: Source
    category: str | None = None
    box: BoundingBox | None = None
    object_count: int = 1

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ContractError(
                f"Record {self.record_id}: size {self.width}x{self.height} must be positive"
            )
        if (self.category is None) != (self.box is None):
            raise ContractError(
                f"Record {self.record_id}: category and box must both be set or both absent"
            )

    @property
    def is_labeled(self) -> bool:
        return self.category is not None

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "image_ref": self.image_ref,
            "width": self.width,
            "height": self.height,
            "source": self.source,
            "category": self.category,
            "box": list(self.box.as_tuple()) if self.box else None,
            "object_count": self.object_count,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> ImageRecord:
        box = payload.get("box")
        return cls(
            record_id=payload["record_id"],
            image_ref=payload["image_ref"],
            width=int(payload["width"]),
            height=int(payload["height"]),
            source=payload["source"],
            category=payload.get("category"),
            box=BoundingBox(*box) if box is not None else None,
            object_count=int(payload.get("object_count", 1)),
        )


@dataclass(frozen=True)
class DatasetManifest:
    """Immutable, ordered collection of records with a fixed class list."""

    records: tuple[ImageRecord, ...]
    class_names: tuple[str, ...]
    split: Split
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        known = set(self.class_names)
        for record in self.records:
            if record.is_labeled and record.category not in known:
                raise ContractError(
                    f"Record {record.record_id}: category {record.category!r} "
                    "is not in the manifest class list"
                )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ImageRecord]:
        return iter(self.records)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def class_index(self, category: str) -> int:
        return self.class_names.index(category)

    def indices_by_class(self) -> dict[str | None, list[int]]:
        """Record positions grouped by category (None for unlabeled)."""
        groups: dict[str | None, list[int]] = {}
        for i, record in enumerate(self.records):
            groups.setdefault(record.category, []).append(i)
        return groups

    def counts_by_class(self) -> dict[str | None, int]:
        return {k: len(v) for k, v in self.indices_by_class().items()}

    def derive(
        self,
        records: Iterable[ImageRecord],
        split: Split | None = None,
        class_names: Iterable[str] | None = None,
    ) -> DatasetManifest:
        return replace(
            self,
            records=tuple(records),
            split=split or self.split,
            class_names=tuple(class_names) if class_names is not None else self.class_names,
        )

    def find(self, record_id: str) -> ImageRecord:
        for record in self.records:
            if record.record_id == record_id:
                return record
        raise KeyError(record_id)

    def to_json(self) -> str:
        payload = {
            "class_names": list(self.class_names),
            "seed": self.seed,
            "split": self.split,
            "records": [r.to_dict() for r in self.records],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> DatasetManifest:
        payload = json.loads(text)
        return cls(
            records=tuple(ImageRecord.from_dict(r) for r in payload["records"]),
            class_names=tuple(payload["class_names"]),
            split=payload["split"],
            seed=int(payload["seed"]),
        )


@dataclass(frozen=True)
class SubsetSpec:
    """Which classes to keep and how many labeled images per class."""

    classes: tuple[str, ...]
    n_per_class: int
    seed: int = 0
    regime: Literal["TINY", "FULL"] | None = field(default=None)

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.n_per_class <= 0:
            raise ContractError(f"n_per_class must be positive, got {self.n_per_class}")
        allowed = {"TINY": TINY_N_VALUES, "FULL": FULL_N_VALUES}.get(self.regime or "")
        if allowed is not None and self.n_per_class not in allowed:
            raise ContractError(
                f"n_per_class={self.n_per_class} is not one of {allowed} for {self.regime}"
            )
