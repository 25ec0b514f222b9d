import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from sslprobe.config import resolve_data_path
from sslprobe.data.subsets import restrict_classes
from sslprobe.data.synthetic import generate_synthetic_dataset
from sslprobe.data.types import DatasetManifest, ImageRecord, Split
from sslprobe.data.voc import VOC_CLASSES, normalize_box, parse_voc_annotation, parse_voc_size
from sslprobe.errors import MissingArtifactError

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp"}


class DatasetSource(ABC):
    @abstractmethod
    def load(self, split: Split, seed: int = 0) -> DatasetManifest:
        """Build a manifest from the source.

        Args:
            split: Split tag stored on the manifest.
            seed: Seed stored on the manifest (and used by generated sources).

        Returns:
            A manifest whose record order is a deterministic function of the
            source contents and the seed.
        """
        pass


class VocSource(DatasetSource):
    """PascalVOC directory (the VOC2007 or VOC2012 folder of a VOCdevkit).

    Every image listed in ImageSets/Main/<image_set>.txt becomes one record
    labeled with its first object; ``object_count`` keeps the number of
    annotated objects so the single-object filter can run afterwards.
    """

    def __init__(self, root: str | Path, image_set: str = "trainval", workers: int = 8):
        self.root = resolve_data_path(root)
        self.image_set = image_set
        self.workers = workers
        self.year_tag = "voc2007" if "2007" in self.root.name else "voc2012"

    def _record(self, image_id: str) -> ImageRecord | None:
        xml_path = self.root / "Annotations" / f"{image_id}.xml"
        if not xml_path.exists():
            raise MissingArtifactError(f"Annotation not found: {xml_path}")
        document = xml_path.read_bytes()
        objects = parse_voc_annotation(document)
        if not objects:
            return None
        width, height = parse_voc_size(document)
        category, pixel_box = objects[0]
        return ImageRecord(
            record_id=image_id,
            image_ref=str(self.root / "JPEGImages" / f"{image_id}.jpg"),
            width=width,
            height=height,
            source=self.year_tag,
            category=category,
            box=normalize_box(pixel_box, width, height),
            object_count=len(objects),
        )

    def load(self, split: Split, seed: int = 0) -> DatasetManifest:
        list_path = self.root / "ImageSets" / "Main" / f"{self.image_set}.txt"
        if not list_path.exists():
            raise MissingArtifactError(f"Image set list not found: {list_path}")
        ids = [line.strip() for line in list_path.read_text().splitlines() if line.strip()]

        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            records = [r for r in pool.map(self._record, ids) if r is not None]

        class_names = sorted(set(VOC_CLASSES) | {r.category for r in records})
        logger.info("Ingested %d annotated images from %s", len(records), self.root)
        return DatasetManifest(records=tuple(records), class_names=tuple(class_names), split=split, seed=seed)


class UnlabeledSource(DatasetSource):
    """Any directory of decodable images; annotations are ignored."""

    def __init__(self, directory: str | Path, workers: int = 8):
        self.directory = resolve_data_path(directory)
        self.workers = workers

    @staticmethod
    def _record(path: Path) -> ImageRecord | None:
        try:
            with Image.open(path) as img:
                width, height = img.size
        except (OSError, UnidentifiedImageError):
            logger.warning("Skipping undecodable image %s", path)
            return None
        return ImageRecord(
            record_id=path.stem,
            image_ref=str(path),
            width=width,
            height=height,
            source="unlabeled-pool",
            object_count=0,
        )

    def load(self, split: Split = "pool", seed: int = 0) -> DatasetManifest:
        if not self.directory.is_dir():
            raise MissingArtifactError(f"Image directory not found: {self.directory}")
        paths = sorted(p for p in self.directory.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES)
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            records = [r for r in pool.map(self._record, paths) if r is not None]
        logger.info("Found %d unlabeled images in %s", len(records), self.directory)
        return DatasetManifest(records=tuple(records), class_names=(), split="pool", seed=seed)


class SyntheticSource(DatasetSource):
    def __init__(
        self,
        num_images: int,
        classes: list[str],
        image_side: int = 224,
        labeled: bool = True,
        output_dir: Path | None = None,
    ):
        self.num_images = num_images
        self.classes = classes
        self.image_side = image_side
        self.labeled = labeled
        self.output_dir = output_dir

    def load(self, split: Split, seed: int = 0) -> DatasetManifest:
        return generate_synthetic_dataset(
            self.num_images,
            self.classes,
            image_side=self.image_side,
            seed=seed,
            output_dir=self.output_dir,
            split=split,
            labeled=self.labeled,
        )


class DatasetSourceFactory:
    @staticmethod
    def create(kind: str, **kwargs) -> DatasetSource:
        if kind == "voc":
            return VocSource(**kwargs)
        if kind == "unlabeled":
            return UnlabeledSource(**kwargs)
        if kind == "synthetic":
            return SyntheticSource(**kwargs)
        raise ValueError(f"Invalid dataset source: {kind}")


def read_manifest(path: str | Path) -> DatasetManifest:
    p = Path(path)
    if not p.exists():
        raise MissingArtifactError(f"Manifest not found: {p}")
    return DatasetManifest.from_json(p.read_text(encoding="utf-8"))


def write_manifest(manifest: DatasetManifest, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(manifest.to_json(), encoding="utf-8")
    return p


def ingest_voc(
    root: str | Path,
    image_set: str = "trainval",
    classes: tuple[str, ...] | list[str] | None = None,
    split: Split = "train",
    seed: int = 0,
) -> DatasetManifest:
    """VOC manifest, optionally restricted to ``classes`` (the class list becomes the sorted selection)."""
    manifest = VocSource(root, image_set=image_set).load(split, seed)
    return restrict_classes(manifest, classes) if classes else manifest


def ingest_unlabeled(directory: str | Path, seed: int = 0) -> DatasetManifest:
    return UnlabeledSource(directory).load("pool", seed)
