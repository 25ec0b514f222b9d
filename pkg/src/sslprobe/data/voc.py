"""PascalVOC annotation parsing and box normalization."""

import xml.etree.ElementTree as ET

from sslprobe.data.types import BoundingBox
from sslprobe.errors import AnnotationParseError, InvalidAnnotationError

VOC_CLASSES = (
    "aeroplane",
    "bicycle",
    "bird",
    "boat",
    "bottle",
    "bus",
    "car",
    "cat",
    "chair",
    "cow",
    "diningtable",
    "dog",
    "horse",
    "motorbike",
    "person",
    "pottedplant",
    "sheep",
    "sofa",
    "train",
    "tvmonitor",
)

# VOC spells the airplane class "aeroplane".
TINY_CLASSES = ("aeroplane", "bird", "cat", "dog", "person")

PixelBox = tuple[int, int, int, int]


def _required(element: ET.Element, path: str) -> ET.Element:
    found = element.find(path)
    if found is None:
        raise AnnotationParseError(f"Missing <{path}> in <{element.tag}>")
    return found


def _int_text(element: ET.Element, path: str) -> int:
    node = _required(element, path)
    try:
        # Some VOC files store integral coordinates as "48.0".
        return int(float((node.text or "").strip()))
    except ValueError:
        raise AnnotationParseError(f"<{path}> is not a number: {node.text!r}")


def parse_voc_annotation(annotation_document: bytes | str) -> list[tuple[str, PixelBox]]:
    """Parse a VOC XML document into (category, (xmin, ymin, xmax, ymax)) pairs.

    Objects are returned in document order with pixel coordinates exactly as
    written.

    Raises:
        AnnotationParseError: malformed XML or a missing name/bndbox element.
        InvalidAnnotationError: a box with xmin >= xmax or ymin >= ymax.
    """
    try:
        root = ET.fromstring(annotation_document)
    except ET.ParseError as exc:
        raise AnnotationParseError(f"Malformed annotation document: {exc}")

    objects = []
    for obj in root.findall("object"):
        name = (_required(obj, "name").text or "").strip()
        if not name:
            raise AnnotationParseError("Empty <name> in <object>")
        bndbox = _required(obj, "bndbox")
        box = tuple(_int_text(bndbox, tag) for tag in ("xmin", "ymin", "xmax", "ymax"))
        xmin, ymin, xmax, ymax = box
        if xmin >= xmax or ymin >= ymax:
            raise InvalidAnnotationError(f"Degenerate box {box} for object {name!r}")
        objects.append((name, box))
    return objects


def parse_voc_size(annotation_document: bytes | str) -> tuple[int, int]:
    """(width, height) from the <size> element."""
    try:
        root = ET.fromstring(annotation_document)
    except ET.ParseError as exc:
        raise AnnotationParseError(f"Malformed annotation document: {exc}")
    size = _required(root, "size")
    return _int_text(size, "width"), _int_text(size, "height")


def normalize_box(pixel_box: PixelBox, width: int, height: int) -> BoundingBox:
    """Divide pixel corners by the image size.

    Raises:
        InvalidAnnotationError: zero-area box or corners outside the image.
    """
    xmin, ymin, xmax, ymax = pixel_box
    if not (0 <= xmin < xmax <= width and 0 <= ymin < ymax <= height):
        raise InvalidAnnotationError(
            f"Box {tuple(pixel_box)} is not a valid box in a {width}x{height} image"
        )
    return BoundingBox(xmin / width, ymin / height, xmax / width, ymax / height)


def tiny_classes() -> tuple[str, ...]:
    return TINY_CLASSES


def full_classes() -> tuple[str, ...]:
    return VOC_CLASSES
