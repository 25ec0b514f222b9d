"""Versioned checkpoint container.

Layout (all integers little-endian):

    8 bytes   magic b"SSLPCKPT"
    4 bytes   format version (uint32)
    8 bytes   header length in bytes (uint64)
    N bytes   UTF-8 JSON header
    ...       payload: tensors back to back, C order, little-endian

The header holds the architecture id, provenance, config digest, creation
time, kind ("backbone" or "detector"), free-form ``extra`` metadata, one
``{name, dtype, shape, offset, nbytes}`` entry per tensor and the sha256
of the payload.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal

import numpy as np
import torch

from sslprobe.errors import (
    CheckpointDigestError,
    CheckpointVersionError,
    ContractError,
    CorruptCheckpointError,
    IncompatibleCheckpointError,
    MissingArtifactError,
)
from sslprobe.model.backbones import BackboneFactory, FeatureExtractor, freeze
from sslprobe.model.detector import Detector
from sslprobe.model.heads import DetectionHeads
from sslprobe.utils import sha256_hex

logger = logging.getLogger(__name__)

MAGIC = b"SSLPCKPT"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<8sIQ")
_HEADER_FIELDS = ("arch", "provenance", "config_digest", "created_at", "kind", "extra", "format_version")

Provenance = Literal["ssl-pretrained", "imagenet-imported", "random"]

_DTYPES = {
    torch.float32: "float32",
    torch.float64: "float64",
    torch.float16: "float16",
    torch.int64: "int64",
    torch.int32: "int32",
}


@dataclass
class BackboneCheckpoint:
    arch: str
    provenance: Provenance
    tensors: dict[str, torch.Tensor]
    config_digest: str = ""
    created_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    kind: Literal["backbone", "detector"] = "backbone"
    extra: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @property
    def method(self) -> str:
        """Experiment method tag implied by the provenance."""
        return {"ssl-pretrained": "ssl", "imagenet-imported": "baseline", "random": "random"}[self.provenance]


def _encode_tensors(tensors: dict[str, torch.Tensor]) -> tuple[list[dict], bytes]:
    entries, chunks, offset = [], [], 0
    for name in sorted(tensors):
        t = tensors[name].detach().cpu().contiguous()
        if t.dtype not in _DTYPES:
            raise ContractError(f"Tensor {name} has unsupported dtype {t.dtype}")
        dtype = _DTYPES[t.dtype]
        raw = t.numpy().astype(np.dtype(dtype).newbyteorder("<"), copy=False).tobytes()
        entries.append({"name": name, "dtype": dtype, "shape": list(t.shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    return entries, b"".join(chunks)


def save_checkpoint(ckpt: BackboneCheckpoint, path: str | Path) -> Path:
    entries, payload = _encode_tensors(ckpt.tensors)
    header = {
        "arch": ckpt.arch,
        "provenance": ckpt.provenance,
        "config_digest": ckpt.config_digest,
        "created_at": ckpt.created_at,
        "kind": ckpt.kind,
        "extra": ckpt.extra,
        "format_version": ckpt.format_version,
        "tensors": entries,
        "payload_sha256": sha256_hex(payload),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "wb") as f:
        f.write(_PREAMBLE.pack(MAGIC, ckpt.format_version, len(header_bytes)))
        f.write(header_bytes)
        f.write(payload)
    return p


def load_checkpoint(path: str | Path) -> BackboneCheckpoint:
    """Read a checkpoint written by ``save_checkpoint``.

    Raises:
        MissingArtifactError: the file does not exist.
        CorruptCheckpointError: bad magic, truncated or incomplete header, or payload.
        CheckpointVersionError: written by another format version.
        CheckpointDigestError: payload does not match its recorded sha256.
    """
    p = Path(path)
    if not p.exists():
        raise MissingArtifactError(f"Checkpoint not found: {p}")
    data = p.read_bytes()
    if len(data) < _PREAMBLE.size:
        raise CorruptCheckpointError(f"{p} is truncated ({len(data)} bytes)")
    magic, version, header_len = _PREAMBLE.unpack_from(data)
    if magic != MAGIC:
        raise CorruptCheckpointError(f"{p} is not a checkpoint file")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"{p} has format version {version}, expected {FORMAT_VERSION}")
    start = _PREAMBLE.size
    if start + header_len > len(data):
        raise CorruptCheckpointError(f"{p} header is truncated")
    try:
        header = json.loads(data[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"{p} header is unreadable: {exc}")
    try:
        entries = header["tensors"]
        expected = sum(e["nbytes"] for e in entries)
        recorded_digest = header["payload_sha256"]
        fields = {name: header[name] for name in _HEADER_FIELDS}
    except (KeyError, TypeError) as exc:
        raise CorruptCheckpointError(f"{p} header lacks field {exc}")

    payload = data[start + header_len :]
    if len(payload) != expected:
        raise CorruptCheckpointError(f"{p} payload has {len(payload)} bytes, expected {expected}")
    if sha256_hex(payload) != recorded_digest:
        raise CheckpointDigestError(f"{p} payload digest mismatch")

    tensors = {}
    try:
        for e in entries:
            stored = np.dtype(e["dtype"]).newbyteorder("<")
            chunk = np.frombuffer(payload, dtype=stored, count=e["nbytes"] // stored.itemsize, offset=e["offset"])
            tensors[e["name"]] = torch.from_numpy(chunk.astype(np.dtype(e["dtype"])).reshape(e["shape"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpointError(f"{p} has an invalid tensor entry: {exc}")

    return BackboneCheckpoint(tensors=tensors, **fields)


def checkpoint_from_backbone(
    backbone: FeatureExtractor,
    provenance: Provenance,
    config_digest: str = "",
    extra: dict | None = None,
) -> BackboneCheckpoint:
    return BackboneCheckpoint(
        arch=backbone.arch_id,
        provenance=provenance,
        tensors={k: v.detach().cpu().clone() for k, v in backbone.state_dict().items()},
        config_digest=config_digest,
        extra=dict(extra or {}),
    )


def backbone_from_checkpoint(ckpt: BackboneCheckpoint, expected_arch: str | None = None) -> FeatureExtractor:
    """Rebuild the backbone of a checkpoint (of either kind)."""
    if expected_arch is not None and expected_arch != ckpt.arch:
        raise IncompatibleCheckpointError(expected_arch, ckpt.arch)
    backbone = BackboneFactory.create(ckpt.arch, seed=None)
    prefix = "backbone." if ckpt.kind == "detector" else ""
    state = {k.removeprefix(prefix): v for k, v in ckpt.tensors.items() if k.startswith(prefix)}
    backbone.load_state_dict(state)
    return backbone


def random_checkpoint(arch: str, seed: int = 0) -> BackboneCheckpoint:
    backbone = BackboneFactory.create(arch, seed=seed)
    return checkpoint_from_backbone(backbone, "random", extra={"init": "he-fan-in", "init_seed": seed})


def import_torchvision_baseline(arch: str = "efficientnet-b1") -> BackboneCheckpoint:
    """Convert torchvision's supervised ImageNet weights into a checkpoint.

    Downloads the weights through torchvision on first use.
    """
    from torchvision.models import EfficientNet_B1_Weights

    from sslprobe.model.backbones import EfficientNetB1

    if arch != EfficientNetB1.arch_id:
        raise ValueError(f"Invalid baseline architecture: {arch}")
    weights = EfficientNet_B1_Weights.IMAGENET1K_V1
    backbone = EfficientNetB1(weights=weights)
    logger.info("Imported %s weights for %s", weights, arch)
    return checkpoint_from_backbone(backbone, "imagenet-imported", extra={"weights": str(weights)})


def save_detector(
    detector: Detector,
    source: BackboneCheckpoint,
    path: str | Path,
    config_digest: str = "",
    extra: dict | None = None,
) -> Path:
    tensors = {f"backbone.{k}": v for k, v in detector.backbone.state_dict().items()}
    tensors |= {f"heads.{k}": v for k, v in detector.heads.state_dict().items()}
    ckpt = BackboneCheckpoint(
        arch=source.arch,
        provenance=source.provenance,
        tensors={k: v.detach().cpu().clone() for k, v in tensors.items()},
        config_digest=config_digest,
        kind="detector",
        extra={"class_names": list(detector.class_names), **(extra or {})},
    )
    return save_checkpoint(ckpt, path)


def load_detector(path: str | Path) -> tuple[Detector, BackboneCheckpoint]:
    ckpt = load_checkpoint(path)
    if ckpt.kind != "detector":
        raise IncompatibleCheckpointError("detector", f"{ckpt.kind}:{ckpt.arch}")
    backbone = freeze(backbone_from_checkpoint(ckpt))
    class_names = tuple(ckpt.extra["class_names"])
    heads = DetectionHeads(backbone.out_channels, len(class_names), seed=None)
    heads.load_state_dict({k.removeprefix("heads."): v for k, v in ckpt.tensors.items() if k.startswith("heads.")})
    detector = Detector(backbone, heads, class_names)
    detector.eval()
    return detector, ckpt
