import hashlib
import json
import re
from pathlib import Path

import numpy as np
import torch

from sslprobe.errors import OutputExistsError


def sanitize_tag(tag: str) -> str:
    """Replace spaces with underscores and remove special characters."""
    s = tag.replace(" ", "_")
    s = re.sub(r"[^a-zA-Z0-9_.-]", "", s)
    s = re.sub(r"_+", "_", s).strip("_")
    return s or "untitled"


def derive_seed(*parts: int) -> int:
    """Stable 63-bit seed from a tuple of non-negative integers."""
    state = np.random.SeedSequence([int(p) for p in parts]).generate_state(2)
    return int((int(state[0]) << 31) ^ int(state[1])) & ((1 << 63) - 1)


def torch_generator(*parts: int) -> torch.Generator:
    return torch.Generator().manual_seed(derive_seed(*parts))


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def param_digest(module: torch.nn.Module) -> str:
    """Digest over every parameter and buffer, in name order."""
    h = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        h.update(name.encode("utf-8"))
        h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def prepare_output_dir(path: Path, force: bool = False) -> Path:
    """Create an output directory, refusing to reuse a non-empty one."""
    if path.exists() and any(path.iterdir()) and not force:
        raise OutputExistsError(
            f"Output directory {path} is not empty (use --force to overwrite)"
        )
    path.mkdir(parents=True, exist_ok=True)
    return path
