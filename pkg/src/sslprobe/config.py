import os
from pathlib import Path


ROOT_DIR = Path(__file__).parents[2]

DATA_DIR = Path(os.environ.get("SSLPROBE_DATA_ROOT", ROOT_DIR / "data"))
RUNS_DIR = ROOT_DIR / "runs"

IMAGE_SIDE = 224
PIXEL_MEAN = 0.5
PIXEL_STD = 0.5

# Decoded images kept per dataset, as uint8 (about 150 KB each at 224x224).
IMAGE_CACHE_LIMIT = 4096


def resolve_data_path(path_or_name: str | Path) -> Path:
    """Absolute paths and paths with a directory part are used as-is,
    bare names are resolved against DATA_DIR."""
    p = Path(path_or_name)
    if p.is_absolute() or len(p.parts) > 1:
        return p.resolve()
    return DATA_DIR / p
