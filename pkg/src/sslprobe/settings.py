"""Experiment configuration loaded from a TOML file.

Every default is the published protocol value; a config file only lists
what it changes. Unknown keys are rejected.
"""

import json
import tomllib
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from sslprobe.data.synthetic import SHAPE_VOCABULARY
from sslprobe.data.types import regime_n_values
from sslprobe.data.voc import TINY_CLASSES, VOC_CLASSES
from sslprobe.errors import ConfigError
from sslprobe.train import DetectorTrainConfig, SSLTrainConfig
from sslprobe.utils import canonical_json, sha256_hex

SNAPSHOT_NAME = "config.snapshot.json"


class DatasetSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: Literal["synthetic", "voc"] = "synthetic"
    regime: Literal["TINY", "FULL", "SYNTHETIC"] = "SYNTHETIC"
    voc_train_root: str = "VOCdevkit/VOC2012"
    voc_train_set: str = "trainval"
    voc_test_root: str = "VOCdevkit/VOC2007"
    voc_test_set: str = "test"
    unlabeled_dir: str | None = None
    single_object: bool = True
    classes: list[str] | None = None
    n_values: list[int] | None = None
    seed: int = 0
    train_fraction: float = Field(0.8, gt=0.0, lt=1.0)
    image_side: int = Field(224, ge=16)
    mean: float = 0.5
    std: float = Field(0.5, gt=0.0)
    synthetic_classes: list[str] = Field(default_factory=lambda: ["blue-square", "red-disc"])
    synthetic_images: int = Field(64, ge=4)
    synthetic_test_images: int = Field(32, ge=1)
    synthetic_pool_images: int = Field(128, ge=4)
    write_images: bool = False

    @model_validator(mode="after")
    def _consistent(self):
        if (self.source == "synthetic") != (self.regime == "SYNTHETIC"):
            raise ValueError(f"regime {self.regime} does not match source {self.source}")
        vocabulary = SHAPE_VOCABULARY if self.source == "synthetic" else VOC_CLASSES
        unknown = [c for c in self.class_list if c not in vocabulary]
        if unknown:
            raise ValueError(f"unknown classes {unknown}")
        if self.regime != "SYNTHETIC" and self.n_values is not None:
            allowed = regime_n_values(self.regime)
            bad = [n for n in self.n_values if n not in allowed]
            if bad:
                raise ValueError(f"n_values {bad} are not in {allowed} for {self.regime}")
        return self

    @property
    def class_list(self) -> tuple[str, ...]:
        if self.classes is not None:
            return tuple(sorted(self.classes))
        if self.regime == "SYNTHETIC":
            return tuple(sorted(self.synthetic_classes))
        return TINY_CLASSES if self.regime == "TINY" else VOC_CLASSES

    @property
    def n_list(self) -> tuple[int, ...]:
        if self.n_values is not None:
            return tuple(self.n_values)
        if self.regime == "SYNTHETIC":
            return (self.synthetic_images // len(self.class_list),)
        return regime_n_values(self.regime)


class EvalSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    thresholds: list[float] = Field(default_factory=lambda: [0.5, 0.7])
    top_n: list[int] = Field(default_factory=lambda: [1, 3, 5])
    batch_size: int = Field(64, ge=1)


class GradcamSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    score: Literal["classification", "combined"] = "classification"
    target: Literal["ground-truth", "predicted"] = "ground-truth"
    opacity: float = Field(0.5, ge=0.0, le=1.0)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    backbone: Literal["tiny-cnn", "efficientnet-b1"] = "efficientnet-b1"
    output_dir: Path = Path("runs/default")
    dataset: DatasetSection = Field(default_factory=DatasetSection)
    ssl: SSLTrainConfig = Field(default_factory=SSLTrainConfig)
    detector: DetectorTrainConfig = Field(default_factory=DetectorTrainConfig)
    eval: EvalSection = Field(default_factory=EvalSection)
    gradcam: GradcamSection = Field(default_factory=GradcamSection)

    def snapshot(self) -> dict:
        return self.model_dump(mode="json")

    def digest(self) -> str:
        return sha256_hex(canonical_json(self.snapshot()))

    def write_snapshot(self, directory: Path) -> Path:
        path = directory / SNAPSHOT_NAME
        path.write_text(json.dumps(self.snapshot(), indent=2, sort_keys=True), encoding="utf-8")
        return path

    def with_overrides(self, output_dir: str | Path | None = None, seed: int | None = None) -> "ExperimentConfig":
        payload = self.snapshot()
        if output_dir is not None:
            payload["output_dir"] = str(output_dir)
        if seed is not None:
            for section in ("dataset", "ssl", "detector"):
                payload[section]["seed"] = seed
        return _validate(payload, "overrides")


def _validate(payload: dict, origin: str) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"Invalid config ({origin}): {problems}") from e


def load_config(path: str | Path | None = None) -> ExperimentConfig:
    """Parse and validate a TOML config; ``None`` gives the defaults.

    Raises:
        ConfigError: the file is missing, is not valid TOML, or fails validation.
            The message names the offending field.
    """
    if path is None:
        return ExperimentConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"Config file not found: {p}")
    try:
        payload = tomllib.loads(p.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Invalid TOML in {p}: {e}") from e
    return _validate(payload, str(p))
