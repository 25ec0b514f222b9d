"""SSL pre-training and frozen-backbone detector training."""

import copy
import logging
import math
import time
from dataclasses import replace
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
import torch
from pydantic import BaseModel, ConfigDict, Field
from torch.utils.data import DataLoader
from tqdm import tqdm

from sslprobe.augment import AugmentationPolicy, detector_augment, ssl_view_pair
from sslprobe.config import IMAGE_SIDE, PIXEL_MEAN, PIXEL_STD
from sslprobe.data import DatasetManifest, ManifestImageDataset, split_train_val
from sslprobe.errors import ContractError, FrozenBackboneError, NonFiniteLossError
from sslprobe.losses import cce, combined_loss, diou, info_nce
from sslprobe.metrics import PredictionRecord, iou
from sslprobe.model import (
    BackboneCheckpoint,
    DetectionHeads,
    Detector,
    FeatureExtractor,
    ProjectionHead,
    backbone_from_checkpoint,
    checkpoint_from_backbone,
    freeze,
    is_frozen,
)
from sslprobe.utils import param_digest, torch_generator

logger = logging.getLogger(__name__)

# Fixed stream id for validation views, so every epoch sees the same views.
_VAL_STREAM = 2**31 - 1


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    phase: Literal["ssl", "detector"]
    max_epochs: int = Field(ge=1)
    batch_size: int = Field(32, ge=1)
    learning_rate: float = Field(gt=0.0)
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0
    patience: int | None = Field(None, ge=1)
    num_workers: int = Field(0, ge=0)
    device: str = "cpu"
    augment: AugmentationPolicy = Field(default_factory=AugmentationPolicy)


class SSLTrainConfig(TrainConfig):
    phase: Literal["ssl"] = "ssl"
    max_epochs: int = Field(200, ge=1)
    learning_rate: float = Field(0.0005, gt=0.0)
    tau: float = Field(0.5, gt=0.0)
    val_fraction: float = Field(0.1, gt=0.0, lt=1.0)
    projection_dim: int = Field(128, ge=1)
    augment: AugmentationPolicy = Field(default_factory=AugmentationPolicy.ssl_default)


class DetectorTrainConfig(TrainConfig):
    phase: Literal["detector"] = "detector"
    max_epochs: int = Field(100, ge=1)
    learning_rate: float = Field(0.001, gt=0.0)
    alpha: float = Field(0.5, ge=0.0, le=1.0)
    selection: Literal["val_loss", "val_mean_iou", "val_top1"] = "val_loss"
    augment: AugmentationPolicy = Field(default_factory=AugmentationPolicy.detector_default)


class TrainRecord(BaseModel):
    phase: Literal["ssl", "detector"]
    train_loss: list[float] = Field(default_factory=list)
    val_loss: list[float] = Field(default_factory=list)
    val_metric: list[float] = Field(default_factory=list)
    epoch_seconds: list[float] = Field(default_factory=list)
    best_epoch: int = -1
    best_score: float = math.nan
    selection: str = "val_loss"
    stopped_early: bool = False
    checkpoint_ref: str | None = None

    def epochs_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "epoch": range(len(self.train_loss)),
                "train_loss": self.train_loss,
                "val_loss": self.val_loss,
                "seconds": self.epoch_seconds,
            }
        )

    def save(self, directory: str | Path) -> tuple[Path, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        json_path = d / "train_record.json"
        csv_path = d / "epochs.csv"
        json_path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        self.epochs_frame().to_csv(csv_path, index=False)
        return json_path, csv_path


def batch_indices(indices: list[int], batch_size: int, min_size: int = 1) -> list[list[int]]:
    """Consecutive chunks; a trailing chunk smaller than ``min_size`` joins the previous one."""
    chunks = [indices[i : i + batch_size] for i in range(0, len(indices), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) < min_size:
        chunks[-2].extend(chunks.pop())
    return chunks


def _adam(params, config: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(params, lr=config.learning_rate, betas=config.betas, eps=config.adam_eps)


def _loader(dataset: ManifestImageDataset, batches: list[list[int]], config: TrainConfig) -> DataLoader:
    return DataLoader(dataset, batch_sampler=batches, num_workers=config.num_workers)


def _check_finite(loss: torch.Tensor, epoch: int, step: int) -> None:
    if not torch.isfinite(loss):
        raise NonFiniteLossError(epoch, step, float(loss.item()))


def _improved(score: float, best: float, higher_is_better: bool) -> bool:
    if math.isnan(best):
        return True
    return score > best if higher_is_better else score < best


def _as_unlabeled(pool: DatasetManifest) -> DatasetManifest:
    records = [replace(r, category=None, box=None) for r in pool.records]
    return pool.derive(records, split="pool", class_names=())


def _ssl_epoch_views(
    images: torch.Tensor, indices: list[int], policy: AugmentationPolicy, seed: int, stream: int
) -> torch.Tensor:
    """Interleaved views: rows 2m and 2m+1 come from source m."""
    views = []
    for idx, image in zip(indices, images):
        pair = ssl_view_pair(image, policy, torch_generator(seed, stream, idx))
        views += [pair.view_a, pair.view_b]
    return torch.stack(views)


def ssl_loss_on(
    backbone: FeatureExtractor,
    head: ProjectionHead,
    dataset: ManifestImageDataset,
    config: SSLTrainConfig,
) -> float:
    """Mean InfoNCE over fixed validation views of ``dataset``."""
    backbone.eval()
    head.eval()
    batches = batch_indices(list(range(len(dataset))), config.batch_size, min_size=2)
    total, count = 0.0, 0
    with torch.no_grad():
        for indices, images in _loader(dataset, batches, config):
            x = _ssl_epoch_views(images, indices.tolist(), config.augment, config.seed, _VAL_STREAM)
            _, pooled = backbone(x.to(config.device))
            loss = info_nce(head(pooled), config.tau)
            total += loss.item() * len(indices)
            count += len(indices)
    return total / count


def pretrain_ssl(
    config: SSLTrainConfig,
    pool: DatasetManifest,
    backbone: FeatureExtractor,
    proj_head: ProjectionHead,
    image_side: int = IMAGE_SIDE,
    mean: float = PIXEL_MEAN,
    std: float = PIXEL_STD,
    config_digest: str = "",
    verbose: bool = False,
) -> tuple[BackboneCheckpoint, TrainRecord]:
    """Contrastive pre-training of backbone + projection head.

    Labels in ``pool`` are ignored. A seeded ``config.val_fraction`` slice is
    held out and the epoch with the lowest validation InfoNCE is returned.

    Raises:
        ContractError: fewer than two pool images, or fewer than two source images per batch.
        NonFiniteLossError: NaN/Inf loss (with epoch and step).
    """
    if len(pool) == 0:
        raise ContractError("SSL pre-training needs a non-empty image pool")
    if len(pool) < 2:
        raise ContractError(f"SSL pre-training needs at least two pool images, got {len(pool)}")
    if config.batch_size < 2:
        raise ContractError("SSL batches need at least two source images")
    config.augment.validate_ssl()
    torch.manual_seed(config.seed)

    pool = _as_unlabeled(pool)
    if len(pool) >= 4:
        train_pool, val_pool = split_train_val(pool, 1.0 - config.val_fraction, config.seed)
    else:
        train_pool, val_pool = pool, pool.derive([])
    if len(val_pool) < 2:
        logger.warning("Validation slice has %d image(s); selecting on training loss", len(val_pool))
    train_data = ManifestImageDataset(train_pool, image_side, mean, std)
    val_data = ManifestImageDataset(val_pool, image_side, mean, std)

    device = torch.device(config.device)
    backbone.to(device)
    proj_head.to(device)
    optimizer = _adam(list(backbone.parameters()) + list(proj_head.parameters()), config)
    record = TrainRecord(phase="ssl", selection="val_loss")
    best_state = None
    stale = 0

    epochs = tqdm(range(config.max_epochs), desc="ssl", disable=not verbose)
    for epoch in epochs:
        start = time.perf_counter()
        backbone.train()
        proj_head.train()
        order = np.random.default_rng([config.seed, epoch]).permutation(len(train_data)).tolist()
        total, count = 0.0, 0
        for step, (indices, images) in enumerate(
            _loader(train_data, batch_indices(order, config.batch_size, min_size=2), config)
        ):
            x = _ssl_epoch_views(images, indices.tolist(), config.augment, config.seed, epoch)
            _, pooled = backbone(x.to(device))
            loss = info_nce(proj_head(pooled), config.tau)
            _check_finite(loss, epoch, step)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += loss.item() * len(indices)
            count += len(indices)
        train_loss = total / count

        val_loss = ssl_loss_on(backbone, proj_head, val_data, config) if len(val_data) >= 2 else train_loss
        record.train_loss.append(train_loss)
        record.val_loss.append(val_loss)
        record.epoch_seconds.append(time.perf_counter() - start)
        epochs.set_postfix(train=f"{train_loss:.4f}", val=f"{val_loss:.4f}")
        logger.debug("ssl epoch %d train %.5f val %.5f", epoch, train_loss, val_loss)

        if _improved(val_loss, record.best_score, higher_is_better=False):
            record.best_score = val_loss
            record.best_epoch = epoch
            best_state = (copy.deepcopy(backbone.state_dict()), copy.deepcopy(proj_head.state_dict()))
            stale = 0
        else:
            stale += 1
            if config.patience is not None and stale >= config.patience:
                record.stopped_early = True
                logger.info("Early stop at epoch %d (best %d)", epoch, record.best_epoch)
                break

    backbone.load_state_dict(best_state[0])
    proj_head.load_state_dict(best_state[1])
    backbone.cpu()
    proj_head.cpu()
    ckpt = checkpoint_from_backbone(
        backbone,
        "ssl-pretrained",
        config_digest=config_digest,
        extra={"best_epoch": record.best_epoch, "tau": config.tau, "pool_size": len(pool)},
    )
    return ckpt, record


def _targets(manifest: DatasetManifest) -> tuple[torch.Tensor, torch.Tensor]:
    labels = torch.tensor([manifest.class_index(r.category) for r in manifest.records], dtype=torch.long)
    boxes = torch.tensor([r.box.as_tuple() for r in manifest.records], dtype=torch.float32)
    return labels, boxes


def pooled_features(
    backbone: FeatureExtractor,
    dataset: ManifestImageDataset,
    config: TrainConfig,
    policy: AugmentationPolicy | None = None,
    stream: int = 0,
) -> torch.Tensor:
    """Pooled frozen-backbone features (N, C), optionally on augmented images."""
    batches = batch_indices(list(range(len(dataset))), config.batch_size)
    out = []
    with torch.no_grad():
        for indices, images in _loader(dataset, batches, config):
            if policy is not None:
                images = torch.stack(
                    [
                        detector_augment(img, policy, torch_generator(config.seed, stream, idx))
                        for idx, img in zip(indices.tolist(), images)
                    ]
                )
            _, pooled = backbone(images.to(config.device))
            out.append(pooled)
    return torch.cat(out)


def heads_loss(
    heads: DetectionHeads, pooled: torch.Tensor, labels: torch.Tensor, boxes: torch.Tensor, alpha: float
) -> torch.Tensor:
    logits, pred_boxes = heads(pooled)
    return combined_loss(cce(logits, labels), diou(pred_boxes, boxes), alpha)


def _heads_metric(heads: DetectionHeads, pooled, labels, boxes, selection: str) -> float:
    with torch.no_grad():
        logits, pred_boxes = heads(pooled)
    if selection == "val_top1":
        return float((logits.argmax(dim=1) == labels).float().mean())
    return float(np.mean(iou(pred_boxes.cpu().numpy(), boxes.cpu().numpy())))


def _ensure_heads_only(optimizer: torch.optim.Optimizer, backbone: FeatureExtractor) -> None:
    backbone_ids = {id(p) for p in backbone.parameters()}
    leaked = [p for group in optimizer.param_groups for p in group["params"] if id(p) in backbone_ids]
    if leaked or not is_frozen(backbone):
        raise FrozenBackboneError("Backbone parameters must be frozen and excluded from the optimizer")


def train_detector(
    config: DetectorTrainConfig,
    ckpt: BackboneCheckpoint,
    train_set: DatasetManifest,
    val_set: DatasetManifest,
    heads: DetectionHeads | None = None,
    image_side: int = IMAGE_SIDE,
    mean: float = PIXEL_MEAN,
    std: float = PIXEL_STD,
    verbose: bool = False,
) -> tuple[Detector, TrainRecord]:
    """Linear probing: only the two heads learn, the backbone stays frozen.

    Without detector augmentation the pooled features are computed once and
    reused every epoch.

    Raises:
        ContractError: head/manifest class-count mismatch or differing class lists.
        FrozenBackboneError: a backbone parameter reaches the optimizer or changes.
        NonFiniteLossError: NaN/Inf loss.
    """
    if val_set.class_names != train_set.class_names:
        raise ContractError("Train and validation manifests have different class lists")
    torch.manual_seed(config.seed)
    device = torch.device(config.device)

    backbone = freeze(backbone_from_checkpoint(ckpt)).to(device)
    digest = param_digest(backbone)
    if heads is None:
        heads = DetectionHeads(backbone.out_channels, train_set.num_classes, seed=config.seed)
    if heads.num_classes != train_set.num_classes:
        raise ContractError(
            f"Heads predict {heads.num_classes} classes, manifest has {train_set.num_classes}"
        )
    heads.to(device)
    detector = Detector(backbone, heads, train_set.class_names)

    optimizer = _adam(heads.parameters(), config)
    _ensure_heads_only(optimizer, backbone)

    policy = None if config.augment.is_empty else config.augment
    if policy is not None:
        policy.validate_detector()
    train_data = ManifestImageDataset(train_set, image_side, mean, std)
    val_data = ManifestImageDataset(val_set, image_side, mean, std)
    train_labels, train_boxes = (t.to(device) for t in _targets(train_set))
    val_labels, val_boxes = (t.to(device) for t in _targets(val_set))
    cached = pooled_features(backbone, train_data, config) if policy is None else None
    val_pooled = pooled_features(backbone, val_data, config)

    higher = config.selection != "val_loss"
    record = TrainRecord(phase="detector", selection=config.selection)
    best_state = None
    stale = 0

    epochs = tqdm(range(config.max_epochs), desc="detector", disable=not verbose)
    for epoch in epochs:
        start = time.perf_counter()
        heads.train()
        pooled = cached if cached is not None else pooled_features(backbone, train_data, config, policy, epoch)
        order = np.random.default_rng([config.seed, epoch]).permutation(len(train_set)).tolist()
        total = 0.0
        for step, chunk in enumerate(batch_indices(order, config.batch_size)):
            idx = torch.tensor(chunk, device=device)
            loss = heads_loss(heads, pooled[idx], train_labels[idx], train_boxes[idx], config.alpha)
            _check_finite(loss, epoch, step)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += loss.item() * len(chunk)
        train_loss = total / len(train_set)

        heads.eval()
        with torch.no_grad():
            val_loss = heads_loss(heads, val_pooled, val_labels, val_boxes, config.alpha).item()
        score = val_loss if not higher else _heads_metric(heads, val_pooled, val_labels, val_boxes, config.selection)
        record.train_loss.append(train_loss)
        record.val_loss.append(val_loss)
        record.val_metric.append(score)
        record.epoch_seconds.append(time.perf_counter() - start)
        epochs.set_postfix(train=f"{train_loss:.4f}", val=f"{val_loss:.4f}")

        if _improved(score, record.best_score, higher):
            record.best_score = score
            record.best_epoch = epoch
            best_state = copy.deepcopy(heads.state_dict())
            stale = 0
        else:
            stale += 1
            if config.patience is not None and stale >= config.patience:
                record.stopped_early = True
                break

    heads.load_state_dict(best_state)
    detector.eval()
    if param_digest(backbone) != digest:
        raise FrozenBackboneError("Backbone parameters changed during detector training")
    logger.info(
        "Detector best epoch %d (%s %.5f)", record.best_epoch, config.selection, record.best_score
    )
    return detector, record


def evaluate_detector_loss(
    detector: Detector,
    manifest: DatasetManifest,
    alpha: float,
    image_side: int = IMAGE_SIDE,
    mean: float = PIXEL_MEAN,
    std: float = PIXEL_STD,
    batch_size: int = 32,
) -> float:
    """Combined loss of ``detector`` over the whole manifest, without augmentation."""
    detector.eval()
    config = DetectorTrainConfig(batch_size=batch_size, augment=AugmentationPolicy())
    pooled = pooled_features(detector.backbone, ManifestImageDataset(manifest, image_side, mean, std), config)
    labels, boxes = _targets(manifest)
    with torch.no_grad():
        return heads_loss(detector.heads, pooled, labels, boxes, alpha).item()


def predict(
    detector: Detector,
    manifest: DatasetManifest,
    image_side: int = IMAGE_SIDE,
    mean: float = PIXEL_MEAN,
    std: float = PIXEL_STD,
    batch_size: int = 32,
) -> list[PredictionRecord]:
    """Logits and boxes for every labeled record of ``manifest``."""
    if tuple(manifest.class_names) != detector.class_names:
        raise ContractError(
            f"Manifest classes {manifest.class_names} differ from detector classes {detector.class_names}"
        )
    detector.eval()
    config = DetectorTrainConfig(batch_size=batch_size, augment=AugmentationPolicy())
    pooled = pooled_features(detector.backbone, ManifestImageDataset(manifest, image_side, mean, std), config)
    with torch.no_grad():
        logits, boxes = detector.heads(pooled)
    return [
        PredictionRecord(
            record_id=r.record_id,
            logits=logits[i].cpu().numpy(),
            pred_box=boxes[i].cpu().numpy(),
            target=manifest.class_index(r.category),
            target_box=np.asarray(r.box.as_tuple()),
        )
        for i, r in enumerate(manifest.records)
    ]
