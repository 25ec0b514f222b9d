"""Objective functions.

All losses are plain differentiable torch functions. Batched inputs are
reduced with the arithmetic mean of the per-sample values.
"""

import torch
import torch.nn.functional as F

from sslprobe.errors import ContractError

NORM_EPS = 1e-8
ENCLOSE_EPS = 1e-9


def cosine_sim(u: torch.Tensor, v: torch.Tensor, eps: float = NORM_EPS) -> torch.Tensor:
    """u.v / (max(|u|, eps) * max(|v|, eps)) over the last dimension."""
    nu = torch.linalg.vector_norm(u, dim=-1).clamp_min(eps)
    nv = torch.linalg.vector_norm(v, dim=-1).clamp_min(eps)
    return (u * v).sum(dim=-1) / (nu * nv)


def info_nce(z: torch.Tensor, tau: float = 0.5) -> torch.Tensor:
    """NT-Xent over 2B embeddings where rows 2m and 2m+1 are views of one source.

    For every anchor i the denominator runs over all 2B-1 other rows, and
    the loss is averaged over the 2B ordered positive pairs.

    Raises:
        ContractError: not a (2B, D) matrix with an even row count of at least 4,
            or tau <= 0.
    """
    if tau <= 0:
        raise ContractError(f"Temperature must be positive, got {tau}")
    if z.ndim != 2:
        raise ContractError(f"Embeddings must be (2B, D), got {tuple(z.shape)}")
    n = z.shape[0]
    if n % 2 != 0:
        raise ContractError(f"Embedding rows must pair up, got an odd count {n}")
    if n < 4:
        raise ContractError(f"At least two source images (4 rows) are needed, got {n} rows")

    unit = z / torch.linalg.vector_norm(z, dim=1, keepdim=True).clamp_min(NORM_EPS)
    logits = unit @ unit.T / tau
    self_mask = torch.eye(n, dtype=torch.bool, device=z.device)
    logits = logits.masked_fill(self_mask, float("-inf"))
    positives = torch.arange(n, device=z.device) ^ 1
    return F.cross_entropy(logits, positives)


def cce(logits: torch.Tensor, target: torch.Tensor | int) -> torch.Tensor:
    """-log softmax(logits)[target] via log-sum-exp; (K,) or (B, K) logits."""
    single = logits.ndim == 1
    logits2d = logits.unsqueeze(0) if single else logits
    target = torch.as_tensor(target, device=logits.device).reshape(-1).long()
    k = logits2d.shape[1]
    if target.shape[0] != logits2d.shape[0]:
        raise ContractError(f"{target.shape[0]} targets for {logits2d.shape[0]} logit rows")
    if ((target < 0) | (target >= k)).any():
        raise ContractError(f"Target {target.tolist()} out of range for {k} classes")
    return F.cross_entropy(logits2d, target)


def _diou_terms(pred: torch.Tensor, gt: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """(IoU, normalized squared center distance) per row of (N, 4) inputs."""
    px1, py1, px2, py2 = pred.unbind(-1)
    gx1, gy1, gx2, gy2 = gt.unbind(-1)

    # Mis-ordered predictions have zero width/height, hence zero overlap.
    pred_area = (px2 - px1).clamp_min(0) * (py2 - py1).clamp_min(0)
    gt_area = (gx2 - gx1).clamp_min(0) * (gy2 - gy1).clamp_min(0)
    inter_w = (torch.minimum(px2, gx2) - torch.maximum(px1, gx1)).clamp_min(0)
    inter_h = (torch.minimum(py2, gy2) - torch.maximum(py1, gy1)).clamp_min(0)
    inter = inter_w * inter_h
    union = pred_area + gt_area - inter
    iou = torch.where(union > 0, inter / union.clamp_min(1e-12), torch.zeros_like(union))

    rho2 = ((px1 + px2) - (gx1 + gx2)) ** 2 / 4 + ((py1 + py2) - (gy1 + gy2)) ** 2 / 4
    cw = torch.maximum(px2, gx2) - torch.minimum(px1, gx1)
    ch = torch.maximum(py2, gy2) - torch.minimum(py1, gy1)
    c2 = (cw**2 + ch**2).clamp_min(ENCLOSE_EPS)
    return iou, rho2 / c2


def diou(pred: torch.Tensor, gt: torch.Tensor, reduction: str = "mean") -> torch.Tensor:
    """1 - IoU + rho^2(b, b_gt) / c^2 for corner-format boxes, value in [0, 2).

    Accepts (4,) or (N, 4) inputs; ``reduction="none"`` keeps per-box values.
    """
    pred2d = pred.reshape(-1, 4)
    gt2d = torch.as_tensor(gt, dtype=pred.dtype, device=pred.device).reshape(-1, 4)
    if pred2d.shape != gt2d.shape:
        raise ContractError(f"Box shapes differ: {tuple(pred.shape)} vs {tuple(gt.shape)}")
    iou, penalty = _diou_terms(pred2d, gt2d)
    loss = 1 - iou + penalty
    if reduction == "none":
        return loss
    return loss.mean()


def combined_loss(cce_value: torch.Tensor, diou_value: torch.Tensor, alpha: float) -> torch.Tensor:
    """alpha * CCE + (1 - alpha) * DIoU."""
    if not 0.0 <= alpha <= 1.0:
        raise ContractError(f"alpha must be in [0, 1], got {alpha}")
    return alpha * cce_value + (1 - alpha) * diou_value
