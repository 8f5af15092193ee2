# modules/infrastructure/learning/objectives.py
"""Training losses: InfoNCE over generated negatives, ESCE reconstruction,
focal loss, and their weighted combination."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F

from .pnsg import NegativeBatch

logger = logging.getLogger(__name__)

# floor for cosine values and log arguments
COS_FLOOR = 1e-6
_NORM_EPS = 1e-12


@dataclass
class LossBreakdown:
    l_elbo: torch.Tensor
    l_pnsm: torch.Tensor
    l_esce: torch.Tensor
    total: torch.Tensor
    alpha: float
    beta: float
    gamma: float

    def components(self) -> Dict[str, float]:
        return {
            "l_elbo": float(self.l_elbo.detach()),
            "l_pnsm": float(self.l_pnsm.detach()),
            "l_esce": float(self.l_esce.detach()),
            "total": float(self.total.detach()),
        }


def info_nce(
    anchor: torch.Tensor,
    positive: torch.Tensor,
    negatives: Union[NegativeBatch, torch.Tensor],
    tau: float,
    include_positive: bool = False,
) -> torch.Tensor:
    """Mean over anchors of -log(exp(s+/tau) / sum_k exp(s_k/tau)) with cosine similarity.

    The denominator runs over the negatives only unless ``include_positive``.
    """
    if tau <= 0:
        raise ValueError(f"temperature must be > 0, got {tau}")
    if anchor.shape != positive.shape:
        raise ValueError(f"anchor {tuple(anchor.shape)} and positive {tuple(positive.shape)} differ")
    neg = negatives.samples if isinstance(negatives, NegativeBatch) else negatives
    if neg.shape[0] == 0:
        raise ValueError("InfoNCE needs at least one negative")
    a = F.normalize(anchor, dim=-1, eps=_NORM_EPS)
    p = F.normalize(positive, dim=-1, eps=_NORM_EPS)
    n = F.normalize(neg, dim=-1, eps=_NORM_EPS)
    s_pos = (a * p).sum(-1) / tau
    s_neg = a @ n.T / tau
    if include_positive:
        s_neg = torch.cat([s_pos.unsqueeze(1), s_neg], dim=1)
    return (torch.logsumexp(s_neg, dim=1) - s_pos).mean()


def esce(
    x: torch.Tensor,
    x_hat: torch.Tensor,
    masked_ids: Union[Sequence[int], np.ndarray, torch.Tensor],
    delta: float = 3.0,
    variant: str = "focal",
) -> torch.Tensor:
    """Enhanced scaled cosine error over the masked rows.

    With c_i the cosine between x_i and x_hat_i (negative values replaced
    by 1e-6):

    - ``literal``: mean of (1 - c)^delta * log(max(1 - c, 1e-6))
    - ``focal``:   mean of (1 - c)^delta * -log(max(c, 1e-6))

    Rows with a zero norm on either side are skipped with a warning.
    """
    if delta < 1:
        raise ValueError(f"delta must be >= 1, got {delta}")
    if variant not in ("literal", "focal"):
        raise ValueError(f"unknown ESCE variant '{variant}'")
    if x.shape != x_hat.shape:
        raise ValueError(f"x {tuple(x.shape)} and x_hat {tuple(x_hat.shape)} differ")
    idx = torch.as_tensor(np.asarray(masked_ids, dtype=np.int64), device=x.device)
    if idx.numel() == 0:
        raise ValueError("ESCE needs a non-empty masked node set")

    xs, xh = x[idx], x_hat[idx]
    nx, nh = xs.norm(dim=-1), xh.norm(dim=-1)
    valid = (nx > 0) & (nh > 0)
    if not bool(valid.all()):
        bad = idx[~valid].tolist()
        logger.warning("ESCE: skipping %d zero-norm row(s): %s", len(bad), bad[:10])
        if not bool(valid.any()):
            return x_hat.sum() * 0.0
        xs, xh, nx, nh = xs[valid], xh[valid], nx[valid], nh[valid]

    c = (xs * xh).sum(-1) / (nx * nh)
    c = torch.where(c < 0, torch.full_like(c, COS_FLOOR), c)
    one_minus = 1.0 - c
    weight = one_minus.clamp(min=0.0).pow(delta)
    if variant == "literal":
        per_row = weight * torch.log(one_minus.clamp(min=COS_FLOOR))
    else:
        per_row = weight * -torch.log(c.clamp(min=COS_FLOOR))
    return per_row.mean()


def focal_loss(p: Union[float, torch.Tensor], delta: float) -> Union[float, torch.Tensor]:
    """-(1 - p)^delta * log p."""
    if isinstance(p, torch.Tensor):
        if bool((p <= 0).any()):
            raise ValueError("focal loss needs p > 0")
        return -((1.0 - p) ** delta) * torch.log(p)
    if p <= 0:
        raise ValueError(f"focal loss needs p > 0, got {p}")
    return -((1.0 - p) ** delta) * math.log(p)


def total_loss(
    l_elbo: torch.Tensor,
    l_pnsm: torch.Tensor,
    l_esce: torch.Tensor,
    alpha: float = 1.0,
    beta: float = 1.0,
    gamma: float = 1.0,
) -> LossBreakdown:
    for name, w in (("alpha", alpha), ("beta", beta), ("gamma", gamma)):
        if w < 0:
            raise ValueError(f"loss weight {name} must be >= 0, got {w}")
    total = alpha * l_elbo + beta * l_pnsm + gamma * l_esce
    return LossBreakdown(l_elbo, l_pnsm, l_esce, total, float(alpha), float(beta), float(gamma))
