# modules/infrastructure/learning/masking.py
"""Target-type attribute masking with a learnable token."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
import torch

from utils.utils import round_half_up


@dataclass(frozen=True)
class MaskPlan:
    rate: float
    masked_ids: np.ndarray  # sorted int64 ids of the masked target nodes
    seed: int

    @classmethod
    def sample(cls, n_target: int, rate: float, seed: int) -> "MaskPlan":
        """Draw ``round(rate * n_target)`` ids uniformly without replacement."""
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"mask rate must lie in [0, 1], got {rate}")
        n_mask = round_half_up(rate * n_target)
        rng = np.random.default_rng(seed)
        ids = np.sort(rng.choice(n_target, size=n_mask, replace=False)) if n_mask else np.zeros(0, np.int64)
        return cls(rate=float(rate), masked_ids=ids.astype(np.int64), seed=int(seed))

    @property
    def size(self) -> int:
        return int(self.masked_ids.size)


def mask_rate_at(mask_cfg: Mapping, t: int, total_epochs: int) -> float:
    """Mask rate for epoch ``t``: constant, or linear from ``rate`` to ``rate_final``."""
    start = float(mask_cfg["rate"])
    final: Optional[float] = mask_cfg.get("rate_final")
    if final is None or total_epochs <= 1:
        return start
    frac = min(max(t / (total_epochs - 1), 0.0), 1.0)
    return start + (float(final) - start) * frac


def mask_features(x_target: torch.Tensor, plan: MaskPlan, token: torch.Tensor) -> torch.Tensor:
    """Return a copy of ``x_target`` whose masked rows are the token.

    ``x_target`` is left untouched; the token receives gradient through
    every masked row.
    """
    if token.dim() != 1 or token.shape[0] != x_target.shape[1]:
        raise ValueError(
            f"mask token has shape {tuple(token.shape)}, expected ({x_target.shape[1]},)"
        )
    if plan.size == 0:
        return x_target.clone()
    keep = torch.ones(x_target.shape[0], 1, dtype=torch.bool, device=x_target.device)
    keep[torch.as_tensor(plan.masked_ids, device=x_target.device)] = False
    return torch.where(keep, x_target, token.to(x_target.dtype).unsqueeze(0))
