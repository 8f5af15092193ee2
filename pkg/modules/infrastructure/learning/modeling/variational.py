# modules/infrastructure/learning/modeling/variational.py
"""Diagonal-Gaussian posterior heads, reparameterized sampling and the KL term."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import torch
import torch.nn as nn

from .common import RowNorm
from .han import HANLayer


@dataclass
class PosteriorStats:
    mu: torch.Tensor
    log_var: torch.Tensor

    def __post_init__(self) -> None:
        if self.mu.shape != self.log_var.shape:
            raise ValueError(f"mu {tuple(self.mu.shape)} and log_var {tuple(self.log_var.shape)} differ")

    @property
    def sigma(self) -> torch.Tensor:
        return torch.exp(0.5 * self.log_var)

    def detach(self) -> "PosteriorStats":
        return PosteriorStats(self.mu.detach(), self.log_var.detach())


class PosteriorHeads(nn.Module):
    """Two HAN layers producing ``mu`` and ``log_var``, each followed by ``RowNorm``."""

    def __init__(
        self,
        num_meta_paths: int,
        dim: int,
        heads: int = 1,
        dropout: float = 0.5,
        activation: str = "identity",
        semantic_dim: int = 128,
        negative_slope: float = 0.2,
        norm_eps: float = 1e-5,
        logvar_clamp: Optional[float] = 10.0,
    ) -> None:
        super().__init__()
        self.mu_head = HANLayer(num_meta_paths, dim, dim, heads, dropout, activation, semantic_dim, negative_slope)
        self.logvar_head = HANLayer(
            num_meta_paths, dim, dim, heads, dropout, activation, semantic_dim, negative_slope
        )
        self.norm = RowNorm(norm_eps)
        self.logvar_clamp = logvar_clamp

    def forward(self, h: torch.Tensor, adjacencies: Sequence[torch.Tensor]) -> PosteriorStats:
        mu = self.norm(self.mu_head(h, adjacencies))
        log_var = self.norm(self.logvar_head(h, adjacencies))
        if self.logvar_clamp is not None:
            log_var = log_var.clamp(-self.logvar_clamp, self.logvar_clamp)
        return PosteriorStats(mu=mu, log_var=log_var)


def infer_posterior(
    h: torch.Tensor, adjacencies: Sequence[torch.Tensor], heads: PosteriorHeads
) -> PosteriorStats:
    if h.shape[1] != heads.mu_head.in_dim:
        raise ValueError(f"encoder output has dim {h.shape[1]}, heads expect {heads.mu_head.in_dim}")
    return heads(h, adjacencies)


def reparameterize(
    stats: PosteriorStats,
    generator: Optional[torch.Generator] = None,
    eps: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """z = mu + exp(log_var / 2) * eps; ``eps`` may be supplied to fix the noise."""
    if eps is None:
        eps = torch.randn(stats.mu.shape, generator=generator, dtype=stats.mu.dtype, device=stats.mu.device)
    return stats.mu + torch.exp(0.5 * stats.log_var) * eps


def kl_standard_normal(stats: PosteriorStats) -> torch.Tensor:
    """Mean over nodes of KL(N(mu, sigma^2) || N(0, I))."""
    per_node = 0.5 * (stats.mu.pow(2) + stats.log_var.exp() - 1.0 - stats.log_var).sum(-1)
    return per_node.mean()
