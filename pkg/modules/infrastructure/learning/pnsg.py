# modules/infrastructure/learning/pnsg.py
"""Progressive negative sample generation.

Negatives come from two sources: dropout-corrupted rows of the anchor
view and variational samples around a shifted posterior mean. The share
of dropout rows falls linearly with the epoch index. Every negative is
detached from the autograd graph.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import torch

from utils.utils import round_half_up

from .modeling.variational import PosteriorStats

logger = logging.getLogger(__name__)

MODES = ("pnsg", "noise", "dropout_only", "vi_only", "unshifted")


@dataclass
class NegativeBatch:
    samples: torch.Tensor  # (m, d), dropout rows first
    n_dropout: int
    n_vi: int
    lam: float
    kappa: float
    mode: str = "pnsg"
    n_noise: int = 0

    def __post_init__(self) -> None:
        if self.n_dropout + self.n_vi + self.n_noise != self.samples.shape[0]:
            raise ValueError("negative counts do not add up to the number of rows")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")

    @property
    def m(self) -> int:
        return int(self.samples.shape[0])


def lambda_schedule(t: int, total_epochs: int) -> float:
    if total_epochs < 1:
        raise ValueError(f"total epochs must be >= 1, got {total_epochs}")
    if not 0 <= t <= total_epochs:
        raise ValueError(f"epoch index {t} outside [0, {total_epochs}]")
    return 1.0 - t / total_epochs


def _sample_rows(n: int, m: int, generator: Optional[torch.Generator], device) -> torch.Tensor:
    return torch.randint(0, n, (m,), generator=generator, device=device)


def dropout_negatives(
    h1: torch.Tensor, rate: float, m: int, generator: Optional[torch.Generator] = None
) -> torch.Tensor:
    """``m`` uniformly drawn rows of ``h1`` with inverted elementwise dropout."""
    if not 0.0 < rate < 1.0:
        raise ValueError(f"dropout rate must lie in (0, 1), got {rate}")
    src = h1.detach()
    if m == 0:
        return src.new_zeros((0, src.shape[1]))
    rows = src[_sample_rows(src.shape[0], m, generator, src.device)]
    keep = torch.rand(rows.shape, generator=generator, dtype=rows.dtype, device=rows.device) >= rate
    return rows * keep / (1.0 - rate)


def shifted_mean(mu: torch.Tensor, kappa: float) -> torch.Tensor:
    return kappa * mu


def vi_negatives(
    mu_star: torch.Tensor,
    log_var: torch.Tensor,
    m: int,
    generator: Optional[torch.Generator] = None,
) -> torch.Tensor:
    """``m`` rows mu*_i + sigma_i * eps for uniformly drawn nodes i, fresh eps per row."""
    if mu_star.shape != log_var.shape:
        raise ValueError(f"mu* {tuple(mu_star.shape)} and log_var {tuple(log_var.shape)} differ")
    mu_star, log_var = mu_star.detach(), log_var.detach()
    if m == 0:
        return mu_star.new_zeros((0, mu_star.shape[1]))
    idx = _sample_rows(mu_star.shape[0], m, generator, mu_star.device)
    eps = torch.randn((m, mu_star.shape[1]), generator=generator, dtype=mu_star.dtype, device=mu_star.device)
    return mu_star[idx] + torch.exp(0.5 * log_var[idx]) * eps


def assemble_negatives(
    h1: torch.Tensor,
    stats: PosteriorStats,
    t: int,
    total_epochs: int,
    m: int,
    kappa: float,
    rate: float,
    generator: Optional[torch.Generator] = None,
    lam: Optional[float] = None,
    mode: str = "pnsg",
) -> NegativeBatch:
    """Split ``m`` into round(lambda*m) dropout rows and the rest VI rows.

    ``lam`` pins the mixing value instead of deriving it from the schedule.
    """
    if m < 1:
        raise ValueError(f"need at least one negative, got m={m}")
    if lam is None:
        lam = lambda_schedule(t, total_epochs)
    n_dropout = round_half_up(lam * m)
    n_vi = m - n_dropout
    parts = [
        dropout_negatives(h1, rate, n_dropout, generator),
        vi_negatives(shifted_mean(stats.mu, kappa), stats.log_var, n_vi, generator),
    ]
    return NegativeBatch(
        samples=torch.cat(parts, dim=0),
        n_dropout=n_dropout,
        n_vi=n_vi,
        lam=float(lam),
        kappa=float(kappa),
        mode=mode,
    )


def ablation_negatives(
    mode: str,
    h1: torch.Tensor,
    stats: PosteriorStats,
    t: int,
    total_epochs: int,
    m: int,
    kappa: float,
    rate: float,
    generator: Optional[torch.Generator] = None,
) -> NegativeBatch:
    """Negatives for the full strategy and its four ablated variants.

    ``pnsg`` is the scheduled mix; ``noise`` draws N(0, 1) rows;
    ``dropout_only`` pins lambda to 1; ``vi_only`` pins it to 0;
    ``unshifted`` is ``vi_only`` with kappa forced to 1.
    """
    if mode == "pnsg":
        return assemble_negatives(h1, stats, t, total_epochs, m, kappa, rate, generator)
    if mode == "noise":
        if m < 1:
            raise ValueError(f"need at least one negative, got m={m}")
        samples = torch.randn((m, h1.shape[1]), generator=generator, dtype=h1.dtype, device=h1.device)
        return NegativeBatch(samples, n_dropout=0, n_vi=0, lam=0.0, kappa=float(kappa), mode=mode, n_noise=m)
    if mode == "dropout_only":
        return assemble_negatives(h1, stats, t, total_epochs, m, kappa, rate, generator, lam=1.0, mode=mode)
    if mode == "vi_only":
        return assemble_negatives(h1, stats, t, total_epochs, m, kappa, rate, generator, lam=0.0, mode=mode)
    if mode == "unshifted":
        return assemble_negatives(h1, stats, t, total_epochs, m, 1.0, rate, generator, lam=0.0, mode=mode)
    raise ValueError(f"unknown negative sampling mode '{mode}', expected one of {MODES}")
