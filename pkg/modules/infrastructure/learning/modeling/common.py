# modules/infrastructure/learning/modeling/common.py
from typing import Callable, Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

_ACTIVATIONS = {
    "elu": F.elu,
    "relu": F.relu,
    "leaky_relu": F.leaky_relu,
    "tanh": torch.tanh,
    "identity": lambda x: x,
}


def get_activation(name: str) -> Callable[[torch.Tensor], torch.Tensor]:
    try:
        return _ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation '{name}', expected one of {sorted(_ACTIVATIONS)}") from None


def seeded_dropout(
    x: torch.Tensor, rate: float, generator: Optional[torch.Generator] = None
) -> torch.Tensor:
    """Inverted dropout whose Bernoulli draws come from ``generator``."""
    if rate <= 0.0:
        return x
    if rate >= 1.0:
        return torch.zeros_like(x)
    keep = torch.rand(x.shape, generator=generator, dtype=x.dtype, device=x.device) >= rate
    return x * keep / (1.0 - rate)


class RowNorm(nn.Module):
    """Per-row standardization over the last axis, no affine parameters."""

    def __init__(self, eps: float = 1e-5) -> None:
        super().__init__()
        self.eps = eps

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        u = x.mean(-1, keepdim=True)
        s = (x - u).pow(2).mean(-1, keepdim=True)
        return (x - u) / torch.sqrt(s + self.eps)
