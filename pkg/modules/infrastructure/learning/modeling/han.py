# modules/infrastructure/learning/modeling/han.py
"""Hierarchical heterogeneous attention (HAN) over meta-path adjacencies.

Node-level attention runs a GAT-style softmax over each meta-path's
neighbor set; semantic-level attention fuses the per-path embeddings
with a softmax over per-path importance scores. All adjacencies are dense
boolean ``(N, N)`` tensors whose diagonal is true.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

from .common import get_activation, seeded_dropout

SeedLike = Union[int, torch.Generator, None]


def as_generator(seed: SeedLike) -> Optional[torch.Generator]:
    if seed is None or isinstance(seed, torch.Generator):
        return seed
    g = torch.Generator()
    g.manual_seed(int(seed))
    return g


class NodeLevelAttention(nn.Module):
    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        heads: int = 1,
        dropout: float = 0.5,
        negative_slope: float = 0.2,
        activation: str = "elu",
    ) -> None:
        """
        Attention over the neighbors of one meta-path.

        Arguments:
          in_dim (int): input feature dimension
          out_dim (int): output dimension, split evenly across heads and
            concatenated back
          heads (int): number of attention heads
          dropout (float): rate for input-feature and attention-weight dropout
          negative_slope (float): LeakyReLU slope of the raw scores
          activation (str): output non-linearity
        """
        super().__init__()
        if out_dim % heads != 0:
            raise ValueError(f"out_dim={out_dim} is not divisible by heads={heads}")
        self.heads = heads
        self.head_dim = out_dim // heads
        self.dropout = dropout
        self.negative_slope = negative_slope
        self.activation_name = activation
        self.act = get_activation(activation)
        self.weight = nn.Parameter(torch.empty(heads, in_dim, self.head_dim))
        self.attn_src = nn.Parameter(torch.empty(heads, self.head_dim))
        self.attn_dst = nn.Parameter(torch.empty(heads, self.head_dim))
        self.reset_parameters()

    def reset_parameters(self) -> None:
        gain = nn.init.calculate_gain("relu")
        for h in range(self.heads):
            nn.init.xavier_normal_(self.weight.data[h], gain=gain)
        nn.init.xavier_normal_(self.attn_src.data, gain=gain)
        nn.init.xavier_normal_(self.attn_dst.data, gain=gain)

    def scores(self, wh: torch.Tensor) -> torch.Tensor:
        """Raw scores e_ij = LeakyReLU(a^T [W h_i || W h_j]), shape (heads, N, N)."""
        el = (wh * self.attn_src.unsqueeze(1)).sum(-1)
        er = (wh * self.attn_dst.unsqueeze(1)).sum(-1)
        return F.leaky_relu(el.unsqueeze(2) + er.unsqueeze(1), self.negative_slope)

    def forward(
        self,
        x: torch.Tensor,
        adjacency: torch.Tensor,
        dropout_on: bool = False,
        generator: Optional[torch.Generator] = None,
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Returns:
          torch.Tensor: (N, out_dim) per-path embeddings
          torch.Tensor: (heads, N, N) attention weights, rows summing to 1
        """
        if adjacency.shape != (x.shape[0], x.shape[0]):
            raise ValueError(f"adjacency shape {tuple(adjacency.shape)} does not match {x.shape[0]} nodes")
        if dropout_on:
            x = seeded_dropout(x, self.dropout, generator)
        wh = torch.einsum("ni,hid->hnd", x, self.weight)
        e = self.scores(wh).masked_fill(~adjacency.unsqueeze(0), float("-inf"))
        alpha = torch.softmax(e, dim=-1)
        att = seeded_dropout(alpha, self.dropout, generator) if dropout_on else alpha
        out = torch.matmul(att, wh)
        out = out.permute(1, 0, 2).reshape(x.shape[0], self.heads * self.head_dim)
        return self.act(out), alpha


class SemanticAttention(nn.Module):
    def __init__(self, in_dim: int, hidden_dim: int = 128) -> None:
        """Fuses per-meta-path embeddings; scores are q^T tanh(W h + b) averaged over nodes."""
        super().__init__()
        self.project = nn.Sequential(
            nn.Linear(in_dim, hidden_dim),
            nn.Tanh(),
            nn.Linear(hidden_dim, 1, bias=False),
        )

    def forward(self, per_path: Sequence[torch.Tensor]) -> Tuple[torch.Tensor, torch.Tensor]:
        if len(per_path) == 0:
            raise ValueError("semantic attention needs at least one meta-path embedding")
        z = torch.stack(list(per_path), dim=0)  # (P, N, d)
        w = self.project(z).mean(dim=1).squeeze(-1)  # (P,)
        beta = torch.softmax(w, dim=0)
        h = (beta.view(-1, 1, 1) * z).sum(dim=0)
        return h, beta


@dataclass
class HanOutput:
    h: torch.Tensor
    per_path: List[torch.Tensor]
    beta: torch.Tensor
    attention: List[torch.Tensor]


class HANLayer(nn.Module):
    def __init__(
        self,
        num_meta_paths: int,
        in_dim: int,
        out_dim: int,
        heads: int = 1,
        dropout: float = 0.5,
        activation: str = "elu",
        semantic_dim: int = 128,
        negative_slope: float = 0.2,
    ) -> None:
        super().__init__()
        if num_meta_paths < 1:
            raise ValueError("HANLayer needs at least one meta-path")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.node_attention = nn.ModuleList(
            [
                NodeLevelAttention(in_dim, out_dim, heads, dropout, negative_slope, activation)
                for _ in range(num_meta_paths)
            ]
        )
        self.semantic_attention = SemanticAttention(out_dim, semantic_dim)
        self.last_beta: Optional[torch.Tensor] = None

    @property
    def dropout(self) -> float:
        return self.node_attention[0].dropout

    def forward_detailed(
        self,
        x: torch.Tensor,
        adjacencies: Sequence[torch.Tensor],
        dropout_on: bool = False,
        generator: Optional[torch.Generator] = None,
    ) -> HanOutput:
        if len(adjacencies) != len(self.node_attention):
            raise ValueError(
                f"got {len(adjacencies)} adjacencies for {len(self.node_attention)} meta-paths"
            )
        per_path, attention = [], []
        for layer, adj in zip(self.node_attention, adjacencies):
            h_rho, alpha = layer(x, adj, dropout_on=dropout_on, generator=generator)
            per_path.append(h_rho)
            attention.append(alpha)
        h, beta = self.semantic_attention(per_path)
        self.last_beta = beta.detach()
        return HanOutput(h=h, per_path=per_path, beta=beta, attention=attention)

    def forward(
        self,
        x: torch.Tensor,
        adjacencies: Sequence[torch.Tensor],
        dropout_on: bool = False,
        generator: Optional[torch.Generator] = None,
    ) -> torch.Tensor:
        return self.forward_detailed(x, adjacencies, dropout_on, generator).h


@dataclass
class EncodedViews:
    h1: torch.Tensor  # anchor
    h2: torch.Tensor  # positive


def node_level_attention(
    x: torch.Tensor, adjacency: torch.Tensor, layer: NodeLevelAttention
) -> Tuple[torch.Tensor, torch.Tensor]:
    return layer(x, adjacency, dropout_on=False)


def semantic_level_attention(
    per_path: Sequence[torch.Tensor], layer: SemanticAttention
) -> Tuple[torch.Tensor, torch.Tensor]:
    return layer(per_path)


def encode(
    encoder: HANLayer,
    x_masked: torch.Tensor,
    adjacencies: Sequence[torch.Tensor],
    dropout_on: bool = False,
    seed: SeedLike = None,
) -> torch.Tensor:
    return encoder(x_masked, adjacencies, dropout_on=dropout_on, generator=as_generator(seed))


def make_views(
    encoder: HANLayer,
    x_masked: torch.Tensor,
    adjacencies: Sequence[torch.Tensor],
    seed: SeedLike = None,
) -> EncodedViews:
    """Two stochastic passes; the dropout masks differ because the generator advances."""
    g = as_generator(seed)
    h1 = encoder(x_masked, adjacencies, dropout_on=True, generator=g)
    h2 = encoder(x_masked, adjacencies, dropout_on=True, generator=g)
    return EncodedViews(h1=h1, h2=h2)
