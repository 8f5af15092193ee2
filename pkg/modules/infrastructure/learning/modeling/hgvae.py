# modules/infrastructure/learning/modeling/hgvae.py
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch
from torch import nn

from .han import HANLayer, EncodedViews, make_views
from .variational import PosteriorHeads, PosteriorStats, infer_posterior


class HGVAE(nn.Module):
    def __init__(
        self,
        encoder: HANLayer,
        posterior: PosteriorHeads,
        decoder: HANLayer,
        in_dim: int,
    ) -> None:
        """
        Variational HAN autoencoder over the target node type.

        Arguments:
          encoder (HANLayer): maps (masked) features to hidden embeddings H.
          posterior (PosteriorHeads): maps H to the Gaussian posterior.
          decoder (HANLayer): maps a latent sample back to feature space.
          in_dim (int): feature dimension F_s; the mask token has this length.
        """
        super().__init__()
        self.encoder = encoder
        self.posterior = posterior
        self.decoder = decoder
        self.mask_token = nn.Parameter(torch.zeros(in_dim))

    @property
    def hidden_dim(self) -> int:
        return self.encoder.out_dim

    def make_views(
        self,
        x_masked: torch.Tensor,
        adjacencies: Sequence[torch.Tensor],
        generator: Optional[torch.Generator] = None,
    ) -> EncodedViews:
        return make_views(self.encoder, x_masked, adjacencies, generator)

    def infer_posterior(self, h: torch.Tensor, adjacencies: Sequence[torch.Tensor]) -> PosteriorStats:
        return infer_posterior(h, adjacencies, self.posterior)

    def decode(
        self,
        z: torch.Tensor,
        adjacencies: Sequence[torch.Tensor],
        dropout_on: bool = False,
        generator: Optional[torch.Generator] = None,
    ) -> torch.Tensor:
        return self.decoder(z, adjacencies, dropout_on=dropout_on, generator=generator)

    @torch.no_grad()
    def embed(self, x: torch.Tensor, adjacencies: Sequence[torch.Tensor]) -> torch.Tensor:
        """Deterministic encoder output: no masking, no dropout."""
        return self.encoder(x, adjacencies, dropout_on=False)

    def semantic_weights(self) -> Dict[str, List[float]]:
        out = {}
        for name, layer in (
            ("encoder", self.encoder),
            ("mu_head", self.posterior.mu_head),
            ("logvar_head", self.posterior.logvar_head),
            ("decoder", self.decoder),
        ):
            if layer.last_beta is not None:
                out[name] = [float(b) for b in layer.last_beta]
        return out


def adjacency_tensors(adjacencies, device: Optional[torch.device] = None) -> List[torch.Tensor]:
    """Convert ``MetaPathAdjacency`` objects (or bool arrays) into bool tensors."""
    out = []
    for a in adjacencies:
        arr = getattr(a, "adjacency", a)
        out.append(torch.as_tensor(np.asarray(arr, dtype=bool), device=device))
    return out
