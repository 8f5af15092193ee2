# modules/infrastructure/learning/build_hgvae.py
from typing import Mapping

import torch

from .modeling import HANLayer, HGVAE, PosteriorHeads

DTYPES = {"float32": torch.float32, "float64": torch.float64}


def build_hgvae(cfg: Mapping, in_dim: int, num_meta_paths: int) -> HGVAE:
    """Build the model from a resolved config.

    Parameter initialisation draws from a private RNG seeded with
    ``runtime.seed`` so building never disturbs the global torch RNG.
    """
    model_cfg, vi_cfg = cfg["model"], cfg["vi"]
    hidden = int(model_cfg["hidden_dim"])
    heads = int(model_cfg["heads"])
    dropout = float(model_cfg["dropout"])
    semantic_dim = int(model_cfg["semantic_dim"])
    slope = float(model_cfg["negative_slope"])

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(cfg["runtime"]["seed"]))
        model = HGVAE(
            encoder=HANLayer(
                num_meta_paths, in_dim, hidden, heads, dropout, model_cfg["activation"], semantic_dim, slope
            ),
            posterior=PosteriorHeads(
                num_meta_paths,
                hidden,
                heads,
                dropout,
                vi_cfg["head_activation"],
                semantic_dim,
                slope,
                norm_eps=float(vi_cfg["norm_eps"]),
                logvar_clamp=float(vi_cfg["logvar_clamp"]),
            ),
            # single head: F_s need not be divisible by model.heads
            decoder=HANLayer(num_meta_paths, hidden, in_dim, 1, dropout, "identity", semantic_dim, slope),
            in_dim=in_dim,
        )
    return model.to(DTYPES[cfg["runtime"]["dtype"]])
