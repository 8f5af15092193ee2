from .common import RowNorm, get_activation, seeded_dropout
from .han import (
    EncodedViews,
    HANLayer,
    HanOutput,
    NodeLevelAttention,
    SemanticAttention,
    encode,
    make_views,
    node_level_attention,
    semantic_level_attention,
)
from .hgvae import HGVAE, adjacency_tensors
from .variational import (
    PosteriorHeads,
    PosteriorStats,
    infer_posterior,
    kl_standard_normal,
    reparameterize,
)
