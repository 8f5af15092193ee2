from .build_hgvae import build_hgvae
from .masking import MaskPlan, mask_features, mask_rate_at
