# modules/presentation/plot.py
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from sklearn.decomposition import PCA  # noqa: E402

from modules.infrastructure.io.embedding_io import read_embeddings  # noqa: E402

logger = logging.getLogger(__name__)


def project_2d(embeddings: np.ndarray, seed: int = 0) -> np.ndarray:
    """First two principal components; 1-D input is padded with zeros."""
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.shape[1] == 2:
        return emb
    if emb.shape[1] < 2:
        return np.hstack([emb, np.zeros((emb.shape[0], 2 - emb.shape[1]))])
    return PCA(n_components=2, svd_solver="full", random_state=seed).fit_transform(emb)


def plot_embeddings(
    embeddings_path: Union[str, Path],
    out_path: Union[str, Path],
    title: Optional[str] = None,
    dpi: int = 150,
) -> Path:
    """Scatter an exported embedding file, one colour per label (-1 in grey)."""
    _, labels, emb = read_embeddings(embeddings_path)
    if emb.shape[0] == 0:
        raise ValueError(f"{embeddings_path} holds no embeddings")
    xy = project_2d(emb)

    fig, ax = plt.subplots(figsize=(6, 6))
    unlabeled = labels < 0
    if unlabeled.any():
        ax.scatter(xy[unlabeled, 0], xy[unlabeled, 1], s=6, c="lightgrey", label="unlabeled")
    cmap = plt.get_cmap("tab10")
    for k, cls in enumerate(np.unique(labels[~unlabeled])):
        sel = labels == cls
        ax.scatter(xy[sel, 0], xy[sel, 1], s=8, color=cmap(k % 10), label=f"class {cls}")
    ax.set_xticks([])
    ax.set_yticks([])
    ax.set_title(title or Path(embeddings_path).name)
    ax.legend(loc="best", fontsize="small", markerscale=2)
    fig.tight_layout()

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=dpi)
    plt.close(fig)
    logger.info("Saved embedding plot to %s", out_path)
    return out_path
