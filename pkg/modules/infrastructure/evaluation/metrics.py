# modules/infrastructure/evaluation/metrics.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.cluster import KMeans
from sklearn.metrics import adjusted_rand_score, f1_score, normalized_mutual_info_score

logger = logging.getLogger(__name__)


def f1_scores(
    y_true: Sequence[int], y_pred: Sequence[int], n_classes: Optional[int] = None
) -> Tuple[float, float]:
    """Return ``(micro_f1, macro_f1)``.

    Classes ``0..n_classes-1`` all enter the macro average; a class with
    no support and no predictions contributes 0.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise ValueError("f1_scores needs at least one sample")
    if y_true.shape != y_pred.shape:
        raise ValueError(f"y_true {y_true.shape} and y_pred {y_pred.shape} differ in length")
    if n_classes is None:
        n_classes = int(max(y_true.max(), y_pred.max())) + 1
    labels = list(range(n_classes))
    micro = f1_score(y_true, y_pred, labels=labels, average="micro", zero_division=0)
    macro = f1_score(y_true, y_pred, labels=labels, average="macro", zero_division=0)
    return float(micro), float(macro)


@dataclass
class ClusterResult:
    nmi_mean: float
    nmi_std: float
    ari_mean: float
    ari_std: float
    nmi: List[float]
    ari: List[float]
    seeds: List[int]


def clustering_scores(labels: Sequence[int], pred: Sequence[int]) -> Tuple[float, float]:
    """``(NMI, ARI)`` of a predicted partition; NMI uses the arithmetic-mean normalization."""
    labels, pred = np.asarray(labels), np.asarray(pred)
    if labels.size == 0 or labels.shape != pred.shape:
        raise ValueError("clustering scores need two non-empty partitions of equal length")
    nmi = normalized_mutual_info_score(labels, pred, average_method="arithmetic")
    return float(nmi), float(adjusted_rand_score(labels, pred))


def cluster_eval(
    embeddings: np.ndarray,
    labels: Sequence[int],
    k: int,
    repeats: int = 5,
    seed: int = 0,
    n_init: int = 10,
) -> ClusterResult:
    """k-means (k-means++ seeding, ``n_init`` restarts) scored by NMI and ARI.

    Only nodes with a label >= 0 take part.
    """
    if k < 2:
        raise ValueError(f"clustering needs k >= 2, got {k}")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    labels = np.asarray(labels, dtype=np.int64)
    emb = np.asarray(embeddings, dtype=np.float64)
    keep = labels >= 0
    emb, labels = emb[keep], labels[keep]
    if emb.shape[0] < k:
        raise ValueError(f"{emb.shape[0]} labeled points cannot form {k} clusters")

    nmis, aris, seeds = [], [], []
    for r in range(repeats):
        rs = seed + r
        km = KMeans(n_clusters=k, init="k-means++", n_init=n_init, random_state=rs)
        pred = km.fit_predict(emb)
        nmi, ari = clustering_scores(labels, pred)
        nmis.append(nmi)
        aris.append(ari)
        seeds.append(rs)
        logger.debug("k-means repeat %d (seed %d): NMI=%.4f ARI=%.4f", r, rs, nmis[-1], aris[-1])
    return ClusterResult(
        nmi_mean=float(np.mean(nmis)),
        nmi_std=float(np.std(nmis)),
        ari_mean=float(np.mean(aris)),
        ari_std=float(np.std(aris)),
        nmi=nmis,
        ari=aris,
        seeds=seeds,
    )
