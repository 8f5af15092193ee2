# modules/infrastructure/evaluation/probe.py
"""Linear probe: multinomial logistic regression on frozen embeddings."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression

from modules.infrastructure.graph.hin import LabelSplit

from .metrics import f1_scores

logger = logging.getLogger(__name__)

DEFAULT_L2_GRID = (1e-3, 1e-2, 1e-1, 1.0)


@dataclass
class ProbeResult:
    split_size: int
    micro_f1_mean: float
    micro_f1_std: float
    macro_f1_mean: float
    macro_f1_std: float
    val_micro_f1: float  # best validation score of the last repeat
    micro_f1: List[float] = field(default_factory=list)
    macro_f1: List[float] = field(default_factory=list)
    chosen_l2: List[float] = field(default_factory=list)
    seeds: List[int] = field(default_factory=list)


def _fit(x: np.ndarray, y: np.ndarray, l2: float, max_iter: int, seed: int) -> LogisticRegression:
    clf = LogisticRegression(C=1.0 / l2, max_iter=max_iter, random_state=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        clf.fit(x, y)
    return clf


def linear_probe(
    embeddings: np.ndarray,
    labels: Sequence[int],
    split: LabelSplit,
    n_classes: Optional[int] = None,
    repeats: int = 5,
    l2_grid: Sequence[float] = DEFAULT_L2_GRID,
    max_iter: int = 1000,
    seed: int = 0,
) -> ProbeResult:
    """Fit on ``split.train_ids``, pick the L2 strength on validation
    Micro-F1, and report test Micro/Macro-F1 as mean and std over repeats.

    Raises:
      ValueError: a class has no training node, or the split references
        unlabeled nodes.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    if not l2_grid:
        raise ValueError("the L2 grid is empty")
    emb = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1

    for name, ids in (("train", split.train_ids), ("val", split.val_ids), ("test", split.test_ids)):
        if ids.size == 0:
            raise ValueError(f"split {split.split_size}: {name} set is empty")
        if (labels[ids] < 0).any():
            raise ValueError(f"split {split.split_size}: {name} set contains unlabeled nodes")
    y_train = labels[split.train_ids]
    missing = sorted(set(range(n_classes)) - set(np.unique(y_train).tolist()))
    if missing:
        raise ValueError(f"split {split.split_size}: classes {missing} are absent from the training set")

    x_train, x_val, x_test = emb[split.train_ids], emb[split.val_ids], emb[split.test_ids]
    y_val, y_test = labels[split.val_ids], labels[split.test_ids]

    micros, macros, chosen, seeds = [], [], [], []
    best_val = 0.0
    for r in range(repeats):
        rs = seed + r
        best_val, best_clf, best_l2 = -1.0, None, None
        for l2 in l2_grid:
            clf = _fit(x_train, y_train, float(l2), max_iter, rs)
            val_micro, _ = f1_scores(y_val, clf.predict(x_val), n_classes)
            if val_micro > best_val:
                best_val, best_clf, best_l2 = val_micro, clf, float(l2)
        micro, macro = f1_scores(y_test, best_clf.predict(x_test), n_classes)
        micros.append(micro)
        macros.append(macro)
        chosen.append(best_l2)
        seeds.append(rs)

    result = ProbeResult(
        split_size=split.split_size,
        micro_f1_mean=float(np.mean(micros)),
        micro_f1_std=float(np.std(micros)),
        macro_f1_mean=float(np.mean(macros)),
        macro_f1_std=float(np.std(macros)),
        val_micro_f1=float(best_val),
        micro_f1=micros,
        macro_f1=macros,
        chosen_l2=chosen,
        seeds=seeds,
    )
    logger.info(
        "probe split %d: Mi-F1 %.4f±%.4f Ma-F1 %.4f±%.4f (l2=%s)",
        split.split_size,
        result.micro_f1_mean,
        result.micro_f1_std,
        result.macro_f1_mean,
        result.macro_f1_std,
        chosen,
    )
    return result
