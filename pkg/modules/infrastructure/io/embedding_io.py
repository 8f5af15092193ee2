# modules/infrastructure/io/embedding_io.py
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from modules.errors import DatasetError, MissingFileError

logger = logging.getLogger(__name__)


def export_embeddings(
    embeddings: np.ndarray,
    path: Union[str, Path],
    labels: Optional[np.ndarray] = None,
) -> Path:
    """Write ``node_id,label,dim_0..dim_{d-1}``; unknown labels are -1."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.ndim != 2:
        emb = emb.reshape(emb.shape[0] if emb.size else 0, -1)
    n, d = emb.shape
    if labels is None:
        labels = np.full(n, -1, dtype=np.int64)
    header = ",".join(["node_id", "label"] + [f"dim_{k}" for k in range(d)])
    with open(path, "w", encoding="utf-8") as f:
        f.write(header + "\n")
        for i in range(n):
            f.write(",".join([str(i), str(int(labels[i]))] + [repr(float(v)) for v in emb[i]]) + "\n")
    logger.info("Exported %d x %d embeddings to %s", n, d, path)
    return path


def read_embeddings(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(node_ids, labels, embeddings)`` from an exported file."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError("embedding file is missing", path=path)
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        has_rows = any(line.strip() for line in f)
    if header[:2] != ["node_id", "label"]:
        raise DatasetError("embedding file must start with node_id,label", path=path, line=1)
    d = len(header) - 2
    if not has_rows:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros((0, d))
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    except ValueError as e:
        raise DatasetError(f"malformed embedding file: {e}", path=path) from e
    if data.shape[1] != d + 2:
        raise DatasetError(f"rows have {data.shape[1]} columns, header declares {d + 2}", path=path)
    return data[:, 0].astype(np.int64), data[:, 1].astype(np.int64), data[:, 2:]
