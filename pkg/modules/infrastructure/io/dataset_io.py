# modules/infrastructure/io/dataset_io.py
"""Reading and writing the on-disk dataset directory format.

Layout (UTF-8 text)::

    <data_dir>/
    ├── schema.json              node types + counts, edge types, target type,
    │                            meta-paths (name + edge-type sequence), n_classes
    ├── features_<node_type>.csv one row of floats per node, row index = node id
    ├── edges_<edge_type>.csv    rows ``src,dst``
    ├── labels.csv               rows ``node_id,class_id`` (target type, optional)
    └── splits.json              {"20": {"train": [...], "val": [...], "test": [...]}, ...}
"""
from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from modules.errors import (
    DanglingEdgeError,
    DatasetError,
    InvalidValueError,
    MissingFileError,
    SchemaError,
    ShapeMismatchError,
)
from modules.infrastructure.graph.hin import (
    EdgeType,
    HeterogeneousGraph,
    LabelSplit,
    build_meta_path,
)
from utils.utils import ensure_dir

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _require_file(path: Path) -> Path:
    if not path.is_file():
        raise MissingFileError("required file is missing", path=path)
    return path


def _read_json(path: Path) -> dict:
    _require_file(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg}", path=path, line=e.lineno) from e


def _read_rows(path: Path):
    """Yield ``(line_number, fields)`` for every non-blank CSV row."""
    _require_file(path)
    with open(path, "r", encoding="utf-8", newline="") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            yield lineno, row


def _read_features(path: Path, count: int) -> np.ndarray:
    rows: List[List[float]] = []
    width = None
    for lineno, row in _read_rows(path):
        try:
            values = [float(c) for c in row]
        except ValueError as e:
            raise InvalidValueError(f"not a decimal number: {e}", path=path, line=lineno) from e
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ShapeMismatchError(
                f"row has {len(values)} columns, expected {width}", path=path, line=lineno
            )
        if not all(np.isfinite(values)):
            raise InvalidValueError("feature row contains NaN or Inf", path=path, line=lineno)
        rows.append(values)
        if len(rows) > count:
            raise ShapeMismatchError(
                f"more feature rows than the declared node count {count}", path=path, line=lineno
            )
    if len(rows) != count:
        raise ShapeMismatchError(f"found {len(rows)} feature rows, declared count is {count}", path=path)
    if not rows:
        return np.zeros((0, 0), dtype=np.float64)
    return np.asarray(rows, dtype=np.float64)


def _read_edges(path: Path, et: EdgeType, counts: Dict[str, int]) -> np.ndarray:
    pairs: List[List[int]] = []
    n_src, n_dst = counts[et.src_type], counts[et.dst_type]
    for lineno, row in _read_rows(path):
        if len(row) != 2:
            raise ShapeMismatchError(f"edge row needs 2 columns, got {len(row)}", path=path, line=lineno)
        try:
            src, dst = int(row[0]), int(row[1])
        except ValueError as e:
            raise InvalidValueError(f"edge endpoint is not an integer: {e}", path=path, line=lineno) from e
        if not 0 <= src < n_src:
            raise DanglingEdgeError(
                f"source id {src} outside '{et.src_type}' range [0, {n_src})", path=path, line=lineno
            )
        if not 0 <= dst < n_dst:
            raise DanglingEdgeError(
                f"destination id {dst} outside '{et.dst_type}' range [0, {n_dst})", path=path, line=lineno
            )
        pairs.append([src, dst])
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def _read_labels(path: Path, n_target: int, n_classes: int) -> np.ndarray:
    labels = np.full(n_target, -1, dtype=np.int64)
    for lineno, row in _read_rows(path):
        if len(row) != 2:
            raise ShapeMismatchError(f"label row needs 2 columns, got {len(row)}", path=path, line=lineno)
        try:
            node, cls = int(row[0]), int(row[1])
        except ValueError as e:
            raise InvalidValueError(f"label entry is not an integer: {e}", path=path, line=lineno) from e
        if not 0 <= node < n_target:
            raise DanglingEdgeError(f"node id {node} outside target range [0, {n_target})", path=path, line=lineno)
        if n_classes and not 0 <= cls < n_classes:
            raise InvalidValueError(f"class id {cls} outside [0, {n_classes})", path=path, line=lineno)
        labels[node] = cls
    return labels


def load_dataset(data_dir: PathLike) -> HeterogeneousGraph:
    """Load and validate a dataset directory. Node ids follow file row order."""
    data_dir = Path(data_dir)
    schema_path = data_dir / "schema.json"
    schema = _read_json(schema_path)
    try:
        node_counts = {nt["name"]: int(nt["count"]) for nt in schema["node_types"]}
        node_types = [nt["name"] for nt in schema["node_types"]]
        edge_types = {
            et["name"]: EdgeType(et["name"], et["src"], et["dst"]) for et in schema.get("edge_types", [])
        }
        target_type = schema["target_type"]
        n_classes = int(schema.get("n_classes", 0))
        mp_defs = schema.get("meta_paths", [])
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"malformed schema: {e!r}", path=schema_path) from e

    if target_type not in node_counts:
        raise SchemaError(f"target type '{target_type}' is not declared", path=schema_path)
    for et in edge_types.values():
        for t in (et.src_type, et.dst_type):
            if t not in node_counts:
                raise SchemaError(f"edge type '{et.name}' uses unknown node type '{t}'", path=schema_path)

    try:
        meta_paths = [build_meta_path(m["name"], m["edges"], edge_types, target_type) for m in mp_defs]
    except SchemaError as e:
        raise SchemaError(str(e), path=schema_path) from e

    features = {t: _read_features(data_dir / f"features_{t}.csv", node_counts[t]) for t in node_types}
    edges = {
        name: _read_edges(data_dir / f"edges_{name}.csv", et, node_counts) for name, et in edge_types.items()
    }

    labels = None
    labels_path = data_dir / "labels.csv"
    if labels_path.is_file():
        labels = _read_labels(labels_path, node_counts[target_type], n_classes)

    splits: Dict[int, LabelSplit] = {}
    splits_path = data_dir / "splits.json"
    if splits_path.is_file():
        raw = _read_json(splits_path)
        for size, s in raw.items():
            try:
                split = LabelSplit(int(size), s["train"], s["val"], s["test"])
            except (KeyError, ValueError) as e:
                raise SchemaError(f"bad split '{size}': {e}", path=splits_path) from e
            ids = np.concatenate([split.train_ids, split.val_ids, split.test_ids])
            if ids.size and (ids.min() < 0 or ids.max() >= node_counts[target_type]):
                raise DanglingEdgeError(f"split '{size}' references ids outside the target range", path=splits_path)
            splits[int(size)] = split

    graph = HeterogeneousGraph(
        node_types=node_types,
        node_counts=node_counts,
        edge_types=edge_types,
        edges=edges,
        features=features,
        target_type=target_type,
        n_classes=n_classes,
        labels=labels,
        meta_paths=meta_paths,
        splits=splits,
    )
    try:
        graph.validate()
    except SchemaError as e:
        raise SchemaError(str(e), path=data_dir) from e
    logger.info(
        "Loaded dataset %s: %s, %d edge type(s), %d meta-path(s), target '%s'",
        data_dir,
        ", ".join(f"{t}={node_counts[t]}" for t in node_types),
        len(edge_types),
        len(meta_paths),
        target_type,
    )
    return graph


def write_dataset(graph: HeterogeneousGraph, out_dir: PathLike) -> Path:
    """Write ``graph`` in the directory format read by :func:`load_dataset`."""
    out_dir = ensure_dir(out_dir)
    schema = {
        "node_types": [{"name": t, "count": int(graph.node_counts[t])} for t in graph.node_types],
        "edge_types": [
            {"name": et.name, "src": et.src_type, "dst": et.dst_type} for et in graph.edge_types.values()
        ],
        "target_type": graph.target_type,
        "meta_paths": [{"name": mp.name, "edges": list(mp.edge_sequence)} for mp in graph.meta_paths],
        "n_classes": int(graph.n_classes),
    }
    with open(out_dir / "schema.json", "w", encoding="utf-8") as f:
        json.dump(schema, f, indent=2)

    for t in graph.node_types:
        with open(out_dir / f"features_{t}.csv", "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f)
            for row in graph.features[t]:
                # repr keeps the shortest string that round-trips exactly
                w.writerow([repr(float(v)) for v in row])

    for name in graph.edge_types:
        with open(out_dir / f"edges_{name}.csv", "w", encoding="utf-8", newline="") as f:
            csv.writer(f).writerows(graph.edges[name].tolist())

    if graph.labels is not None:
        with open(out_dir / "labels.csv", "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f)
            for node, cls in enumerate(graph.labels.tolist()):
                if cls >= 0:
                    w.writerow([node, cls])

    if graph.splits:
        raw = {
            str(k): {"train": s.train_ids.tolist(), "val": s.val_ids.tolist(), "test": s.test_ids.tolist()}
            for k, s in sorted(graph.splits.items())
        }
        with open(out_dir / "splits.json", "w", encoding="utf-8") as f:
            json.dump(raw, f)
    logger.info("Wrote dataset to %s", out_dir)
    return out_dir


__all__ = ["load_dataset", "write_dataset", "DatasetError"]
