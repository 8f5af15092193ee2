# modules/infrastructure/graph/synthetic.py
"""Planted-partition heterogeneous graphs for desk-scale experiments.

Target nodes are split evenly into classes; every auxiliary node is
assigned a class round-robin. A target-auxiliary edge appears with
probability ``p_in`` when both share a class and ``p_out`` otherwise, so
each ``target-aux-target`` meta-path is class-assortative.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import yaml

from modules.errors import ConfigError
from modules.infrastructure.io.dataset_io import write_dataset

from .hin import EdgeType, HeterogeneousGraph, build_meta_path, make_label_splits, meta_path_adjacency

logger = logging.getLogger(__name__)

SPLIT_SIZES = (20, 40, 60)


@dataclass
class AuxiliaryType:
    name: str
    count: int
    p_in: float = 0.15
    p_out: float = 0.02
    feature_dim: int = 4


def _default_aux() -> List[AuxiliaryType]:
    return [AuxiliaryType("author", 100), AuxiliaryType("subject", 100)]


@dataclass
class SyntheticSpec:
    n_classes: int = 4
    nodes_per_class: int = 100
    target_type: str = "paper"
    aux_types: List[AuxiliaryType] = field(default_factory=_default_aux)
    feature_dim: int = 32
    feature_noise: float = 1.0
    feature_signal: float = 0.3  # scale of the per-class feature centers
    eval_size: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        self.aux_types = [a if isinstance(a, AuxiliaryType) else AuxiliaryType(**a) for a in self.aux_types]
        self.validate()

    def validate(self) -> None:
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.nodes_per_class < 1:
            raise ConfigError(f"nodes_per_class must be >= 1, got {self.nodes_per_class}")
        if self.nodes_per_class <= min(SPLIT_SIZES):
            raise ConfigError(
                f"spec infeasible: nodes_per_class={self.nodes_per_class} leaves no room for any "
                f"label split of sizes {list(SPLIT_SIZES)}"
            )
        if self.feature_dim < 1:
            raise ConfigError(f"feature_dim must be >= 1, got {self.feature_dim}")
        if self.feature_noise < 0 or self.feature_signal < 0:
            raise ConfigError("feature_noise and feature_signal must be >= 0")
        if len(self.aux_types) < 2:
            raise ConfigError("at least two auxiliary node types are required")
        names = [self.target_type] + [a.name for a in self.aux_types]
        if len(set(names)) != len(names):
            raise ConfigError(f"node type names must be unique: {names}")
        for a in self.aux_types:
            if a.count < 1 or a.feature_dim < 1:
                raise ConfigError(f"auxiliary type '{a.name}' needs count >= 1 and feature_dim >= 1")
            for p in (a.p_in, a.p_out):
                if not 0.0 <= p <= 1.0:
                    raise ConfigError(f"'{a.name}': link probability {p} outside [0, 1]")
            if not a.p_in > a.p_out:
                raise ConfigError(f"'{a.name}': p_in={a.p_in} must exceed p_out={a.p_out}")

    @property
    def n_target(self) -> int:
        return self.n_classes * self.nodes_per_class

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def load_synthetic_spec(path: Union[str, Path]) -> SyntheticSpec:
    """Read a spec from YAML or JSON; missing fields keep their defaults."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"synthetic spec not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"failed to parse {path}: {e}") from e
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{path} must contain a mapping")
    try:
        return SyntheticSpec(**raw)
    except TypeError as e:
        raise ConfigError(f"bad synthetic spec {path}: {e}") from e


def aux_classes(count: int, n_classes: int) -> np.ndarray:
    """Round-robin class of each auxiliary node."""
    return np.arange(count) % n_classes


def _class_features(
    rng: np.random.Generator, classes: np.ndarray, n_classes: int, dim: int, signal: float, noise: float
) -> np.ndarray:
    centers = rng.standard_normal((n_classes, dim)) * signal
    return centers[classes] + noise * rng.standard_normal((classes.size, dim))


def generate_graph(spec: SyntheticSpec) -> HeterogeneousGraph:
    rng = np.random.default_rng(spec.seed)
    labels = np.repeat(np.arange(spec.n_classes), spec.nodes_per_class).astype(np.int64)
    features = {
        spec.target_type: _class_features(
            rng, labels, spec.n_classes, spec.feature_dim, spec.feature_signal, spec.feature_noise
        )
    }
    node_counts = {spec.target_type: spec.n_target}
    edge_types: Dict[str, EdgeType] = {}
    edges: Dict[str, np.ndarray] = {}
    meta_paths = []

    for aux in spec.aux_types:
        aux_class = aux_classes(aux.count, spec.n_classes)
        prob = np.where(labels[:, None] == aux_class[None, :], aux.p_in, aux.p_out)
        pairs = np.argwhere(rng.random(prob.shape) < prob).astype(np.int64)
        et = EdgeType(f"{spec.target_type}-{aux.name}", spec.target_type, aux.name)
        edge_types[et.name] = et
        edges[et.name] = pairs.reshape(-1, 2)
        node_counts[aux.name] = aux.count
        features[aux.name] = _class_features(
            rng, aux_class, spec.n_classes, aux.feature_dim, spec.feature_signal, spec.feature_noise
        )
        mp_name = f"{spec.target_type[0]}{aux.name[0]}{spec.target_type[0]}".upper()
        if any(mp.name == mp_name for mp in meta_paths):
            mp_name = f"{spec.target_type}-{aux.name}-{spec.target_type}"
        meta_paths.append(build_meta_path(mp_name, [et.name, et.name], edge_types, spec.target_type))
        logger.debug("relation %s: %d edges", et.name, len(pairs))

    splits = make_label_splits(labels, SPLIT_SIZES, rng, eval_size=spec.eval_size)
    graph = HeterogeneousGraph(
        node_types=[spec.target_type] + [a.name for a in spec.aux_types],
        node_counts=node_counts,
        edge_types=edge_types,
        edges=edges,
        features=features,
        target_type=spec.target_type,
        n_classes=spec.n_classes,
        labels=labels,
        meta_paths=meta_paths,
        splits=splits,
    )
    graph.validate()
    return graph


def gen_synthetic(spec: SyntheticSpec, out_dir: Union[str, Path]) -> Path:
    """Generate a graph from ``spec`` and write it as a dataset directory."""
    graph = generate_graph(spec)
    out = write_dataset(graph, out_dir)
    logger.info(
        "Generated synthetic HIN: %d target nodes, %d classes, splits %s",
        graph.num_targets,
        graph.n_classes,
        sorted(graph.splits),
    )
    return out


def relation_assortativity(graph: HeterogeneousGraph) -> Dict[str, Tuple[float, float]]:
    """Per meta-path ``(same-class share of neighbor pairs, chance share)``.

    Self pairs and unlabeled nodes are ignored.
    """
    if graph.labels is None:
        raise ValueError("assortativity needs labels")
    labels = graph.labels
    known = labels >= 0
    counts = np.bincount(labels[known])
    chance = float((counts * (counts - 1)).sum() / max(known.sum() * (known.sum() - 1), 1))
    out: Dict[str, Tuple[float, float]] = {}
    for mp in graph.meta_paths:
        adj = meta_path_adjacency(graph, mp).adjacency.copy()
        np.fill_diagonal(adj, False)
        adj &= known[:, None] & known[None, :]
        total = int(adj.sum())
        same = int((adj & (labels[:, None] == labels[None, :])).sum())
        out[mp.name] = (same / total if total else 0.0, chance)
    return out


def relation_class_share(graph: HeterogeneousGraph) -> Dict[str, float]:
    """Share of target-auxiliary edges joining same-class endpoints, per relation.

    Auxiliary classes are recovered from the round-robin assignment, so
    this only applies to graphs built by ``generate_graph``. With ``C``
    classes and equal class sizes the expectation is
    ``p_in / (p_in + (C - 1) * p_out)``.
    """
    if graph.labels is None:
        raise ValueError("class share needs labels")
    out: Dict[str, float] = {}
    for name, et in graph.edge_types.items():
        if et.src_type != graph.target_type:
            continue
        pairs = graph.edges[name]
        if len(pairs) == 0:
            out[name] = 0.0
            continue
        aux_class = aux_classes(graph.node_counts[et.dst_type], graph.n_classes)
        same = graph.labels[pairs[:, 0]] == aux_class[pairs[:, 1]]
        out[name] = float(same.mean())
    return out
