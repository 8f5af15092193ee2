# modules/infrastructure/graph/hin.py
"""Heterogeneous graph data model and meta-path adjacency algebra.

Node ids are dense and 0-based per node type. Edges are stored per edge
type as an ``(E, 2)`` integer array of ``(src_id, dst_id)`` pairs whose
endpoint types are declared by the matching :class:`EdgeType`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from modules.errors import SchemaError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EdgeType:
    name: str
    src_type: str
    dst_type: str


@dataclass(frozen=True)
class MetaPath:
    """A typed walk from the target type back to the target type.

    ``edge_sequence[k]`` connects ``node_sequence[k]`` to
    ``node_sequence[k + 1]``; an edge type may be walked against its
    declared direction.
    """

    name: str
    node_sequence: Tuple[str, ...]
    edge_sequence: Tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.name}({'-'.join(self.node_sequence)})"


@dataclass
class LabelSplit:
    split_size: int
    train_ids: np.ndarray
    val_ids: np.ndarray
    test_ids: np.ndarray

    def __post_init__(self) -> None:
        self.train_ids = np.asarray(self.train_ids, dtype=np.int64)
        self.val_ids = np.asarray(self.val_ids, dtype=np.int64)
        self.test_ids = np.asarray(self.test_ids, dtype=np.int64)
        tr, va, te = set(self.train_ids.tolist()), set(self.val_ids.tolist()), set(self.test_ids.tolist())
        if tr & va or tr & te or va & te:
            raise ValueError(f"split {self.split_size}: train/val/test ids overlap")


@dataclass
class HeterogeneousGraph:
    node_types: List[str]
    node_counts: Dict[str, int]
    edge_types: Dict[str, EdgeType]
    edges: Dict[str, np.ndarray]
    features: Dict[str, np.ndarray]
    target_type: str
    n_classes: int = 0
    labels: Optional[np.ndarray] = None
    meta_paths: List[MetaPath] = field(default_factory=list)
    splits: Dict[int, LabelSplit] = field(default_factory=dict)

    @property
    def num_targets(self) -> int:
        return self.node_counts[self.target_type]

    @property
    def target_features(self) -> np.ndarray:
        return self.features[self.target_type]

    @property
    def is_heterogeneous(self) -> bool:
        return len(self.node_types) + len(self.edge_types) > 2

    def validate(self) -> None:
        """Check the structural invariants; raises ``SchemaError``."""
        if self.target_type not in self.node_counts:
            raise SchemaError(f"target type '{self.target_type}' is not a declared node type")
        for name, et in self.edge_types.items():
            for t in (et.src_type, et.dst_type):
                if t not in self.node_counts:
                    raise SchemaError(f"edge type '{name}' references unknown node type '{t}'")
            pairs = self.edges.get(name, np.zeros((0, 2), dtype=np.int64))
            if pairs.size and (
                pairs[:, 0].min() < 0
                or pairs[:, 0].max() >= self.node_counts[et.src_type]
                or pairs[:, 1].min() < 0
                or pairs[:, 1].max() >= self.node_counts[et.dst_type]
            ):
                raise SchemaError(f"edge type '{name}' has an endpoint outside its type's id range")
        for t, x in self.features.items():
            if x.shape[0] != self.node_counts[t]:
                raise SchemaError(f"features of '{t}' have {x.shape[0]} rows, expected {self.node_counts[t]}")
            if not np.all(np.isfinite(x)):
                raise SchemaError(f"features of '{t}' contain NaN or Inf")
        if not self.is_heterogeneous:
            logger.warning(
                "graph has %d node type(s) and %d edge type(s); it degenerates to a homogeneous graph",
                len(self.node_types),
                len(self.edge_types),
            )

    def same_as(self, other: "HeterogeneousGraph") -> bool:
        """Field-by-field equality, array contents included."""
        if (
            self.node_types != other.node_types
            or self.node_counts != other.node_counts
            or self.edge_types != other.edge_types
            or self.target_type != other.target_type
            or self.n_classes != other.n_classes
            or self.meta_paths != other.meta_paths
        ):
            return False
        if set(self.edges) != set(other.edges) or set(self.features) != set(other.features):
            return False
        if any(not np.array_equal(self.edges[k], other.edges[k]) for k in self.edges):
            return False
        if any(not np.array_equal(self.features[k], other.features[k]) for k in self.features):
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        if self.labels is not None and not np.array_equal(self.labels, other.labels):
            return False
        if set(self.splits) != set(other.splits):
            return False
        for k, s in self.splits.items():
            o = other.splits[k]
            if not (
                np.array_equal(s.train_ids, o.train_ids)
                and np.array_equal(s.val_ids, o.val_ids)
                and np.array_equal(s.test_ids, o.test_ids)
            ):
                return False
        return True


@dataclass
class MetaPathAdjacency:
    meta_path: MetaPath
    adjacency: np.ndarray  # bool, (N_target, N_target), diagonal true

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])


def build_meta_path(
    name: str,
    edge_sequence: Sequence[str],
    edge_types: Dict[str, EdgeType],
    target_type: str,
) -> MetaPath:
    """Derive the node sequence of a meta-path from its edge-type sequence."""
    if len(edge_sequence) < 2:
        raise SchemaError(f"meta-path '{name}' needs at least two edge types")
    nodes = [target_type]
    for et_name in edge_sequence:
        et = edge_types.get(et_name)
        if et is None:
            raise SchemaError(f"meta-path '{name}' references unknown edge type '{et_name}'")
        cur = nodes[-1]
        if et.src_type == cur:
            nodes.append(et.dst_type)
        elif et.dst_type == cur:
            nodes.append(et.src_type)
        else:
            raise SchemaError(
                f"meta-path '{name}': edge type '{et_name}' ({et.src_type}->{et.dst_type}) "
                f"does not touch node type '{cur}'"
            )
    if nodes[-1] != target_type:
        raise SchemaError(f"meta-path '{name}' ends at '{nodes[-1]}', expected '{target_type}'")
    return MetaPath(name=name, node_sequence=tuple(nodes), edge_sequence=tuple(edge_sequence))


def incidence_matrix(graph: HeterogeneousGraph, edge_type: str, from_type: str) -> sp.csr_matrix:
    """Boolean incidence of ``edge_type`` oriented to start at ``from_type``."""
    et = graph.edge_types[edge_type]
    pairs = graph.edges.get(edge_type, np.zeros((0, 2), dtype=np.int64))
    n_src, n_dst = graph.node_counts[et.src_type], graph.node_counts[et.dst_type]
    data = np.ones(len(pairs), dtype=np.int64)
    m = sp.csr_matrix((data, (pairs[:, 0], pairs[:, 1])), shape=(n_src, n_dst))
    m.sum_duplicates()
    m.data[:] = 1
    if et.src_type == from_type:
        return m
    return m.T.tocsr()


def meta_path_adjacency(graph: HeterogeneousGraph, rho: MetaPath) -> MetaPathAdjacency:
    """Boolean chain product of the incidences along ``rho``, OR-ed with identity."""
    for et_name in rho.edge_sequence:
        if et_name not in graph.edge_types:
            raise SchemaError(f"meta-path '{rho.name}' references unknown edge type '{et_name}'")
    n = graph.num_targets
    reach = sp.identity(n, dtype=np.int64, format="csr")
    for k, et_name in enumerate(rho.edge_sequence):
        reach = reach @ incidence_matrix(graph, et_name, rho.node_sequence[k])
        # keep entries 0/1 so long paths cannot overflow
        reach.data[:] = 1
    adjacency = reach.toarray().astype(bool)
    np.fill_diagonal(adjacency, True)
    return MetaPathAdjacency(meta_path=rho, adjacency=adjacency)


def all_meta_path_adjacencies(graph: HeterogeneousGraph) -> List[MetaPathAdjacency]:
    if not graph.meta_paths:
        raise SchemaError("graph declares no meta-paths")
    adjs = [meta_path_adjacency(graph, mp) for mp in graph.meta_paths]
    for a in adjs:
        logger.debug(
            "meta-path %s: %d non-self neighbor pairs",
            a.meta_path,
            int(a.adjacency.sum()) - graph.num_targets,
        )
    return adjs


def make_label_splits(
    labels: np.ndarray,
    sizes: Sequence[int],
    rng: np.random.Generator,
    eval_size: int = 1000,
) -> Dict[int, LabelSplit]:
    """Per-class train sampling with shared-size val/test sets.

    Val and test hold ``eval_size`` nodes each when at least
    ``2 * eval_size`` labeled nodes remain after training ids are drawn,
    otherwise the remainder is halved between them. Sizes for which some
    class has too few members are skipped with a warning.
    """
    labels = np.asarray(labels)
    labeled = np.flatnonzero(labels >= 0)
    classes = np.unique(labels[labeled])
    splits: Dict[int, LabelSplit] = {}
    for size in sizes:
        members = [labeled[labels[labeled] == c] for c in classes]
        if any(len(m) <= size for m in members):
            logger.warning("skipping split %d: some class has <= %d labeled nodes", size, size)
            continue
        train = np.sort(np.concatenate([rng.choice(m, size=size, replace=False) for m in members]))
        rest = rng.permutation(np.setdiff1d(labeled, train))
        n_eval = eval_size if len(rest) >= 2 * eval_size else len(rest) // 2
        splits[int(size)] = LabelSplit(
            int(size), train, np.sort(rest[:n_eval]), np.sort(rest[n_eval : 2 * n_eval])
        )
    return splits
