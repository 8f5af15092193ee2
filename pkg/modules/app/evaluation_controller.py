"""Downstream evaluation, report assembly and hyperparameter sweeps."""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from modules.app.config_manager import SWEEP_KEYS, config_hash, set_key, validate_config
from modules.app.training_controller import embed, train
from modules.errors import ConfigError, DatasetError
from modules.infrastructure.evaluation.metrics import cluster_eval
from modules.infrastructure.evaluation.probe import linear_probe
from modules.infrastructure.graph.hin import HeterogeneousGraph
from modules.infrastructure.io.embedding_io import export_embeddings
from modules.infrastructure.io.path_manager import RunPaths

logger = logging.getLogger(__name__)

TASKS = ("classify", "cluster", "both")


@dataclass
class SplitScore:
    split: int
    micro_f1_mean: float
    micro_f1_std: float
    macro_f1_mean: float
    macro_f1_std: float


@dataclass
class EvalReport:
    classification: List[SplitScore] = field(default_factory=list)
    nmi_mean: Optional[float] = None
    nmi_std: Optional[float] = None
    ari_mean: Optional[float] = None
    ari_std: Optional[float] = None
    repeats: int = 1
    seeds: List[int] = field(default_factory=list)
    config_hash: str = ""
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")
        for s in self.classification:
            for v in (s.micro_f1_mean, s.macro_f1_mean):
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"F1 value {v} for split {s.split} outside [0, 1]")
        if self.nmi_mean is not None and not 0.0 <= self.nmi_mean <= 1.0:
            raise ValueError(f"NMI {self.nmi_mean} outside [0, 1]")
        if self.ari_mean is not None and self.ari_mean > 1.0:
            raise ValueError(f"ARI {self.ari_mean} exceeds 1")

    def split_score(self, split: int) -> SplitScore:
        for s in self.classification:
            if s.split == split:
                return s
        raise KeyError(split)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self, path: Optional[Union[str, Path]] = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        data = json.loads(text)
        data["classification"] = [SplitScore(**s) for s in data.get("classification", [])]
        return cls(**data)

    def to_markdown(self) -> str:
        lines = []
        if self.classification:
            lines += ["| Split | Mi-F1 | Ma-F1 |", "|---|---|---|"]
            for s in self.classification:
                lines.append(
                    f"| {s.split} | {100 * s.micro_f1_mean:.2f}±{100 * s.micro_f1_std:.2f} "
                    f"| {100 * s.macro_f1_mean:.2f}±{100 * s.macro_f1_std:.2f} |"
                )
        if self.nmi_mean is not None:
            if lines:
                lines.append("")
            lines += [
                "| NMI | ARI |",
                "|---|---|",
                f"| {100 * self.nmi_mean:.2f}±{100 * self.nmi_std:.2f} "
                f"| {100 * self.ari_mean:.2f}±{100 * self.ari_std:.2f} |",
            ]
        lines.append("")
        lines.append(f"repeats: {self.repeats}, config: {self.config_hash or '-'}")
        return "\n".join(lines) + "\n"


def align_embeddings(node_ids: np.ndarray, embeddings: np.ndarray, n_target: int) -> np.ndarray:
    """Reorder rows read from an embedding file into node-id order."""
    node_ids = np.asarray(node_ids, dtype=np.int64)
    if node_ids.size != n_target or not np.array_equal(np.sort(node_ids), np.arange(n_target)):
        raise DatasetError(
            f"embedding file covers {node_ids.size} node ids, the dataset has {n_target} target nodes"
        )
    out = np.empty_like(embeddings)
    out[node_ids] = embeddings
    return out


def evaluate(
    embeddings: np.ndarray,
    graph: HeterogeneousGraph,
    cfg: Mapping,
    task: str = "both",
    splits: Optional[Sequence[int]] = None,
    repeats: Optional[int] = None,
) -> EvalReport:
    if task not in TASKS:
        raise ConfigError(f"unknown evaluation task '{task}', expected one of {TASKS}")
    if graph.labels is None:
        raise DatasetError("the dataset has no labels.csv; evaluation needs labels")
    eval_cfg = cfg["eval"]
    seed = int(cfg["runtime"]["seed"])
    repeats = int(repeats if repeats is not None else eval_cfg["repeats"])
    splits = [int(s) for s in (splits if splits is not None else eval_cfg["splits"])]
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.shape[0] != graph.num_targets:
        raise DatasetError(f"{emb.shape[0]} embedding rows for {graph.num_targets} target nodes")

    report = EvalReport(repeats=repeats, seeds=[seed + r for r in range(repeats)], config_hash=config_hash(cfg))
    if task in ("classify", "both"):
        for size in splits:
            split = graph.splits.get(size)
            if split is None:
                logger.warning("split %d is not available in the dataset; skipping", size)
                continue
            r = linear_probe(
                emb,
                graph.labels,
                split,
                n_classes=graph.n_classes,
                repeats=repeats,
                l2_grid=eval_cfg["probe_l2"],
                max_iter=int(eval_cfg["probe_max_iter"]),
                seed=seed,
            )
            report.classification.append(
                SplitScore(size, r.micro_f1_mean, r.micro_f1_std, r.macro_f1_mean, r.macro_f1_std)
            )
    if task in ("cluster", "both"):
        c = cluster_eval(
            emb, graph.labels, graph.n_classes, repeats, seed=seed, n_init=int(eval_cfg["kmeans_restarts"])
        )
        report.nmi_mean, report.nmi_std = c.nmi_mean, c.nmi_std
        report.ari_mean, report.ari_std = c.ari_mean, c.ari_std
    report.validate()
    return report


def run_pipeline(
    graph: HeterogeneousGraph,
    cfg: Mapping,
    out_dir: Union[str, Path],
    metadata: Optional[Mapping[str, Any]] = None,
) -> EvalReport:
    """Train, embed, export and evaluate into one run directory."""
    paths = RunPaths(out_dir)
    state, _ = train(graph, cfg, out_dir=paths.out_dir)
    emb = embed(state, graph)
    export_embeddings(emb, paths.embeddings, graph.labels)
    report = evaluate(emb, graph, cfg)
    report.metadata.update(metadata or {})
    report.to_json(paths.report_json)
    paths.report_markdown.write_text(report.to_markdown(), encoding="utf-8")
    return report


def _sweep_one(graph: HeterogeneousGraph, cfg: Mapping, param: str, value: Any, out_dir: Path) -> EvalReport:
    run_cfg = set_key(copy.deepcopy(dict(cfg)), SWEEP_KEYS[param], value)
    validate_config(run_cfg)
    logger.info("sweep %s=%s", param, value)
    return run_pipeline(
        graph, run_cfg, RunPaths(out_dir).sweep_dir(param, value), {"sweep_param": param, "sweep_value": value}
    )


def run_sweep(
    graph: HeterogeneousGraph,
    cfg: Mapping,
    param: str,
    values: Sequence[Any],
    out_dir: Union[str, Path],
    workers: int = 1,
) -> List[EvalReport]:
    """One full train/evaluate run per value; returns the reports in value order.

    ``workers > 1`` runs values in independent worker processes.
    """
    if param not in SWEEP_KEYS:
        raise ConfigError(f"cannot sweep '{param}', expected one of {sorted(SWEEP_KEYS)}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    out_dir = Path(out_dir)
    if workers > 1:
        reports = Parallel(n_jobs=workers)(delayed(_sweep_one)(graph, cfg, param, v, out_dir) for v in values)
    else:
        reports = [_sweep_one(graph, cfg, param, v, out_dir) for v in values]

    summary = {str(v): r.to_dict() for v, r in zip(values, reports)}
    (out_dir / f"sweep_{param}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return list(reports)
