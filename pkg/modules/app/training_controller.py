"""Training controller for HGVAE.

One epoch is one full-batch optimizer step over the whole target node
set: mask, encode twice (anchor and positive view), infer the posterior
from the positive view, draw negatives, score InfoNCE, decode a
posterior sample and score ESCE on the masked rows, then combine the
three losses and step Adam.

Every stochastic draw comes from a generator derived from
``(runtime.seed, epoch, stream)``, so a run is bit-reproducible and a
run resumed from a checkpoint follows the uninterrupted trajectory.
"""

from __future__ import annotations

import copy
import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from modules.app.config_manager import config_hash, save_resolved_config
from modules.errors import CheckpointError, ConfigError, DivergenceError
from modules.infrastructure.evaluation.probe import linear_probe
from modules.infrastructure.graph.hin import HeterogeneousGraph, all_meta_path_adjacencies
from modules.infrastructure.io.checkpoint_io import Checkpoint, load_checkpoint, save_checkpoint
from modules.infrastructure.io.path_manager import RunPaths
from modules.infrastructure.learning.build_hgvae import DTYPES, build_hgvae
from modules.infrastructure.learning.masking import MaskPlan, mask_features, mask_rate_at
from modules.infrastructure.learning.modeling import (
    HGVAE,
    adjacency_tensors,
    kl_standard_normal,
    reparameterize,
)
from modules.infrastructure.learning.objectives import LossBreakdown, esce, info_nce, total_loss
from modules.infrastructure.learning.pnsg import ablation_negatives

logger = logging.getLogger(__name__)

LOSS_COLUMNS = ("epoch", "l_elbo", "l_pnsm", "l_esce", "total", "lambda")

# seed streams; the mask stream id comes from mask.seed_stream
STREAM_VIEWS = 101
STREAM_NEGATIVES = 102
STREAM_REPARAM = 103
STREAM_DECODER = 104


def seed_for(seed: int, epoch: int, stream: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(epoch), int(stream)]).generate_state(1)[0])


def generator_for(seed: int, epoch: int, stream: int) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(seed_for(seed, epoch, stream))
    return g


@dataclass
class GraphTensors:
    """Target features and meta-path adjacencies as tensors, built once per run."""

    x: torch.Tensor
    adjacencies: List[torch.Tensor]

    @classmethod
    def from_graph(cls, graph: HeterogeneousGraph, cfg: Mapping) -> "GraphTensors":
        dtype = DTYPES[cfg["runtime"]["dtype"]]
        x = torch.as_tensor(graph.target_features, dtype=dtype)
        return cls(x=x, adjacencies=adjacency_tensors(all_meta_path_adjacencies(graph)))


@dataclass
class TrainingState:
    model: HGVAE
    optimizer: torch.optim.Optimizer
    epoch: int = 0  # completed epochs
    history: List[Dict[str, float]] = field(default_factory=list)
    # early stopping; best_params is None until a validation score is recorded
    best_score: float = -1.0
    best_epoch: int = 0
    best_params: Optional[Dict[str, torch.Tensor]] = None


def _make_optimizer(model: HGVAE, cfg: Mapping) -> torch.optim.Optimizer:
    train_cfg = cfg["train"]
    return torch.optim.Adam(
        model.parameters(), lr=float(train_cfg["lr"]), weight_decay=float(train_cfg["weight_decay"])
    )


def init_state(graph: HeterogeneousGraph, cfg: Mapping) -> TrainingState:
    if not graph.meta_paths:
        raise ConfigError("the dataset declares no meta-paths; HAN needs at least one")
    model = build_hgvae(cfg, in_dim=graph.target_features.shape[1], num_meta_paths=len(graph.meta_paths))
    return TrainingState(model=model, optimizer=_make_optimizer(model, cfg))


def _check_finite(breakdown: LossBreakdown, epoch: int) -> None:
    for name, value in breakdown.components().items():
        if not math.isfinite(value):
            raise DivergenceError(name, epoch, value)


def train_epoch(
    state: TrainingState,
    graph: HeterogeneousGraph,
    cfg: Mapping,
    t: int,
    tensors: Optional[GraphTensors] = None,
) -> Tuple[TrainingState, LossBreakdown]:
    total_epochs = int(cfg["train"]["epochs"])
    if not 0 <= t < total_epochs:
        raise ValueError(f"epoch index {t} outside [0, {total_epochs})")
    tensors = tensors or GraphTensors.from_graph(graph, cfg)
    seed = int(cfg["runtime"]["seed"])
    pnsg_cfg, loss_cfg = cfg["pnsg"], cfg["loss"]
    model, adjs, x = state.model, tensors.adjacencies, tensors.x

    model.train()
    plan = MaskPlan.sample(
        x.shape[0], mask_rate_at(cfg["mask"], t, total_epochs), seed_for(seed, t, cfg["mask"]["seed_stream"])
    )
    x_masked = mask_features(x, plan, model.mask_token)

    views = model.make_views(x_masked, adjs, generator_for(seed, t, STREAM_VIEWS))
    stats = model.infer_posterior(views.h2, adjs)
    l_elbo = kl_standard_normal(stats)

    negatives = ablation_negatives(
        pnsg_cfg["mode"],
        views.h1,
        stats,
        t,
        total_epochs,
        int(pnsg_cfg["num_negatives"]),
        float(pnsg_cfg["kappa"]),
        float(pnsg_cfg["dropout_rate"]),
        generator_for(seed, t, STREAM_NEGATIVES),
    )
    l_pnsm = info_nce(
        views.h1,
        views.h2,
        negatives,
        float(loss_cfg["tau"]),
        include_positive=bool(loss_cfg["denominator_includes_positive"]),
    )

    z = reparameterize(stats, generator_for(seed, t, STREAM_REPARAM))
    x_hat = model.decode(z, adjs, dropout_on=True, generator=generator_for(seed, t, STREAM_DECODER))
    if plan.size:
        l_esce = esce(x, x_hat, plan.masked_ids, float(loss_cfg["delta"]), loss_cfg["esce_variant"])
    else:
        logger.debug("epoch %d: no masked nodes, ESCE contributes 0", t)
        l_esce = x_hat.sum() * 0.0

    breakdown = total_loss(
        l_elbo, l_pnsm, l_esce, float(loss_cfg["alpha"]), float(loss_cfg["beta"]), float(loss_cfg["gamma"])
    )
    _check_finite(breakdown, t)

    state.optimizer.zero_grad()
    breakdown.total.backward()
    state.optimizer.step()

    record = {"epoch": float(t), **breakdown.components(), "lambda": negatives.lam}
    state.history.append(record)
    state.epoch = t + 1
    logger.info(
        "epoch %d/%d total=%.6f elbo=%.6f pnsm=%.6f esce=%.6f lambda=%.4f masked=%d",
        t + 1,
        total_epochs,
        record["total"],
        record["l_elbo"],
        record["l_pnsm"],
        record["l_esce"],
        record["lambda"],
        plan.size,
        extra={"metrics": record},
    )
    logger.debug("epoch %d semantic weights: %s", t + 1, model.semantic_weights())
    return state, breakdown


def embed(state: TrainingState, graph: HeterogeneousGraph, tensors: Optional[GraphTensors] = None) -> np.ndarray:
    """Encoder output with masking and dropout disabled, as float64 numpy."""
    cfg_dtype = next(state.model.parameters()).dtype
    if tensors is None:
        x = torch.as_tensor(graph.target_features, dtype=cfg_dtype)
        adjs = adjacency_tensors(all_meta_path_adjacencies(graph))
    else:
        x, adjs = tensors.x, tensors.adjacencies
    state.model.eval()
    h = state.model.embed(x, adjs)
    return h.detach().cpu().numpy().astype(np.float64)


# ---------- checkpoints ----------


def state_to_checkpoint(state: TrainingState, cfg: Mapping, extra: Optional[Mapping] = None) -> Checkpoint:
    tensors: Dict[str, np.ndarray] = {
        f"model.{k}": v.detach().cpu().numpy() for k, v in state.model.state_dict().items()
    }
    opt_state = state.optimizer.state_dict()["state"]
    for idx, slots in opt_state.items():
        for slot, value in slots.items():
            tensors[f"optim.{idx}.{slot}"] = torch.as_tensor(value).detach().cpu().numpy()
    tensors["history"] = np.asarray(
        [[rec[c] for c in LOSS_COLUMNS] for rec in state.history], dtype=np.float64
    ).reshape(-1, len(LOSS_COLUMNS))
    if state.best_params is not None:
        tensors.update({f"best.{k}": v.detach().cpu().numpy() for k, v in state.best_params.items()})
    metadata = {
        "epoch": state.epoch,
        "config_hash": config_hash(cfg),
        "config": cfg,
        "in_dim": state.model.mask_token.shape[0],
        "num_meta_paths": len(state.model.encoder.node_attention),
        "best_score": state.best_score,
        "best_epoch": state.best_epoch,
    }
    if extra:
        metadata.update(extra)
    return Checkpoint(tensors=tensors, metadata=metadata)


def state_from_checkpoint(ckpt: Checkpoint, cfg: Optional[Mapping] = None) -> Tuple[TrainingState, Mapping]:
    """Rebuild model, optimizer and history; ``cfg`` defaults to the stored config."""
    stored_cfg = ckpt.metadata.get("config")
    if cfg is None:
        if stored_cfg is None:
            raise CheckpointError("checkpoint carries no config; pass one explicitly")
        cfg = stored_cfg
    elif ckpt.config_hash and ckpt.config_hash != config_hash(cfg):
        logger.warning("checkpoint config hash %s differs from the current config %s", ckpt.config_hash, config_hash(cfg))

    model = build_hgvae(cfg, int(ckpt.metadata["in_dim"]), int(ckpt.metadata["num_meta_paths"]))
    model_sd = {
        k[len("model."):]: torch.as_tensor(v) for k, v in ckpt.tensors.items() if k.startswith("model.")
    }
    try:
        model.load_state_dict(model_sd)
    except RuntimeError as e:
        raise CheckpointError(f"checkpoint does not match the model architecture: {e}") from e

    optimizer = _make_optimizer(model, cfg)
    slots: Dict[int, Dict[str, torch.Tensor]] = {}
    for k, v in ckpt.tensors.items():
        if k.startswith("optim."):
            _, idx, slot = k.split(".", 2)
            slots.setdefault(int(idx), {})[slot] = torch.as_tensor(v)
    if slots:
        sd = optimizer.state_dict()
        sd["state"] = slots
        optimizer.load_state_dict(sd)

    history = [dict(zip(LOSS_COLUMNS, map(float, row))) for row in ckpt.tensors.get("history", np.zeros((0, 6)))]
    best = {k[len("best."):]: torch.as_tensor(v) for k, v in ckpt.tensors.items() if k.startswith("best.")}
    state = TrainingState(
        model=model,
        optimizer=optimizer,
        epoch=ckpt.epoch,
        history=history,
        best_score=float(ckpt.metadata.get("best_score", -1.0)),
        best_epoch=int(ckpt.metadata.get("best_epoch", 0)),
        best_params=best or None,
    )
    return state, cfg


def write_loss_history(history: Sequence[Mapping[str, float]], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(LOSS_COLUMNS)
        for rec in history:
            w.writerow([int(rec["epoch"])] + [repr(float(rec[c])) for c in LOSS_COLUMNS[1:]])
    return path


# ---------- full run ----------


def _early_stop_score(state: TrainingState, graph: HeterogeneousGraph, cfg: Mapping, tensors: GraphTensors) -> Optional[float]:
    size = int(cfg["train"]["early_stopping"]["split"])
    split = graph.splits.get(size)
    if split is None or graph.labels is None:
        return None
    result = linear_probe(
        embed(state, graph, tensors),
        graph.labels,
        split,
        n_classes=graph.n_classes,
        repeats=1,
        l2_grid=cfg["eval"]["probe_l2"],
        max_iter=int(cfg["eval"]["probe_max_iter"]),
    )
    return result.val_micro_f1


def train(
    graph: HeterogeneousGraph,
    cfg: Mapping,
    out_dir: Optional[Union[str, Path]] = None,
    resume_from: Optional[Union[str, Path]] = None,
    stop_after: Optional[int] = None,
    checkpoint_extra: Optional[Mapping] = None,
) -> Tuple[TrainingState, List[Dict[str, float]]]:
    """Run epochs ``state.epoch .. T-1``.

    Arguments:
      out_dir: when given, the resolved config, periodic checkpoints
        (every ``train.checkpoint_every`` epochs), ``last.hgv`` and the
        loss-history CSV are written there.
      resume_from: checkpoint to continue from.
      stop_after: stop once this many epochs have completed (the run can
        then be resumed from ``last.hgv``).
    """
    torch.set_num_threads(int(cfg["runtime"]["threads"]))
    paths = RunPaths(out_dir) if out_dir is not None else None
    tensors = GraphTensors.from_graph(graph, cfg)

    if resume_from is not None:
        state, _ = state_from_checkpoint(load_checkpoint(resume_from), cfg)
        logger.info("Resuming from %s at epoch %d", resume_from, state.epoch)
    else:
        state = init_state(graph, cfg)
    if paths is not None:
        save_resolved_config(cfg, paths.resolved_config)

    total_epochs = int(cfg["train"]["epochs"])
    end = total_epochs if stop_after is None else min(total_epochs, int(stop_after))
    every = int(cfg["train"]["checkpoint_every"])
    es_cfg = cfg["train"]["early_stopping"]
    stopped = False

    for t in range(state.epoch, end):
        train_epoch(state, graph, cfg, t, tensors)

        if es_cfg["enabled"] and state.epoch % int(es_cfg["eval_every"]) == 0:
            score = _early_stop_score(state, graph, cfg, tensors)
            if score is None:
                logger.warning("early stopping enabled but split %s is unavailable; disabling", es_cfg["split"])
                es_cfg = {**es_cfg, "enabled": False}
            elif score > state.best_score:
                state.best_score, state.best_epoch = score, state.epoch
                state.best_params = copy.deepcopy(state.model.state_dict())
                logger.info("epoch %d: validation Micro-F1 improved to %.4f", state.epoch, score)
            elif state.epoch - state.best_epoch >= int(es_cfg["patience"]):
                logger.info(
                    "Early stopping at epoch %d (best %.4f at epoch %d)", state.epoch, state.best_score, state.best_epoch
                )
                stopped = True

        if paths is not None and every and state.epoch % every == 0:
            save_checkpoint(state_to_checkpoint(state, cfg, checkpoint_extra), paths.checkpoint(state.epoch))
        if stopped:
            break

    # an interrupted run keeps its live parameters so it can be resumed
    finished = stopped or state.epoch >= total_epochs
    if finished and state.best_params is not None:
        state.model.load_state_dict(state.best_params)
    if paths is not None:
        save_checkpoint(state_to_checkpoint(state, cfg, checkpoint_extra), paths.last_checkpoint)
        write_loss_history(state.history, paths.loss_history)
    return state, state.history
