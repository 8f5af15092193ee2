from __future__ import annotations

import copy

import numpy as np
import pytest
import torch

from modules.app.config_manager import get_default_config
from modules.infrastructure.graph.hin import (
    EdgeType,
    HeterogeneousGraph,
    LabelSplit,
    build_meta_path,
)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# ---------- gradient checking ----------


def numerical_grad(fn, x: torch.Tensor, step: float = 1e-5) -> torch.Tensor:
    """Central differences of the scalar ``fn()`` with respect to ``x`` (modified in place)."""
    grad = torch.zeros_like(x)
    flat, gflat = x.data.view(-1), grad.view(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + step
        plus = float(fn())
        flat[i] = orig - step
        minus = float(fn())
        flat[i] = orig
        gflat[i] = (plus - minus) / (2 * step)
    return grad


def assert_grad_close(fn, tensors, step: float = 1e-5, rtol: float = 1e-4, atol: float = 1e-7) -> None:
    """Compare autograd against central differences for every tensor in ``tensors``.

    Each entry must satisfy ``|a - n| <= atol + rtol * max(|a|, |n|)``.
    """
    for t in tensors:
        t.grad = None
    out = fn()
    out.backward()
    for k, t in enumerate(tensors):
        assert t.grad is not None, f"tensor {k} received no gradient"
        analytic = t.grad.detach().clone()
        with torch.no_grad():
            numeric = numerical_grad(fn, t, step)
        err = (analytic - numeric).abs()
        bound = atol + rtol * torch.maximum(analytic.abs(), numeric.abs())
        worst = (err - bound).argmax()
        assert torch.all(err <= bound), (
            f"tensor {k}: analytic {analytic.view(-1)[worst].item():.6e} "
            f"vs numeric {numeric.view(-1)[worst].item():.6e}"
        )


# ---------- graphs ----------


def make_tiny_graph(n_target: int = 6, feat_dim: int = 4, seed: int = 0) -> HeterogeneousGraph:
    """paper/author/subject graph with PAP and PSP meta-paths and 2 classes."""
    rng = np.random.default_rng(seed)
    edge_types = {
        "pa": EdgeType("pa", "paper", "author"),
        "ps": EdgeType("ps", "paper", "subject"),
    }
    labels = np.arange(n_target) % 2
    pa = np.array([[i, i % 3] for i in range(n_target)], dtype=np.int64)
    ps = np.array([[i, labels[i]] for i in range(n_target)], dtype=np.int64)
    return HeterogeneousGraph(
        node_types=["paper", "author", "subject"],
        node_counts={"paper": n_target, "author": 3, "subject": 2},
        edge_types=edge_types,
        edges={"pa": pa, "ps": ps},
        features={
            "paper": rng.standard_normal((n_target, feat_dim)),
            "author": rng.standard_normal((3, 2)),
            "subject": rng.standard_normal((2, 2)),
        },
        target_type="paper",
        n_classes=2,
        labels=labels.astype(np.int64),
        meta_paths=[
            build_meta_path("PAP", ["pa", "pa"], edge_types, "paper"),
            build_meta_path("PSP", ["ps", "ps"], edge_types, "paper"),
        ],
        splits={1: LabelSplit(1, [0, 1], [2, 3], [4, 5])} if n_target == 6 else {},
    )


@pytest.fixture
def tiny_graph() -> HeterogeneousGraph:
    return make_tiny_graph()


@pytest.fixture
def small_cfg() -> dict:
    """Defaults shrunk so a full run takes well under a second."""
    cfg = copy.deepcopy(get_default_config())
    cfg["model"].update(hidden_dim=8, semantic_dim=4)
    cfg["pnsg"]["num_negatives"] = 5
    cfg["train"].update(epochs=6, lr=1e-3, checkpoint_every=2)
    cfg["eval"].update(repeats=1, splits=[1])
    return cfg


@pytest.fixture
def cfg64(small_cfg) -> dict:
    small_cfg["runtime"]["dtype"] = "float64"
    return small_cfg
