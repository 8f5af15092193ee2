import math

import numpy as np
import pytest
import torch

import modules.app.training_controller as tc
from modules.errors import DivergenceError
from modules.infrastructure.io.checkpoint_io import load_checkpoint
from modules.infrastructure.io.path_manager import RunPaths
from modules.infrastructure.learning.pnsg import lambda_schedule


def params_of(state):
    return {k: v.detach().clone() for k, v in state.model.state_dict().items()}


def test_identical_seeds_give_identical_loss_files(tiny_graph, small_cfg, tmp_path):
    tc.train(tiny_graph, small_cfg, out_dir=tmp_path / "a")
    tc.train(tiny_graph, small_cfg, out_dir=tmp_path / "b")
    a = RunPaths(tmp_path / "a").loss_history.read_bytes()
    b = RunPaths(tmp_path / "b").loss_history.read_bytes()
    assert a == b
    assert a.decode().splitlines()[0] == "epoch,l_elbo,l_pnsm,l_esce,total,lambda"


def test_different_seeds_differ(tiny_graph, small_cfg):
    _, h0 = tc.train(tiny_graph, small_cfg)
    small_cfg["runtime"]["seed"] = 1
    _, h1 = tc.train(tiny_graph, small_cfg)
    assert [r["total"] for r in h0] != [r["total"] for r in h1]


def test_history_records_schedule(tiny_graph, small_cfg):
    _, history = tc.train(tiny_graph, small_cfg)
    assert len(history) == small_cfg["train"]["epochs"]
    for t, rec in enumerate(history):
        assert rec["epoch"] == t
        assert rec["lambda"] == lambda_schedule(t, small_cfg["train"]["epochs"])
        assert all(math.isfinite(rec[k]) for k in ("l_elbo", "l_pnsm", "l_esce", "total"))


def test_zero_loss_weights_leave_parameters_unchanged(tiny_graph, small_cfg):
    small_cfg["loss"].update(alpha=0.0, beta=0.0, gamma=0.0)
    state = tc.init_state(tiny_graph, small_cfg)
    before = params_of(state)
    tc.train_epoch(state, tiny_graph, small_cfg, 0)
    after = params_of(state)
    for k in before:
        assert torch.equal(before[k], after[k]), k


def test_epoch_changes_parameters(tiny_graph, small_cfg):
    state = tc.init_state(tiny_graph, small_cfg)
    before = params_of(state)
    tc.train_epoch(state, tiny_graph, small_cfg, 0)
    assert state.epoch == 1
    assert any(not torch.equal(before[k], v) for k, v in params_of(state).items())


def test_zero_mask_rate_gives_zero_reconstruction_loss(tiny_graph, small_cfg):
    small_cfg["mask"]["rate"] = 0.0
    state = tc.init_state(tiny_graph, small_cfg)
    _, breakdown = tc.train_epoch(state, tiny_graph, small_cfg, 0)
    assert breakdown.l_esce.item() == 0.0


def test_epoch_index_out_of_range(tiny_graph, small_cfg):
    state = tc.init_state(tiny_graph, small_cfg)
    with pytest.raises(ValueError):
        tc.train_epoch(state, tiny_graph, small_cfg, small_cfg["train"]["epochs"])


def test_non_finite_loss_raises_divergence(tiny_graph, small_cfg, monkeypatch):
    monkeypatch.setattr(tc, "kl_standard_normal", lambda stats: stats.mu.sum() * float("nan"))
    state = tc.init_state(tiny_graph, small_cfg)
    with pytest.raises(DivergenceError) as exc:
        tc.train_epoch(state, tiny_graph, small_cfg, 0)
    assert exc.value.component == "l_elbo"
    assert exc.value.epoch == 0


def test_checkpoints_are_written(tiny_graph, small_cfg, tmp_path):
    tc.train(tiny_graph, small_cfg, out_dir=tmp_path)
    paths = RunPaths(tmp_path)
    for epoch in (2, 4, 6):
        assert paths.checkpoint(epoch).is_file()
    ckpt = load_checkpoint(paths.last_checkpoint)
    assert ckpt.epoch == 6
    assert ckpt.tensors["history"].shape == (6, 6)
    assert paths.resolved_config.is_file()


def test_resume_reproduces_uninterrupted_run(tiny_graph, small_cfg, tmp_path):
    full_state, full_history = tc.train(tiny_graph, small_cfg)

    tc.train(tiny_graph, small_cfg, out_dir=tmp_path, stop_after=3)
    last = RunPaths(tmp_path).last_checkpoint
    assert load_checkpoint(last).epoch == 3
    resumed_state, resumed_history = tc.train(tiny_graph, small_cfg, resume_from=last)

    assert resumed_history == full_history
    full_params, resumed_params = params_of(full_state), params_of(resumed_state)
    for k in full_params:
        assert torch.equal(full_params[k], resumed_params[k]), k


def test_resume_keeps_early_stopping_best(tiny_graph, small_cfg, tmp_path):
    small_cfg["train"]["early_stopping"].update(enabled=True, eval_every=1, patience=100, split=1)
    full_state, _ = tc.train(tiny_graph, small_cfg)
    assert full_state.best_params is not None

    tc.train(tiny_graph, small_cfg, out_dir=tmp_path, stop_after=4)
    ckpt = load_checkpoint(RunPaths(tmp_path).last_checkpoint)
    assert ckpt.metadata["best_epoch"] >= 1
    assert any(k.startswith("best.") for k in ckpt.tensors)
    resumed_state, _ = tc.train(tiny_graph, small_cfg, resume_from=RunPaths(tmp_path).last_checkpoint)

    assert resumed_state.best_score == full_state.best_score
    assert resumed_state.best_epoch == full_state.best_epoch
    full_params, resumed_params = params_of(full_state), params_of(resumed_state)
    for k in full_params:
        assert torch.equal(full_params[k], resumed_params[k]), k


def test_checkpoint_round_trip_restores_optimizer(tiny_graph, small_cfg):
    state, _ = tc.train(tiny_graph, small_cfg)
    restored, cfg = tc.state_from_checkpoint(tc.state_to_checkpoint(state, small_cfg))
    assert cfg == small_cfg
    assert restored.epoch == state.epoch
    a = state.optimizer.state_dict()["state"]
    b = restored.optimizer.state_dict()["state"]
    assert a.keys() == b.keys()
    for idx in a:
        for slot in a[idx]:
            assert torch.equal(torch.as_tensor(a[idx][slot]), torch.as_tensor(b[idx][slot]))


def test_embed_is_deterministic(tiny_graph, small_cfg):
    state, _ = tc.train(tiny_graph, small_cfg)
    e1 = tc.embed(state, tiny_graph)
    e2 = tc.embed(state, tiny_graph)
    assert e1.shape == (6, small_cfg["model"]["hidden_dim"])
    assert e1.dtype == np.float64
    np.testing.assert_array_equal(e1, e2)


def test_early_stopping_runs(tiny_graph, small_cfg):
    small_cfg["train"]["epochs"] = 8
    small_cfg["train"]["early_stopping"] = {"enabled": True, "patience": 2, "eval_every": 1, "split": 1}
    state, history = tc.train(tiny_graph, small_cfg)
    assert 1 <= len(history) <= 8
