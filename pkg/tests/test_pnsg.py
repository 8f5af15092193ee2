import pytest
import torch

from modules.infrastructure.learning.modeling import PosteriorStats
from modules.infrastructure.learning.pnsg import (
    MODES,
    ablation_negatives,
    assemble_negatives,
    dropout_negatives,
    lambda_schedule,
    shifted_mean,
    vi_negatives,
)


@pytest.fixture
def setup():
    g = torch.Generator().manual_seed(0)
    h1 = torch.randn(10, 4, dtype=torch.float64, generator=g, requires_grad=True)
    stats = PosteriorStats(
        torch.randn(10, 4, dtype=torch.float64, generator=g, requires_grad=True),
        torch.randn(10, 4, dtype=torch.float64, generator=g),
    )
    return h1, stats


def test_lambda_schedule_endpoints():
    assert lambda_schedule(0, 100) == 1.0
    assert lambda_schedule(50, 100) == 0.5
    assert lambda_schedule(100, 100) == 0.0
    with pytest.raises(ValueError):
        lambda_schedule(101, 100)


def test_shifted_mean_scales():
    mu = torch.tensor([[1.0, -2.0]])
    torch.testing.assert_close(shifted_mean(mu, 2.0), torch.tensor([[2.0, -4.0]]))
    torch.testing.assert_close(shifted_mean(mu, 1.0), mu)


@pytest.mark.parametrize("t,n_dropout", [(0, 20), (50, 10), (99, 0), (75, 5)])
def test_counts_follow_schedule(setup, t, n_dropout):
    h1, stats = setup
    neg = assemble_negatives(h1, stats, t, 100, 20, 2.0, 0.1, torch.Generator().manual_seed(1))
    assert neg.n_dropout == n_dropout
    assert neg.n_vi == 20 - n_dropout
    assert neg.samples.shape == (20, 4)
    assert neg.lam == lambda_schedule(t, 100)


def test_negatives_are_detached(setup):
    h1, stats = setup
    neg = assemble_negatives(h1, stats, 10, 20, 8, 2.0, 0.1, torch.Generator().manual_seed(1))
    assert not neg.samples.requires_grad


def test_dropout_negatives_are_rows_with_zeros(setup):
    h1, _ = setup
    rows = dropout_negatives(h1, 0.5, 50, torch.Generator().manual_seed(2))
    src = h1.detach()
    for r in rows:
        kept = r != 0
        # every kept entry equals some anchor row scaled by 1 / (1 - rate)
        matches = [torch.allclose(r[kept], 2.0 * s[kept]) for s in src]
        assert any(matches)


def test_dropout_rate_range(setup):
    h1, _ = setup
    for rate in (0.0, 1.0):
        with pytest.raises(ValueError):
            dropout_negatives(h1, rate, 3)


def test_vi_negatives_with_tiny_sigma_are_shifted_means(setup):
    _, stats = setup
    log_var = torch.full_like(stats.log_var, -80.0)
    mu_star = shifted_mean(stats.mu.detach(), 3.0)
    rows = vi_negatives(mu_star, log_var, 15, torch.Generator().manual_seed(3))
    for r in rows:
        assert any(torch.allclose(r, m, atol=1e-12, rtol=0) for m in mu_star)


def test_negatives_are_seeded(setup):
    h1, stats = setup
    a = assemble_negatives(h1, stats, 3, 10, 6, 2.0, 0.1, torch.Generator().manual_seed(4))
    b = assemble_negatives(h1, stats, 3, 10, 6, 2.0, 0.1, torch.Generator().manual_seed(4))
    assert torch.equal(a.samples, b.samples)


def test_m_must_be_positive(setup):
    h1, stats = setup
    with pytest.raises(ValueError):
        assemble_negatives(h1, stats, 0, 10, 0, 2.0, 0.1)


@pytest.mark.parametrize("mode", MODES)
def test_ablation_modes(setup, mode):
    h1, stats = setup
    neg = ablation_negatives(mode, h1, stats, 5, 10, 8, 2.0, 0.1, torch.Generator().manual_seed(5))
    assert neg.m == 8
    assert neg.mode == mode
    assert neg.n_dropout + neg.n_vi + neg.n_noise == 8
    if mode == "noise":
        assert neg.n_noise == 8
    elif mode == "dropout_only":
        assert neg.n_dropout == 8
    elif mode in ("vi_only", "unshifted"):
        assert neg.n_vi == 8
    if mode == "unshifted":
        assert neg.kappa == 1.0


def test_unknown_mode(setup):
    h1, stats = setup
    with pytest.raises(ValueError):
        ablation_negatives("mixup", h1, stats, 0, 10, 4, 2.0, 0.1)


def test_dropout_negatives_zero_half_the_entries(setup):
    h1, _ = setup
    rows = dropout_negatives(h1, 0.5, 1000, torch.Generator().manual_seed(6))
    zero_fraction = float((rows == 0).double().mean())
    assert zero_fraction == pytest.approx(0.5, abs=0.05)


def test_vi_negative_moments():
    mu = torch.tensor([[1.0, -2.0, 0.5, 3.0]], dtype=torch.float64)
    log_var = torch.tensor([[0.0, -1.0, 0.5, 1.0]], dtype=torch.float64)
    kappa, n = 2.0, 40_000
    rows = vi_negatives(shifted_mean(mu, kappa), log_var, n, torch.Generator().manual_seed(7))
    sigma = torch.exp(0.5 * log_var[0])
    torch.testing.assert_close(rows.var(dim=0), sigma.pow(2), rtol=0.05, atol=0.0)
    assert torch.all((rows.mean(dim=0) - kappa * mu[0]).abs() <= 5 * sigma / n**0.5)


def test_noise_mode_draws_standard_normal_rows(setup):
    h1, stats = setup
    neg = ablation_negatives("noise", h1, stats, 0, 10, 20_000, 2.0, 0.1, torch.Generator().manual_seed(8))
    assert float(neg.samples.mean()) == pytest.approx(0.0, abs=0.05)
    assert float(neg.samples.var()) == pytest.approx(1.0, abs=0.05)


def test_unshifted_mode_is_vi_only_with_unit_kappa(setup):
    h1, stats = setup
    a = ablation_negatives("unshifted", h1, stats, 3, 10, 12, 2.0, 0.1, torch.Generator().manual_seed(9))
    b = assemble_negatives(h1, stats, 3, 10, 12, 1.0, 0.1, torch.Generator().manual_seed(9), lam=0.0)
    assert torch.equal(a.samples, b.samples)


def test_dropout_only_mode_pins_lambda_to_one(setup):
    h1, stats = setup
    a = ablation_negatives("dropout_only", h1, stats, 7, 10, 12, 2.0, 0.1, torch.Generator().manual_seed(10))
    b = assemble_negatives(h1, stats, 7, 10, 12, 2.0, 0.1, torch.Generator().manual_seed(10), lam=1.0)
    assert torch.equal(a.samples, b.samples)
    assert a.lam == 1.0
