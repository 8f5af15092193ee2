import math

import numpy as np
import pytest
import torch

from modules.infrastructure.learning.objectives import esce, focal_loss, info_nce, total_loss

from .conftest import assert_grad_close


def info_nce_loop(anchor, positive, negatives, tau, include_positive=False):
    def cos(a, b):
        return sum(x * y for x, y in zip(a, b)) / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))

    total = 0.0
    for a, p in zip(anchor.tolist(), positive.tolist()):
        s_pos = cos(a, p) / tau
        denom = sum(math.exp(cos(a, n) / tau) for n in negatives.tolist())
        if include_positive:
            denom += math.exp(s_pos)
        total += -(s_pos - math.log(denom))
    return total / anchor.shape[0]


def esce_loop(x, x_hat, ids, delta, variant):
    vals = []
    for i in ids:
        a, b = x[i].tolist(), x_hat[i].tolist()
        c = sum(u * v for u, v in zip(a, b)) / (math.sqrt(sum(u * u for u in a)) * math.sqrt(sum(v * v for v in b)))
        if c < 0:
            c = 1e-6
        w = (1 - c) ** delta
        vals.append(w * math.log(max(1 - c, 1e-6)) if variant == "literal" else -w * math.log(max(c, 1e-6)))
    return sum(vals) / len(vals)


def test_info_nce_zero_case():
    v = torch.tensor([[1.0, 2.0]], dtype=torch.float64)
    assert info_nce(v, v, v, tau=0.5).item() == pytest.approx(0.0, abs=1e-12)


def test_info_nce_log_k_minus_one_case():
    k = 7
    anchor = torch.tensor([[1.0, 0.0]], dtype=torch.float64)
    negatives = torch.tensor([[0.0, 1.0]] * k, dtype=torch.float64)
    assert info_nce(anchor, anchor, negatives, tau=1.0).item() == pytest.approx(math.log(k) - 1, abs=1e-12)


def test_info_nce_matches_loop():
    g = torch.Generator().manual_seed(0)
    for include in (False, True):
        for _ in range(5):
            a = torch.randn(6, 4, dtype=torch.float64, generator=g)
            p = torch.randn(6, 4, dtype=torch.float64, generator=g)
            n = torch.randn(9, 4, dtype=torch.float64, generator=g)
            got = info_nce(a, p, n, 0.5, include_positive=include).item()
            assert got == pytest.approx(info_nce_loop(a, p, n, 0.5, include), abs=1e-9)


def test_info_nce_ignores_vector_scale():
    g = torch.Generator().manual_seed(3)
    a, p = torch.randn(5, 4, dtype=torch.float64, generator=g), torch.randn(5, 4, dtype=torch.float64, generator=g)
    n = torch.randn(7, 4, dtype=torch.float64, generator=g)
    base = info_nce(a, p, n, 0.5)
    for c in (0.01, 3.0, 250.0):
        assert info_nce(c * a, c * p, c * n, 0.5).item() == pytest.approx(base.item(), abs=1e-12)
    assert info_nce(2.0 * a, 0.1 * p, 7.0 * n, 0.5).item() == pytest.approx(base.item(), abs=1e-12)


@pytest.mark.parametrize("include_positive", [False, True])
def test_info_nce_falls_as_positive_aligns(include_positive):
    anchor = torch.tensor([[1.0, 0.0]], dtype=torch.float64)
    negatives = torch.tensor([[0.3, 1.0], [-1.0, 0.2], [0.5, -0.5]], dtype=torch.float64)
    losses = []
    for theta in np.linspace(np.pi, 0.0, 13):
        positive = torch.tensor([[np.cos(theta), np.sin(theta)]], dtype=torch.float64)
        losses.append(info_nce(anchor, positive, negatives, 0.5, include_positive=include_positive).item())
    assert np.all(np.diff(losses) < 0)


def test_info_nce_errors():
    v = torch.ones(2, 3)
    with pytest.raises(ValueError):
        info_nce(v, v, v, tau=0.0)
    with pytest.raises(ValueError):
        info_nce(v, v, torch.ones(0, 3), tau=0.5)


def test_info_nce_gradients():
    g = torch.Generator().manual_seed(1)
    a = torch.randn(4, 3, dtype=torch.float64, generator=g, requires_grad=True)
    p = torch.randn(4, 3, dtype=torch.float64, generator=g, requires_grad=True)
    n = torch.randn(5, 3, dtype=torch.float64, generator=g)
    assert_grad_close(lambda: info_nce(a, p, n, 0.5), [a, p])


@pytest.mark.parametrize("variant", ["literal", "focal"])
def test_esce_matches_loop(variant):
    g = torch.Generator().manual_seed(2)
    for _ in range(5):
        x = torch.randn(12, 5, dtype=torch.float64, generator=g)
        x_hat = torch.randn(12, 5, dtype=torch.float64, generator=g)
        ids = [0, 3, 4, 8, 11]
        got = esce(x, x_hat, ids, 3.0, variant).item()
        assert got == pytest.approx(esce_loop(x, x_hat, ids, 3.0, variant), abs=1e-9)


@pytest.mark.parametrize("variant", ["literal", "focal"])
def test_esce_perfect_reconstruction_is_zero(variant):
    x = torch.randn(5, 3, dtype=torch.float64)
    assert esce(x, x.clone(), [0, 2], 3.0, variant).item() == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("variant", ["literal", "focal"])
def test_esce_ignores_unmasked_rows(variant):
    g = torch.Generator().manual_seed(3)
    x = torch.randn(8, 4, dtype=torch.float64, generator=g)
    x_hat = torch.randn(8, 4, dtype=torch.float64, generator=g)
    ids = [1, 5, 6]
    garbage = x_hat.clone()
    keep = torch.ones(8, dtype=torch.bool)
    keep[ids] = False
    garbage[keep] = 1e6 * torch.randn(int(keep.sum()), 4, dtype=torch.float64, generator=g)
    assert esce(x, garbage, ids, 3.0, variant).item() == esce(x, x_hat, ids, 3.0, variant).item()


def test_esce_negative_cosine_is_floored():
    x = torch.tensor([[1.0, 0.0]], dtype=torch.float64)
    x_hat = torch.tensor([[-1.0, 0.1]], dtype=torch.float64)
    c = 1e-6
    expected = (1 - c) ** 3 * -math.log(c)
    assert esce(x, x_hat, [0], 3.0, "focal").item() == pytest.approx(expected, rel=1e-12)


def test_esce_skips_zero_norm_rows(caplog):
    x = torch.tensor([[1.0, 1.0], [0.0, 0.0]], dtype=torch.float64)
    x_hat = torch.tensor([[1.0, 0.0], [1.0, 2.0]], dtype=torch.float64)
    assert esce(x, x_hat, [0, 1], 3.0).item() == pytest.approx(esce(x, x_hat, [0], 3.0).item())
    assert "zero-norm" in caplog.text


def rows_with_cosine(cosines):
    """Single-row pairs (x, x_hat) whose cosine is each given value."""
    c = torch.as_tensor(cosines, dtype=torch.float64)
    x = torch.zeros(len(c), 2, dtype=torch.float64)
    x[:, 0] = 1.0
    x_hat = torch.stack([c, torch.sqrt(1.0 - c**2)], dim=1)
    return x, x_hat


def test_focal_esce_falls_as_cosine_rises():
    cosines = np.linspace(0.05, 1.0, 20)
    x, x_hat = rows_with_cosine(cosines)
    values = [esce(x, x_hat, [i], 3.0, "focal").item() for i in range(len(cosines))]
    assert np.all(np.diff(values) < 0)
    assert values[-1] == pytest.approx(0.0, abs=1e-12)


def test_literal_esce_minimum():
    u_star = math.exp(-1.0 / 3.0)
    x, x_hat = rows_with_cosine([1.0 - u_star])
    lowest = esce(x, x_hat, [0], 3.0, "literal").item()
    assert lowest == pytest.approx(-1.0 / (3.0 * math.e), abs=1e-9)
    assert lowest == pytest.approx(-0.1226, abs=1e-4)

    cosines = np.linspace(0.01, 0.99, 99)
    x, x_hat = rows_with_cosine(cosines)
    values = np.array([esce(x, x_hat, [i], 3.0, "literal").item() for i in range(len(cosines))])
    assert np.all(values >= lowest - 1e-12)


def test_esce_errors():
    x = torch.ones(3, 2)
    with pytest.raises(ValueError):
        esce(x, x, [], 3.0)
    with pytest.raises(ValueError):
        esce(x, x, [0], 0.5)
    with pytest.raises(ValueError):
        esce(x, x, [0], 3.0, "other")


@pytest.mark.parametrize("variant", ["literal", "focal"])
def test_esce_gradients(variant):
    g = torch.Generator().manual_seed(4)
    x = torch.rand(6, 4, dtype=torch.float64, generator=g) + 0.5
    x_hat = (x + 0.3 * torch.randn(6, 4, dtype=torch.float64, generator=g)).requires_grad_(True)
    assert_grad_close(lambda: esce(x, x_hat, [0, 2, 3, 5], 3.0, variant), [x_hat])


def test_focal_loss():
    assert focal_loss(1.0, 3.0) == 0.0
    assert focal_loss(0.5, 2.0) == pytest.approx(-0.25 * math.log(0.5))
    assert focal_loss(0.5, 0.0) == pytest.approx(math.log(2.0), abs=1e-12)
    with pytest.raises(ValueError):
        focal_loss(0.0, 2.0)


def test_total_loss_weights():
    parts = [torch.tensor(v, dtype=torch.float64) for v in (1.0, 2.0, 4.0)]
    out = total_loss(*parts, alpha=0.5, beta=0.0, gamma=2.0)
    assert out.total.item() == pytest.approx(8.5)
    assert out.components() == {"l_elbo": 1.0, "l_pnsm": 2.0, "l_esce": 4.0, "total": 8.5}
    with pytest.raises(ValueError):
        total_loss(*parts, alpha=-1.0)


def test_total_loss_gradients():
    a, b, c = (torch.tensor(v, dtype=torch.float64, requires_grad=True) for v in (0.3, 1.2, -0.4))
    out = total_loss(a, b, c, 0.5, 2.0, 3.0).total
    out.backward()
    np.testing.assert_allclose([a.grad.item(), b.grad.item(), c.grad.item()], [0.5, 2.0, 3.0])
