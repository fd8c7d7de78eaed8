import numpy as np
import pytest

from conftest import random_adjacency
from dgnn.graph import cosine_similarity, normalize, semantic_graph
from dgnn.gsd import gsd_first_order
from dgnn.model import DgnnHyperparams
from dgnn.oracle import (
    FdConfig,
    fd_gradient,
    gcn_reference_layer,
    loop_forward,
    scalar_update_oracle,
)


def test_fd_square_at_three():
    x = np.array([3.0])
    ((_, vals),) = fd_gradient(lambda: float(x[0] ** 2), [x])
    assert vals[0] == pytest.approx(6.0, abs=1e-7)


@pytest.mark.parametrize("h", [1e-2, 1e-5, 0.5])
def test_fd_linear_exact(h):
    w = np.array([[1.5, -2.0], [0.25, 4.0]])
    x = np.zeros((2, 2))
    ((idx, vals),) = fd_gradient(lambda: float(np.sum(w * x)), [x], FdConfig(h=h))
    np.testing.assert_allclose(vals, w.ravel()[idx], rtol=1e-9, atol=1e-9)


def test_fd_restores_params_and_samples():
    x = np.random.default_rng(0).standard_normal((20, 20))
    before = x.copy()
    ((idx, vals),) = fd_gradient(lambda: float(np.sum(x ** 3)), [x], FdConfig(samples=16))
    np.testing.assert_array_equal(x, before)
    assert len(idx) == 16 == len(set(idx.tolist()))


def test_fd_rejects_noncontiguous():
    x = np.ones((4, 4))[:, ::2]
    with pytest.raises(ValueError):
        fd_gradient(lambda: 0.0, [x])


def graphs(seed, n=5, d=3):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (n, d))
    return x, normalize(random_adjacency(rng, n)), semantic_graph(cosine_similarity(x), 2).normalized


def test_beta_zero_closed_forms():
    x, a, af = graphs(1)
    hp = DgnnHyperparams(beta=0.0)
    rng = np.random.default_rng(2)
    state = tuple(rng.standard_normal(x.shape) for _ in range(3))
    w = np.eye(3)
    np.testing.assert_allclose(scalar_update_oracle(state, (x, a, af), w, hp, "F"), x)
    np.testing.assert_allclose(scalar_update_oracle(state, (x, a, af), w, hp, "H"), a @ state[1],
                               atol=1e-14)
    np.testing.assert_allclose(scalar_update_oracle(state, (x, a, af), w, hp, "Hf"), af @ state[2],
                               atol=1e-14)


def test_analytic_and_network_differ_when_beta_positive():
    x, a, af = graphs(3)
    w = np.eye(3) + 0.1
    for which in ("F", "H", "Hf"):
        outs = [
            scalar_update_oracle((x, x, x), (x, a, af), w, DgnnHyperparams(mode=m), which)
            for m in ("analytic", "network")
        ]
        # F = H = Hf gives a zero residual; only the sigmoid offset moves the network mode
        assert not np.allclose(outs[0], outs[1], atol=1e-12)


def test_guard_on_size():
    x = np.zeros((17, 2))
    with pytest.raises(ValueError, match="limited"):
        scalar_update_oracle((x, x, x), (x, np.eye(17), np.eye(17)), np.eye(2),
                             DgnnHyperparams(), "F")
    with pytest.raises(ValueError, match="stream"):
        scalar_update_oracle((x[:3],) * 3, (x[:3], np.eye(3), np.eye(3)), np.eye(2),
                             DgnnHyperparams(), "G")


def test_loop_forward_beta_zero_is_propagation():
    x, a, af = graphs(4)
    f, h, hf = loop_forward(x, a, af, np.eye(3), DgnnHyperparams(beta=0.0, layers=3))
    np.testing.assert_allclose(f, x)
    np.testing.assert_allclose(h, np.linalg.matrix_power(a, 3) @ x, atol=1e-14)
    np.testing.assert_allclose(hf, np.linalg.matrix_power(af, 3) @ x, atol=1e-14)


def test_gcn_reference_layer_cases():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((4, 3))
    np.testing.assert_allclose(gcn_reference_layer(x, normalize(np.zeros((4, 4))), np.eye(3)), x,
                               atol=1e-15)
    a_hat = normalize(random_adjacency(rng, 4))
    w = rng.standard_normal((3, 2))
    np.testing.assert_allclose(gcn_reference_layer(x, a_hat, w), gsd_first_order(x @ w, a_hat),
                               atol=1e-12)
    two = np.array([[1.0, 2.0], [3.0, -2.0]])
    out = gcn_reference_layer(two, normalize(np.array([[0.0, 1.0], [1.0, 0.0]])), np.eye(2))
    np.testing.assert_allclose(out, [[2.0, 0.0], [2.0, 0.0]], atol=1e-15)
    with pytest.raises(ValueError):
        gcn_reference_layer(x, a_hat, np.eye(2))
