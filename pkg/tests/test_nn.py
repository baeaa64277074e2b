import numpy as np
import pytest

from scenecomp import nn
from scenecomp.errors import NonFiniteError, ShapeMismatchError
from scenecomp.graphs import (
    BUILDING,
    GROUND_TRUTH,
    ROOM,
    SceneNode,
    build_graph,
)

from conftest import simple_graph


def _config(**kw):
    base = dict(variant="base", n_classes=3, grid_size=4, hidden=8, dropout=0.0)
    base.update(kw)
    return nn.ModelConfig(**base)


def test_adjacency_single_node(catalog):
    g = build_graph([SceneNode(0, BUILDING)], [], GROUND_TRUTH, catalog)
    a = nn.normalized_adjacency(g).toarray()
    np.testing.assert_allclose(a, [[1.0]])


def test_adjacency_two_nodes(catalog):
    nodes = [SceneNode(0, BUILDING), SceneNode(1, ROOM, position=(0, 0, 0), dimensions=(4, 4, 3))]
    g = build_graph(nodes, [(0, 1)], GROUND_TRUTH, catalog)
    a = nn.normalized_adjacency(g).toarray()
    np.testing.assert_allclose(a, [[0.5, 0.5], [0.5, 0.5]])


def test_adjacency_symmetry_and_spectrum(catalog):
    g = simple_graph(catalog, (5, 3, 2))
    a = nn.normalized_adjacency(g).toarray()
    assert np.allclose(a, a.T)
    # every entry lies in (0, 1] where an edge or self-loop exists
    nz = a[a != 0]
    assert np.all(nz > 0) and np.all(nz <= 1 + 1e-12)
    assert np.all(np.diag(a) > 0)
    # symmetric normalization bounds the spectral radius by 1
    eigs = np.linalg.eigvalsh(a)
    assert eigs.max() <= 1 + 1e-10
    assert eigs.min() >= -1 - 1e-10


def test_forward_bias_only():
    cfg = _config()
    params, stats = nn.init_params(cfg, seed=0)
    for l in range(cfg.n_layers):
        params[f"w{l}"][:] = 0.0
        params[f"b{l}"][:] = 0.0
    params[f"b{cfg.n_layers - 1}"][:] = 3.25
    x = np.zeros((4, cfg.input_width))
    out, _ = nn.forward(np.eye(4), x, params, stats, cfg)
    np.testing.assert_allclose(out, 3.25)


def test_eval_equals_train_without_dropout_and_fixed_stats():
    cfg = _config(dropout=0.0)
    params, stats = nn.init_params(cfg, seed=1)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(5, cfg.input_width))
    a = np.eye(5)
    out_train, _ = nn.forward(a, x, params, {k: v.copy() for k, v in stats.items()}, cfg, train=True)
    # freeze running stats at the train-batch statistics, then eval must agree
    stats2 = {k: v.copy() for k, v in stats.items()}
    h = x
    for l in range(cfg.n_layers - 1):
        z = a @ h @ params[f"w{l}"] + params[f"b{l}"]
        stats2[f"mean{l}"] = z.mean(axis=0)
        stats2[f"var{l}"] = z.var(axis=0)
        xhat = (z - stats2[f"mean{l}"]) / np.sqrt(stats2[f"var{l}"] + nn.BN_EPS)
        h = np.maximum(params[f"gamma{l}"] * xhat + params[f"beta{l}"], 0)
    out_eval, _ = nn.forward(a, x, params, stats2, cfg)
    np.testing.assert_allclose(out_train, out_eval, atol=1e-12)


def test_forward_matches_dense_oracle():
    # hand-coded dense forward on a 3-node path graph
    cfg = _config(linear_only=True, n_layers=2, hidden=6)
    params, stats = nn.init_params(cfg, seed=3)
    adj = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]])
    d = np.diag(1.0 / np.sqrt(adj.sum(axis=1)))
    a_hat = d @ adj @ d
    rng = np.random.default_rng(4)
    x = rng.normal(size=(3, cfg.input_width))
    out, _ = nn.forward(a_hat, x, params, stats, cfg)
    oracle = a_hat @ (a_hat @ x @ params["w0"] + params["b0"]) @ params["w1"] + params["b1"]
    np.testing.assert_allclose(out, oracle, atol=1e-12)


def test_mse_loss():
    loss, grad = nn.mse_loss(np.array([0.0, 0.0]), np.array([2.0, 0.0]))
    assert loss == pytest.approx(2.0)
    assert nn.mse_loss(np.ones(7), np.ones(7))[0] == 0.0
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=20), rng.normal(size=20)
    assert nn.mse_loss(a, b)[0] == pytest.approx(((a - b) ** 2).sum() / 20, abs=1e-14)
    with pytest.raises(ShapeMismatchError):
        nn.mse_loss(np.ones(3), np.ones(4))


def test_backward_zero_at_minimum():
    cfg = _config(linear_only=True)
    params, stats = nn.init_params(cfg, seed=6)
    rng = np.random.default_rng(7)
    x = rng.normal(size=(4, cfg.input_width))
    out, cache = nn.forward(np.eye(4), x, params, stats, cfg)
    loss, d_out = nn.mse_loss(out, out.copy())
    grads, _ = nn.backward(d_out, params, cache, cfg)
    assert loss == 0.0
    for g in grads.values():
        np.testing.assert_allclose(g, 0.0)


def test_relu_blocks_gradient():
    cfg = _config(n_layers=2, hidden=4)
    params, stats = nn.init_params(cfg, seed=8)
    params["beta0"][:] = -100.0  # forces every ReLU input negative
    x = np.random.default_rng(9).normal(size=(3, cfg.input_width))
    out, cache = nn.forward(np.eye(3), x, params, stats, cfg, train=True)
    _, d_out = nn.mse_loss(out, out + 1.0)
    grads, _ = nn.backward(d_out, params, cache, cfg)
    np.testing.assert_allclose(grads["w0"], 0.0)
    np.testing.assert_allclose(grads["gamma0"], 0.0)


def test_adam_zero_gradient():
    params = {"w": np.array([1.0, -2.0])}
    state = nn.AdamState()
    nn.adam_step(params, {"w": np.zeros(2)}, state, lr=0.1)
    np.testing.assert_allclose(params["w"], [1.0, -2.0])


def test_adam_first_step_closed_form():
    params = {"w": np.array([0.0])}
    state = nn.AdamState()
    nn.adam_step(params, {"w": np.array([1.0])}, state, lr=1e-3, decay=0.0)
    # bias-corrected first step moves by ~lr against a unit gradient
    assert params["w"][0] == pytest.approx(-1e-3, rel=1e-6)


def test_adam_decay_schedule():
    lr, decay = 1e-3, 0.5
    params = {"w": np.array([0.0])}
    state = nn.AdamState()
    nn.adam_step(params, {"w": np.array([1.0])}, state, lr=lr, decay=decay)
    first = -params["w"][0]
    assert first == pytest.approx(lr / 1.5, rel=1e-6)
    params0 = {"w": np.array([0.0])}
    state0 = nn.AdamState()
    nn.adam_step(params0, {"w": np.array([1.0])}, state0, lr=lr, decay=0.0)
    assert -params0["w"][0] == pytest.approx(lr, rel=1e-6)


def test_batchnorm_standardizes():
    cfg = _config(n_layers=2, hidden=4)
    params, stats = nn.init_params(cfg, seed=10)
    rng = np.random.default_rng(11)
    x = rng.normal(size=(64, cfg.input_width))
    m = np.eye(64) @ x @ params["w0"] + params["b0"]
    invstd = 1.0 / np.sqrt(m.var(axis=0) + nn.BN_EPS)
    xhat = (m - m.mean(axis=0)) * invstd
    assert np.allclose(xhat.mean(axis=0), 0.0, atol=1e-6)
    assert np.allclose(xhat.var(axis=0), 1.0, atol=1e-3)


def test_dropout_inverted_scaling():
    cfg = _config(n_layers=2, hidden=16, dropout=0.3)
    params, stats = nn.init_params(cfg, seed=12)
    rng = np.random.default_rng(13)
    x = rng.normal(size=(8, cfg.input_width))
    a = np.eye(8)
    # expectation of train-mode output equals the dropout-free train output
    base_cfg = nn.ModelConfig(**{**cfg.__dict__, "dropout": 0.0})
    ref, _ = nn.forward(a, x, params, {k: v.copy() for k, v in stats.items()}, base_cfg, train=True)
    acc = np.zeros_like(ref)
    acc_sq = np.zeros_like(ref)
    n_draws = 10000
    drng = np.random.default_rng(14)
    frozen = {k: v.copy() for k, v in stats.items()}
    for _ in range(n_draws):
        out, _ = nn.forward(
            a, x, params, {k: v.copy() for k, v in frozen.items()}, cfg,
            train=True, dropout_rng=drng,
        )
        acc += out
        acc_sq += out * out
    mean = acc / n_draws
    std_err = np.sqrt(np.maximum(acc_sq / n_draws - mean ** 2, 0.0) / n_draws)
    z = np.abs(mean - ref) / np.maximum(std_err, 1e-12)
    # elementwise 3-sigma check; tolerate the expected tail fraction
    assert np.mean(z > 3.0) < 0.02


def test_nonfinite_detected():
    cfg = _config(linear_only=True, n_layers=2)
    params, stats = nn.init_params(cfg, seed=15)
    params["w0"][0, 0] = np.inf
    x = np.ones((2, cfg.input_width))
    with pytest.raises(NonFiniteError):
        nn.forward(np.eye(2), x, params, stats, cfg)


def test_grad_check_small():
    cfg = _config(hidden=8)
    assert nn.grad_check(cfg, seed=0) < 1e-4


def test_grad_check_linear_exact():
    cfg = _config(hidden=8, linear_only=True)
    assert nn.grad_check(cfg, seed=0, h=1e-2) < 1e-8


def test_checkpoint_round_trip(tmp_path):
    cfg = _config()
    params, stats = nn.init_params(cfg, seed=16)
    adam = nn.AdamState()
    grads = {k: np.ones_like(v) for k, v in params.items()}
    nn.adam_step(params, grads, adam)
    path = tmp_path / "ckpt.json"
    nn.save_checkpoint(path, cfg, params, stats, "hash123", adam, extra={"note": 1})
    cfg2, params2, stats2, chash, adam2, extra = nn.load_checkpoint(path)
    assert cfg2 == cfg
    assert chash == "hash123"
    assert extra == {"note": 1}
    assert adam2.t == 1
    for k in params:
        np.testing.assert_array_equal(params[k], params2[k])
    for k in stats:
        np.testing.assert_array_equal(stats[k], stats2[k])
