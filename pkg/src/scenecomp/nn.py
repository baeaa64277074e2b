"""Deterministic numeric core: graph convolution stack with manual gradients.

The network is a fixed stack of graph-convolutional layers (feature
propagation through a normalized adjacency, then an affine map), each hidden
layer followed by batch normalization, ReLU, and inverted dropout; the final
layer is plain affine. Everything runs in float64 and all randomness flows
from explicit seeds, so two equal-seed runs produce bitwise-equal parameter
trajectories.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NonFiniteError, ShapeMismatchError
from .graphs import SceneGraph

BN_EPS = 1e-5


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "base"  # "base" | "base_ont"
    n_classes: int = 35
    grid_size: int = 32
    hidden: int = 256
    n_layers: int = 5
    dropout: float = 0.2
    bn_momentum: float = 0.1
    linear_only: bool = False  # drop BN/ReLU/dropout (exact-quadratic checks)
    rooms_only: bool = False  # message passing over room+building subgraph

    @property
    def input_width(self) -> int:
        block = self.n_classes * self.grid_size ** 2
        ont = block if self.variant == "base_ont" else 0
        return block + ont + self.n_classes

    @property
    def output_width(self) -> int:
        return self.n_classes * self.grid_size ** 2

    def layer_widths(self) -> list[tuple[int, int]]:
        widths = [self.input_width] + [self.hidden] * (self.n_layers - 1) + [
            self.output_width
        ]
        return list(zip(widths[:-1], widths[1:]))


def init_params(config: ModelConfig, seed: int = 0):
    """Fan-scaled uniform weights, zero biases, identity batch-norm.

    Returns (params, stats): trainable arrays and batch-norm running stats.
    """
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    stats: dict[str, np.ndarray] = {}
    for l, (d_in, d_out) in enumerate(config.layer_widths()):
        limit = math.sqrt(6.0 / (d_in + d_out))
        params[f"w{l}"] = rng.uniform(-limit, limit, size=(d_in, d_out))
        params[f"b{l}"] = np.zeros(d_out)
        if l < config.n_layers - 1 and not config.linear_only:
            params[f"gamma{l}"] = np.ones(d_out)
            params[f"beta{l}"] = np.zeros(d_out)
            stats[f"mean{l}"] = np.zeros(d_out)
            stats[f"var{l}"] = np.ones(d_out)
    return params, stats


def normalized_adjacency(g: SceneGraph, node_ids: list[int] | None = None) -> sp.csr_matrix:
    """Symmetric degree-normalized adjacency with self-loops.

    node_ids fixes the row/column order; defaults to all nodes in id order.
    """
    if node_ids is None:
        node_ids = sorted(n.id for n in g.nodes)
    index = {nid: i for i, nid in enumerate(node_ids)}
    n = len(node_ids)
    rows, cols = list(range(n)), list(range(n))
    for parent, child in g.edges:
        if parent in index and child in index:
            rows += [index[parent], index[child]]
            cols += [index[child], index[parent]]
    vals = np.ones(len(rows))
    a = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    a.data = np.minimum(a.data, 1.0)  # collapse duplicate edges
    deg = np.asarray(a.sum(axis=1)).ravel()
    d_inv_sqrt = 1.0 / np.sqrt(deg)
    d = sp.diags(d_inv_sqrt)
    return (d @ a @ d).tocsr()


def _check_finite(name: str, *arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(f"non-finite values after {name}")


def forward(
    a_hat,
    x: np.ndarray,
    params: dict,
    stats: dict,
    config: ModelConfig,
    train: bool = False,
    dropout_rng: np.random.Generator | None = None,
):
    """Run the layer stack; returns (output, cache) where cache feeds backward.

    In train mode batch norm uses batch statistics (updating the running
    stats in place) and dropout is applied when a dropout_rng is given.
    """
    if x.shape[1] != config.input_width:
        raise ShapeMismatchError(
            f"feature width {x.shape[1]} != expected {config.input_width}"
        )
    h = x
    cache = {"x": x, "a_hat": a_hat, "layers": []}
    for l in range(config.n_layers):
        m = a_hat @ h
        z = m @ params[f"w{l}"] + params[f"b{l}"]
        layer = {"m": m}
        last = l == config.n_layers - 1
        if last or config.linear_only:
            h = z
        else:
            if train:
                mean = z.mean(axis=0)
                var = z.var(axis=0)
                mom = config.bn_momentum
                stats[f"mean{l}"] *= 1 - mom
                stats[f"mean{l}"] += mom * mean
                stats[f"var{l}"] *= 1 - mom
                stats[f"var{l}"] += mom * var
            else:
                mean = stats[f"mean{l}"]
                var = stats[f"var{l}"]
            invstd = 1.0 / np.sqrt(var + BN_EPS)
            xhat = (z - mean) * invstd
            bn = params[f"gamma{l}"] * xhat + params[f"beta{l}"]
            relu_mask = bn > 0
            h = bn * relu_mask
            layer.update(xhat=xhat, invstd=invstd, relu_mask=relu_mask, train_bn=train)
            if train and config.dropout > 0 and dropout_rng is not None:
                keep = dropout_rng.random(h.shape) >= config.dropout
                h = h * keep / (1.0 - config.dropout)
                layer["dropout_keep"] = keep
        cache["layers"].append(layer)
        _check_finite(f"layer {l}", h)
    return h, cache


def backward(d_out: np.ndarray, params: dict, cache: dict, config: ModelConfig):
    """Gradients of a scalar loss w.r.t. every trainable parameter.

    d_out is the loss gradient at the network output; returns (grads, d_x).
    """
    a_hat = cache["a_hat"]
    grads = {}
    d_h = d_out
    for l in reversed(range(config.n_layers)):
        layer = cache["layers"][l]
        last = l == config.n_layers - 1
        if last or config.linear_only:
            d_z = d_h
        else:
            if "dropout_keep" in layer:
                d_h = d_h * layer["dropout_keep"] / (1.0 - config.dropout)
            d_bn = d_h * layer["relu_mask"]
            xhat = layer["xhat"]
            grads[f"gamma{l}"] = (d_bn * xhat).sum(axis=0)
            grads[f"beta{l}"] = d_bn.sum(axis=0)
            d_xhat = d_bn * params[f"gamma{l}"]
            if layer["train_bn"]:
                n_rows = xhat.shape[0]
                d_z = (
                    layer["invstd"]
                    / n_rows
                    * (
                        n_rows * d_xhat
                        - d_xhat.sum(axis=0)
                        - xhat * (d_xhat * xhat).sum(axis=0)
                    )
                )
            else:
                d_z = d_xhat * layer["invstd"]
        m = layer["m"]
        grads[f"w{l}"] = m.T @ d_z
        grads[f"b{l}"] = d_z.sum(axis=0)
        d_m = d_z @ params[f"w{l}"].T
        d_h = a_hat.T @ d_m  # a_hat is symmetric
        _check_finite(f"backward layer {l}", d_h)
    return grads, d_h


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error and its gradient w.r.t. pred."""
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"shape {pred.shape} != {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff ** 2))
    return loss, 2.0 * diff / diff.size


# --- optimizer ------------------------------------------------------------


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(
    params: dict,
    grads: dict,
    state: AdamState,
    lr: float = 1e-5,
    decay: float = 1e-8,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """In-place Adam update; effective lr decays as lr / (1 + decay * t)."""
    state.t += 1
    t = state.t
    lr_t = lr / (1.0 + decay * t)
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        state.m[name] = beta1 * state.m[name] + (1 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1 - beta2) * g * g
        m_hat = state.m[name] / (1 - beta1 ** t)
        v_hat = state.v[name] / (1 - beta2 ** t)
        params[name] -= lr_t * m_hat / (np.sqrt(v_hat) + eps)


# --- gradient checking ----------------------------------------------------


def _random_adjacency(n: int, rng: np.random.Generator) -> np.ndarray:
    a = np.eye(n)
    for i in range(1, n):
        j = int(rng.integers(0, i))
        a[i, j] = a[j, i] = 1.0  # random spanning tree keeps it connected
    deg = a.sum(axis=1)
    d = np.diag(1.0 / np.sqrt(deg))
    return d @ a @ d


def grad_check(config: ModelConfig, seed: int = 0, h: float = 1e-5, n_nodes: int = 6):
    """Max relative error of analytic vs central-difference gradients.

    Dropout is forced off so the loss is a deterministic function of the
    parameters; batch norm runs in train mode (batch statistics).
    """
    config = ModelConfig(**{**asdict(config), "dropout": 0.0})
    rng = np.random.default_rng(seed)
    a_hat = _random_adjacency(n_nodes, rng)
    x = rng.normal(size=(n_nodes, config.input_width))
    target = rng.normal(size=(n_nodes, config.output_width))
    params, stats = init_params(config, seed)
    # non-trivial affine params so BN gradients are exercised
    for name in params:
        if name.startswith(("gamma", "beta", "b")):
            params[name] = rng.normal(loc=1.0 if name.startswith("gamma") else 0.0,
                                      scale=0.1, size=params[name].shape)

    def loss_fn():
        # copy stats so running-average updates never leak between evaluations
        out, cache = forward(
            a_hat, x, params, {k: v.copy() for k, v in stats.items()}, config, train=True
        )
        loss, d_out = mse_loss(out, target)
        return loss, d_out, cache

    loss, d_out, cache = loss_fn()
    grads, _ = backward(d_out, params, cache, config)

    max_rel = 0.0
    for name, p in params.items():
        flat = p.ravel()
        g_flat = grads[name].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = loss_fn()[0]
            flat[i] = orig - h
            lm = loss_fn()[0]
            flat[i] = orig
            num = (lp - lm) / (2 * h)
            ana = g_flat[i]
            denom = max(abs(num), abs(ana), 1e-8)
            max_rel = max(max_rel, abs(num - ana) / denom)
    return max_rel


# --- checkpoints ----------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(
    path,
    config: ModelConfig,
    params: dict,
    stats: dict,
    catalog_hash: str,
    adam: AdamState | None = None,
    extra: dict | None = None,
) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "catalog_hash": catalog_hash,
        "grid_size": config.grid_size,
        "variant": config.variant,
        "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in params.items()},
        "stats": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in stats.items()},
    }
    if adam is not None:
        doc["adam"] = {
            "t": adam.t,
            "m": {k: v.ravel().tolist() for k, v in adam.m.items()},
            "v": {k: v.ravel().tolist() for k, v in adam.v.items()},
        }
    if extra:
        doc["extra"] = extra
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def load_checkpoint(path):
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    config = ModelConfig(**doc["config"])
    params = {
        k: np.array(v["data"]).reshape(v["shape"]) for k, v in doc["params"].items()
    }
    stats = {
        k: np.array(v["data"]).reshape(v["shape"]) for k, v in doc["stats"].items()
    }
    adam = None
    if "adam" in doc:
        adam = AdamState(t=doc["adam"]["t"])
        for k, v in doc["adam"]["m"].items():
            adam.m[k] = np.array(v).reshape(params[k].shape)
        for k, v in doc["adam"]["v"].items():
            adam.v[k] = np.array(v).reshape(params[k].shape)
    return config, params, stats, doc["catalog_hash"], adam, doc.get("extra")
