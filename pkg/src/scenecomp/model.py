"""Model assembly over belief-graph samples: encoding, training, prediction.

Room nodes carry the whole signal (flattened partial heatmaps, counts, and
for the ontology variant an affinity-mixed copy of the heatmaps); all other
nodes get zero features, so room-to-room information flows through the
building node during message passing. Loss is computed on room rows only,
against the raw network output.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import nn
from .dataset import BsgSample, splitmix64
from .errors import ConfigMismatchError, EmptyDatasetError
from .graphs import BUILDING, ROOM
from .ontology import ClassAffinity
from .raster import HeatmapSet

BASE = "base"
BASE_ONT = "base_ont"


@dataclass
class CompositionModel:
    config: nn.ModelConfig
    params: dict
    stats: dict
    catalog_hash: str
    affinity: ClassAffinity | None = None

    def __post_init__(self):
        if self.config.variant == BASE_ONT and self.affinity is None:
            raise ConfigMismatchError("ontology variant needs a class affinity")


def new_model(
    config: nn.ModelConfig,
    catalog_hash: str,
    seed: int = 0,
    affinity: ClassAffinity | None = None,
) -> CompositionModel:
    params, stats = nn.init_params(config, seed)
    return CompositionModel(config, params, stats, catalog_hash, affinity)


@dataclass
class EncodedSample:
    a_hat: sp.csr_matrix
    x: np.ndarray
    room_rows: np.ndarray  # indices of room nodes within the feature matrix
    room_ids: tuple[int, ...]
    target: np.ndarray  # [n_rooms, output_width]
    sample: BsgSample


def encode_inputs(sample: BsgSample, model: CompositionModel) -> EncodedSample:
    """Node features and normalized adjacency for one belief-graph sample."""
    cfg = model.config
    if sample.input_heatmaps.grid_size != cfg.grid_size:
        raise ConfigMismatchError(
            f"sample grid size {sample.input_heatmaps.grid_size} != model {cfg.grid_size}"
        )
    if sample.graph.catalog.n != cfg.n_classes:
        raise ConfigMismatchError(
            f"sample catalog size {sample.graph.catalog.n} != model {cfg.n_classes}"
        )
    g = sample.graph
    if cfg.rooms_only:
        keep = {n.id for n in g.nodes if n.layer in (BUILDING, ROOM)}
        node_ids = sorted(keep)
    else:
        node_ids = sorted(n.id for n in g.nodes)
    a_hat = nn.normalized_adjacency(g, node_ids)
    index = {nid: i for i, nid in enumerate(node_ids)}
    x = np.zeros((len(node_ids), cfg.input_width))
    heat = sample.input_heatmaps
    counts = sample.counts
    for ri, room_id in enumerate(heat.room_ids):
        blocks = [heat.data[ri].ravel(), counts.data[ri].astype(np.float64)]
        if cfg.variant == BASE_ONT:
            mixed = np.einsum("ij,jxy->ixy", model.affinity.matrix, heat.data[ri])
            blocks.append(mixed.ravel())
        x[index[room_id]] = np.concatenate(blocks)
    room_rows = np.array([index[rid] for rid in heat.room_ids])
    target = sample.target_heatmaps.data.reshape(len(heat.room_ids), -1)
    return EncodedSample(a_hat, x, room_rows, heat.room_ids, target, sample)


def raw_outputs(model: CompositionModel, enc: EncodedSample) -> np.ndarray:
    """Eval-mode network output for the room rows, before post-processing."""
    out, _ = nn.forward(enc.a_hat, enc.x, model.params, model.stats, model.config)
    return out[enc.room_rows]


def postprocess(
    raw_rooms: np.ndarray, sample: BsgSample, config: nn.ModelConfig
) -> HeatmapSet:
    """Clamp, gate by counts, and renormalize into a valid heatmap set.

    Classes with zero count in a room get an exactly-zero grid; present
    classes are renormalized to sum 1 (uniform fallback when the clamped
    output carries no mass).
    """
    n_rooms = raw_rooms.shape[0]
    s = config.grid_size
    grids = raw_rooms.reshape(n_rooms, config.n_classes, s, s).copy()
    np.clip(grids, 0.0, None, out=grids)
    counts = sample.counts.data
    for ri in range(n_rooms):
        for ci in range(config.n_classes):
            if counts[ri, ci] <= 0:
                grids[ri, ci] = 0.0
                continue
            total = grids[ri, ci].sum()
            if total > 0:
                grids[ri, ci] /= total
            else:
                grids[ri, ci] = 1.0 / (s * s)
    return HeatmapSet(
        grids,
        sample.input_heatmaps.room_ids,
        s,
        sample.input_heatmaps.room_frames,
    )


def predict(model: CompositionModel, sample: BsgSample) -> HeatmapSet:
    """Predicted heatmap set for one sample; always a valid HeatmapSet."""
    enc = encode_inputs(sample, model)
    return postprocess(raw_outputs(model, enc), sample, model.config)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5000
    batch_size: int = 12
    lr: float = 1e-5
    lr_decay: float = 1e-8
    seed: int = 0
    patience: int | None = None  # early stop on validation loss; off by default

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size <= 0 or self.lr <= 0 or self.lr_decay < 0:
            raise ValueError("train config values must be positive")


def _batch(encoded: list[EncodedSample]):
    """Stack several graphs into one block-diagonal message-passing problem."""
    a = sp.block_diag([e.a_hat for e in encoded], format="csr")
    x = np.vstack([e.x for e in encoded])
    rows = []
    offset = 0
    for e in encoded:
        rows.append(e.room_rows + offset)
        offset += e.x.shape[0]
    target = np.vstack([e.target for e in encoded])
    return a, x, np.concatenate(rows), target


def _room_loss(out: np.ndarray, rows: np.ndarray, target: np.ndarray):
    loss, d_sel = nn.mse_loss(out[rows], target)
    d_out = np.zeros_like(out)
    d_out[rows] = d_sel
    return loss, d_out


def validation_loss(model: CompositionModel, encoded: list[EncodedSample]) -> float:
    if not encoded:
        return float("nan")
    a, x, rows, target = _batch(encoded)
    out, _ = nn.forward(a, x, model.params, model.stats, model.config)
    return nn.mse_loss(out[rows], target)[0]


def train(
    model: CompositionModel,
    train_set: list[BsgSample],
    val_set: list[BsgSample] | None,
    cfg: TrainConfig,
):
    """Mini-batch Adam on raw-output MSE over room rows.

    Batches are whole graphs (the final partial batch is used). The model
    with the best validation loss is retained when a validation set is
    given. Returns (model, history) with per-epoch train/val losses.
    """
    if not train_set:
        raise EmptyDatasetError("empty training set")
    enc_train = [encode_inputs(s, model) for s in train_set]
    enc_val = [encode_inputs(s, model) for s in (val_set or [])]

    adam = nn.AdamState()
    shuffle_rng = np.random.default_rng(splitmix64(cfg.seed, 1))
    dropout_rng = np.random.default_rng(splitmix64(cfg.seed, 2))
    history = []
    best_val = float("inf")
    best = None
    bad_epochs = 0
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(enc_train))
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [enc_train[i] for i in order[start : start + cfg.batch_size]]
            a, x, rows, target = _batch(batch)
            out, cache = nn.forward(
                a, x, model.params, model.stats, model.config,
                train=True, dropout_rng=dropout_rng,
            )
            loss, d_out = _room_loss(out, rows, target)
            grads, _ = nn.backward(d_out, model.params, cache, model.config)
            nn.adam_step(model.params, grads, adam, cfg.lr, cfg.lr_decay)
            epoch_losses.append(loss)
        val = validation_loss(model, enc_val) if enc_val else None
        history.append({"epoch": epoch, "train": float(np.mean(epoch_losses)), "val": val})
        if enc_val:
            if val < best_val:
                best_val = val
                best = (copy.deepcopy(model.params), copy.deepcopy(model.stats))
                bad_epochs = 0
            else:
                bad_epochs += 1
                if cfg.patience is not None and bad_epochs > cfg.patience:
                    break
    if best is not None:
        model.params, model.stats = best
    return model, history


def evaluate_model(model: CompositionModel, test_set: list[BsgSample], provenance=None):
    """Metrics report over a test set (delegates to the metrics module)."""
    from .metrics import evaluate_many

    pairs = [(predict(model, s), s.target_heatmaps) for s in test_set]
    return evaluate_many(pairs, provenance)
