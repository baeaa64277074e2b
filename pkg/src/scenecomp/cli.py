"""Command-line pipeline: generate | train | eval | predict | layout | render | ontology.

Every artifact embeds {S, catalog_hash, seed, tool_version}; a cross-stage
mismatch is a hard error, never a silent recompute. Flags override config
file values.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import default_catalog
from .dataset import (
    default_templates,
    generate_synthetic_scene,
    heatmaps_from_dict,
    heatmaps_to_dict,
    make_sample,
    save_dataset,
    load_dataset,
    split_dataset,
    splitmix64,
)
from .errors import (
    ConfigMismatchError,
    MissingArtifactError,
    SceneCompError,
    UnreadableInputError,
)
from .graphs import BELIEF, augment, load_graph
from .layout import (
    default_threshold,
    extract_layout,
    layout_from_dict,
    layout_to_dict,
    place_blind_nodes,
)
from .metrics import FLATTENING_CONVENTION
from .model import (
    BASE,
    BASE_ONT,
    CompositionModel,
    TrainConfig,
    evaluate_model,
    new_model,
    predict,
    train,
)
from .nn import ModelConfig, load_checkpoint, save_checkpoint
from .ontology import (
    EndpointConfig,
    class_affinity,
    default_ontology,
    load_ontology,
    query_llm_ontology,
    save_ontology,
)
from .raster import rasterize
from .render import render_heatmaps, render_layout

TOOL_VERSION = __version__


@dataclass
class RunConfig:
    dataset_dir: str = "dataset"
    ontology_file: str | None = None
    checkpoint: str = "checkpoint.json"
    output_dir: str = "out"
    variant: str = BASE
    grid_size: int = 32
    seed: int = 0
    n_scenes: int = 100
    n_rooms: int = 4
    blind_fraction: float = 0.25
    removal_fraction: float = 0.25
    hidden: int = 256
    dropout: float = 0.2
    epochs: int = 5000
    batch_size: int = 12
    lr: float = 1e-5
    lr_decay: float = 1e-8
    threshold: float | None = None

    @staticmethod
    def load(path, overrides: dict) -> "RunConfig":
        values = {}
        if path:
            with open(path, "r", encoding="utf-8") as f:
                doc = json.load(f)
            known = {f.name for f in fields(RunConfig)}
            unknown = set(doc) - known
            if unknown:
                raise ConfigMismatchError(f"unknown config keys: {sorted(unknown)}")
            values.update(doc)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig(**values)


def _stamp(cfg: RunConfig) -> dict:
    return {
        "S": cfg.grid_size,
        "catalog_hash": default_catalog().hash(),
        "seed": cfg.seed,
        "tool_version": TOOL_VERSION,
    }


def _check_stamp(artifact: dict, cfg: RunConfig, what: str) -> None:
    stamp = artifact.get("stamp", {})
    if stamp.get("S") != cfg.grid_size:
        raise ConfigMismatchError(
            f"{what}: grid size {stamp.get('S')} != configured {cfg.grid_size}"
        )
    if stamp.get("catalog_hash") != default_catalog().hash():
        raise ConfigMismatchError(f"{what}: catalog hash mismatch")


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _require(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise MissingArtifactError(f"{what} not found: {p}")
    return p


def cmd_generate(cfg: RunConfig) -> None:
    if cfg.n_scenes <= 0:
        raise SceneCompError("n_scenes must be positive")
    catalog = default_catalog()
    templates = default_templates()
    samples = []
    for i in range(cfg.n_scenes):
        scene_seed = splitmix64(cfg.seed, i)
        g = generate_synthetic_scene(templates, cfg.n_rooms, scene_seed, catalog)
        g_aug = augment(g, cfg.removal_fraction, splitmix64(scene_seed, 1))
        samples.append(
            make_sample(g_aug, cfg.blind_fraction, cfg.grid_size, splitmix64(scene_seed, 2))
        )
    splits = split_dataset(samples, seed=cfg.seed)
    save_dataset(samples, splits, cfg.dataset_dir, cfg.grid_size, catalog, cfg.seed)
    print(
        f"wrote {len(samples)} samples "
        f"({len(splits[0])}/{len(splits[1])}/{len(splits[2])} train/val/test) "
        f"to {cfg.dataset_dir}"
    )


def _load_dataset_checked(cfg: RunConfig):
    _require(Path(cfg.dataset_dir) / "manifest.json", "dataset manifest")
    manifest, splits = load_dataset(cfg.dataset_dir)
    if manifest["grid_size"] != cfg.grid_size:
        raise ConfigMismatchError(
            f"dataset grid size {manifest['grid_size']} != configured {cfg.grid_size}"
        )
    if manifest["catalog_hash"] != default_catalog().hash():
        raise ConfigMismatchError("dataset catalog hash mismatch")
    return manifest, splits


def _model_config(cfg: RunConfig) -> ModelConfig:
    return ModelConfig(
        variant=cfg.variant,
        n_classes=default_catalog().n,
        grid_size=cfg.grid_size,
        hidden=cfg.hidden,
        dropout=cfg.dropout,
    )


def _affinity(cfg: RunConfig):
    if cfg.variant != BASE_ONT:
        return None
    catalog = default_catalog()
    if cfg.ontology_file:
        onto = load_ontology(_require(cfg.ontology_file, "ontology file"), catalog)
    else:
        onto = default_ontology()
        onto.check_catalog(catalog)
    return class_affinity(onto)


def cmd_train(cfg: RunConfig) -> None:
    _, splits = _load_dataset_checked(cfg)
    m = new_model(_model_config(cfg), default_catalog().hash(), cfg.seed, _affinity(cfg))
    tc = TrainConfig(cfg.epochs, cfg.batch_size, cfg.lr, cfg.lr_decay, cfg.seed)
    m, history = train(m, splits["train"], splits.get("val"), tc)
    save_checkpoint(
        cfg.checkpoint,
        m.config,
        m.params,
        m.stats,
        m.catalog_hash,
        extra={
            "stamp": _stamp(cfg),
            "dataset_manifest_hash": _file_hash(Path(cfg.dataset_dir) / "manifest.json"),
            "history_tail": history[-5:],
        },
    )
    final = history[-1]["train"] if history else float("nan")
    print(f"trained {cfg.variant} for {len(history)} epochs, final train MSE {final:.6g}")
    print(f"checkpoint written to {cfg.checkpoint}")


def _load_model(cfg: RunConfig) -> CompositionModel:
    path = _require(cfg.checkpoint, "checkpoint")
    config, params, stats, catalog_hash, _, extra = load_checkpoint(path)
    if config.grid_size != cfg.grid_size:
        raise ConfigMismatchError(
            f"checkpoint grid size {config.grid_size} != configured {cfg.grid_size}"
        )
    if catalog_hash != default_catalog().hash():
        raise ConfigMismatchError("checkpoint catalog hash mismatch")
    cfg.variant = config.variant
    return CompositionModel(config, params, stats, catalog_hash, _affinity(cfg))


def cmd_eval(cfg: RunConfig) -> None:
    manifest, splits = _load_dataset_checked(cfg)
    m = _load_model(cfg)
    report = evaluate_model(
        m,
        splits["test"],
        provenance={
            "checkpoint_hash": _file_hash(cfg.checkpoint),
            "dataset_manifest_hash": _file_hash(Path(cfg.dataset_dir) / "manifest.json"),
            "flattening_convention": FLATTENING_CONVENTION,
        },
    )
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "metrics_report.json"
    with open(out, "w", encoding="utf-8") as f:
        json.dump({"stamp": _stamp(cfg), **report.to_dict()}, f, indent=1)
    print(f"metrics report written to {out}")
    for name in ("wasserstein", "energy", "frobenius"):
        moments = getattr(report, name)
        print(f"  {name}: mean={moments.mean} n={moments.n}")


def cmd_predict(cfg: RunConfig, graph_path) -> None:
    from .dataset import BsgSample

    g = load_graph(_require(graph_path, "graph file"))
    if g.kind != BELIEF:
        raise UnreadableInputError("predict expects a belief graph")
    m = _load_model(cfg)
    heat, counts = rasterize(g, cfg.grid_size)
    sample = BsgSample(g, heat, counts, heat, ())
    predicted = predict(m, sample)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "prediction.json"
    blind_counts = {}
    for room in heat.room_ids:
        ri = heat.room_index(room)
        from .graphs import BLIND, children_of

        per_class = {}
        for b in children_of(g, room, BLIND):
            per_class[b.class_index] = per_class.get(b.class_index, 0) + 1
        blind_counts[str(room)] = per_class
    with open(out, "w", encoding="utf-8") as f:
        json.dump(
            {
                "stamp": _stamp(cfg),
                "heatmaps": heatmaps_to_dict(predicted),
                "counts": {
                    "room_ids": list(counts.room_ids),
                    "data": [[int(v) for v in row] for row in counts.data],
                },
                "blind_counts": blind_counts,
            },
            f,
        )
    print(f"prediction written to {out}")


def cmd_layout(cfg: RunConfig, prediction_path) -> None:
    with open(_require(prediction_path, "prediction file"), "r", encoding="utf-8") as f:
        doc = json.load(f)
    _check_stamp(doc, cfg, "prediction file")
    heat = heatmaps_from_dict(doc["heatmaps"])
    threshold = cfg.threshold if cfg.threshold is not None else default_threshold(heat.grid_size)
    rooms_out = []
    for ri, room_id in enumerate(heat.room_ids):
        frame = heat.room_frames[ri]
        grid_stack = heat.data[ri]
        lg = extract_layout(grid_stack, threshold, frame)
        blind = [
            (int(ci), int(n))
            for ci, n in doc.get("blind_counts", {}).get(str(room_id), {}).items()
        ]
        placements = place_blind_nodes(grid_stack, blind, lg, frame)
        rooms_out.append(layout_to_dict(room_id, lg, placements))
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "layout.json"
    with open(out, "w", encoding="utf-8") as f:
        json.dump({"stamp": _stamp(cfg), "rooms": rooms_out}, f, indent=1)
    print(f"layout written to {out}")


def cmd_render(cfg: RunConfig, input_path) -> None:
    with open(_require(input_path, "render input"), "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise UnreadableInputError(f"not a JSON artifact: {input_path}") from e
    out_dir = Path(cfg.output_dir)
    labels = default_catalog().labels
    if "heatmaps" in doc:
        written = render_heatmaps(heatmaps_from_dict(doc["heatmaps"]), labels, out_dir)
    elif "rooms" in doc:
        written = []
        for room_doc in doc["rooms"]:
            room_id, lg, _ = layout_from_dict(room_doc)
            written.append(render_layout(room_id, lg, out_dir))
    else:
        raise UnreadableInputError("input is neither a prediction nor a layout artifact")
    print(f"rendered {len(written)} images to {out_dir}")


def cmd_ontology(cfg: RunConfig, action: str, endpoint_config) -> None:
    catalog = default_catalog()
    if action == "validate":
        onto = (
            load_ontology(_require(cfg.ontology_file, "ontology file"), catalog)
            if cfg.ontology_file
            else default_ontology()
        )
        onto.check_catalog(catalog)
        aff = class_affinity(onto)
        print(
            f"ontology ok: {len(onto.room_concepts)} room concepts x "
            f"{len(onto.object_classes)} classes, affinity rows stochastic: "
            f"{bool(np.allclose(aff.matrix.sum(axis=1), 1.0))}"
        )
        return
    if action == "build":
        if not endpoint_config:
            raise MissingArtifactError("ontology build needs --endpoint-config")
        ep = EndpointConfig.from_file(_require(endpoint_config, "endpoint config"))
        onto = query_llm_ontology(ep, default_ontology().room_concepts, catalog)
        out = cfg.ontology_file or str(Path(cfg.output_dir) / "ontology.csv")
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        save_ontology(onto, out)
        print(f"ontology written to {out}")
        return
    raise SceneCompError(f"unknown ontology action: {action}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="scenecomp",
        description="Room-level scene composition pipeline",
    )
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int)
    p.add_argument("--variant", choices=["base", "base-ont"])
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", help="output directory")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", help="synthesize a dataset directory")
    sub.add_parser("train", help="train a model on a dataset")
    sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    sp = sub.add_parser("predict", help="predict heatmaps for a belief-graph file")
    sp.add_argument("graph", help="scene-graph JSON (kind=belief)")
    sl = sub.add_parser("layout", help="extract layouts from a prediction file")
    sl.add_argument("prediction", help="prediction JSON from the predict command")
    sr = sub.add_parser("render", help="render a prediction or layout to images")
    sr.add_argument("input", help="prediction or layout JSON")
    so = sub.add_parser("ontology", help="build or validate an ontology")
    so.add_argument("action", choices=["build", "validate"])
    so.add_argument("--endpoint-config", help="JSON endpoint config for build")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "seed": args.seed,
        "threshold": args.threshold,
        "output_dir": args.out,
        "variant": args.variant.replace("-", "_") if args.variant else None,
    }
    try:
        cfg = RunConfig.load(args.config, overrides)
        if args.command == "generate":
            cmd_generate(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "eval":
            cmd_eval(cfg)
        elif args.command == "predict":
            cmd_predict(cfg, args.graph)
        elif args.command == "layout":
            cmd_layout(cfg, args.prediction)
        elif args.command == "render":
            cmd_render(cfg, args.input)
        elif args.command == "ontology":
            cmd_ontology(cfg, args.action, args.endpoint_config)
    except SceneCompError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
