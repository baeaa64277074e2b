"""Training-sample generation: blind-node masking, synthetic scenes, splits.

A sample pairs a belief graph (partial heatmaps + full counts) with the
ground-truth heatmaps the model should recover. Synthetic scenes stand in
for large annotated 3D datasets at desk scale.
"""
from __future__ import annotations

import base64
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .catalog import ClassCatalog
from .errors import BadRatiosError, EmptyGraphError
from .graphs import (
    BELIEF,
    BLIND,
    BUILDING,
    GROUND_TRUTH,
    OBJECT,
    ROOM,
    SceneGraph,
    SceneNode,
    build_graph,
    graph_from_dict,
    graph_to_dict,
)
from .raster import DEFAULT_GRID_SIZE, Frame, HeatmapSet, ObjectCounts, rasterize, room_frame

FORMAT_VERSION = 1


def splitmix64(seed: int, index: int) -> int:
    """Derive a per-item seed from a master seed; splitmix64 finalizer."""
    z = (seed + (index + 1) * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return (z ^ (z >> 31)) & 0x7FFFFFFF


@dataclass(frozen=True)
class BsgSample:
    """One training sample: belief graph, its inputs, and the target."""

    graph: SceneGraph
    input_heatmaps: HeatmapSet
    counts: ObjectCounts
    target_heatmaps: HeatmapSet
    masked: tuple[tuple[int, int, int], ...]  # (room_id, class_index, node_id)


def make_sample(
    g: SceneGraph,
    blind_fraction: float = 0.25,
    grid_size: int = DEFAULT_GRID_SIZE,
    seed: int = 0,
    mode: str = "area",
) -> BsgSample:
    """Mask a random subset of objects as blind nodes and build the sample.

    At least one instance is always masked so the prediction target is
    nontrivial. Counts on the belief graph equal counts on the input graph
    by construction (each masked object becomes one blind node).
    """
    objects = sorted(n.id for n in g.nodes_in_layer(OBJECT))
    if not objects:
        raise EmptyGraphError("cannot make a sample from a graph without objects")
    k = max(1, round(blind_fraction * len(objects)))
    k = min(k, len(objects))
    masked_ids = set(random.Random(seed).sample(objects, k))

    # Pin frames from the full graph so input and target share geometry.
    frames = {r.id: room_frame(g, r.id) for r in g.nodes_in_layer(ROOM)}
    target, _ = rasterize(g, grid_size, mode, frames_override=frames)

    parent = {child: p for p, child in g.edges}
    masked = []
    next_id = max(n.id for n in g.nodes) + 1
    nodes = []
    edges = [e for e in g.edges if e[1] not in masked_ids]
    for n in g.nodes:
        if n.id in masked_ids:
            masked.append((parent[n.id], n.class_index, n.id))
            nodes.append(SceneNode(next_id, BLIND, n.class_index))
            edges.append((parent[n.id], next_id))
            next_id += 1
        else:
            nodes.append(n)
    belief = build_graph(nodes, edges, BELIEF, g.catalog)
    input_heatmaps, counts = rasterize(belief, grid_size, mode, frames_override=frames)
    return BsgSample(belief, input_heatmaps, counts, target, tuple(sorted(masked)))


# --- synthetic scenes -----------------------------------------------------

# Anchor kinds: "wall" (inset against a random wall), "wall_mid" (against a
# wall but inside the middle half of its length, away from corners),
# "center", "anywhere", or an object class name already placed in the room.
@dataclass(frozen=True)
class PlacementRule:
    class_name: str
    count_range: tuple[int, int]
    anchor: str = "anywhere"
    offset_scale: float = 0.8


@dataclass(frozen=True)
class SceneTemplate:
    name: str
    rules: tuple[PlacementRule, ...]

    def validate(self, catalog: ClassCatalog) -> None:
        for r in self.rules:
            catalog.index(r.class_name)
            if r.anchor not in ("wall", "wall_mid", "center", "anywhere"):
                catalog.index(r.anchor)


# Object AABB extents in meters (dx, dy, dz); fallback below.
_SIZES = {
    "bed": (2.0, 1.6, 0.6),
    "sofa": (2.0, 0.9, 0.8),
    "table": (1.4, 0.9, 0.75),
    "desk": (1.4, 0.7, 0.75),
    "chair": (0.5, 0.5, 0.9),
    "lamp": (0.3, 0.3, 1.5),
    "plant": (0.4, 0.4, 1.0),
    "tv": (1.2, 0.2, 0.7),
    "refrigerator": (0.7, 0.7, 1.8),
    "stove": (0.6, 0.6, 0.9),
    "sink": (0.6, 0.5, 0.3),
    "toilet": (0.4, 0.7, 0.8),
    "shower": (0.9, 0.9, 2.0),
    "bathtub": (1.7, 0.8, 0.6),
    "mirror": (0.8, 0.1, 1.0),
    "cabinet": (0.9, 0.5, 1.0),
    "shelf": (0.8, 0.3, 1.2),
    "bookshelf": (0.9, 0.3, 1.8),
    "wardrobe": (1.2, 0.6, 2.0),
    "dresser": (1.0, 0.5, 0.9),
    "nightstand": (0.5, 0.4, 0.6),
    "rug": (2.0, 1.4, 0.02),
    "washing_machine": (0.6, 0.6, 0.85),
}
_DEFAULT_SIZE = (0.5, 0.5, 0.5)


def object_size(class_name: str) -> tuple[float, float, float]:
    return _SIZES.get(class_name, _DEFAULT_SIZE)


def default_templates() -> tuple[SceneTemplate, ...]:
    """Room archetypes with placements consistent with the default ontology."""
    return (
        SceneTemplate(
            "kitchen",
            (
                PlacementRule("refrigerator", (1, 1), "wall"),
                PlacementRule("stove", (1, 1), "wall_mid"),
                PlacementRule("sink", (1, 1), "wall"),
                PlacementRule("cabinet", (1, 3), "wall"),
                PlacementRule("microwave", (0, 1), "cabinet", 0.5),
                PlacementRule("kettle", (0, 1), "cabinet", 0.5),
                PlacementRule("toaster", (0, 1), "cabinet", 0.5),
                PlacementRule("table", (0, 1), "center"),
                PlacementRule("chair", (0, 3), "table", 0.9),
                PlacementRule("trash_can", (0, 1), "anywhere"),
            ),
        ),
        SceneTemplate(
            "bedroom",
            (
                PlacementRule("bed", (1, 1), "wall"),
                PlacementRule("nightstand", (0, 2), "bed", 1.2),
                PlacementRule("lamp", (0, 1), "nightstand", 0.4),
                PlacementRule("wardrobe", (0, 1), "wall"),
                PlacementRule("dresser", (0, 1), "wall"),
                PlacementRule("mirror", (0, 1), "wall"),
                PlacementRule("curtain", (0, 1), "wall"),
                PlacementRule("rug", (0, 1), "center"),
                PlacementRule("plant", (0, 1), "wall"),
            ),
        ),
        SceneTemplate(
            "living_room",
            (
                PlacementRule("sofa", (1, 1), "wall"),
                PlacementRule("tv", (0, 1), "wall_mid"),
                PlacementRule("table", (0, 1), "center"),
                PlacementRule("chair", (0, 2), "table", 0.9),
                PlacementRule("cushion", (0, 2), "sofa", 0.5),
                PlacementRule("lamp", (0, 1), "sofa", 0.8),
                PlacementRule("plant", (0, 2), "wall"),
                PlacementRule("rug", (0, 1), "center"),
                PlacementRule("picture", (0, 2), "wall"),
                PlacementRule("clock", (0, 1), "wall"),
            ),
        ),
        SceneTemplate(
            "office",
            (
                PlacementRule("desk", (1, 1), "wall"),
                PlacementRule("chair", (1, 1), "desk", 0.6),
                PlacementRule("monitor", (0, 1), "desk", 0.4),
                PlacementRule("lamp", (0, 1), "desk", 0.5),
                PlacementRule("bookshelf", (0, 2), "wall"),
                PlacementRule("shelf", (0, 1), "wall"),
                PlacementRule("plant", (0, 1), "wall"),
                PlacementRule("trash_can", (0, 1), "desk", 0.8),
            ),
        ),
        SceneTemplate(
            "bathroom",
            (
                PlacementRule("toilet", (1, 1), "wall"),
                PlacementRule("sink", (1, 1), "wall"),
                PlacementRule("mirror", (0, 1), "sink", 0.3),
                PlacementRule("shower", (0, 1), "wall"),
                PlacementRule("bathtub", (0, 1), "wall"),
                PlacementRule("trash_can", (0, 1), "anywhere"),
            ),
        ),
        SceneTemplate(
            "dining_room",
            (
                PlacementRule("table", (1, 1), "center"),
                PlacementRule("chair", (2, 4), "table", 1.0),
                PlacementRule("cabinet", (0, 1), "wall"),
                PlacementRule("lamp", (0, 1), "table", 0.4),
                PlacementRule("picture", (0, 1), "wall"),
                PlacementRule("plant", (0, 1), "wall"),
            ),
        ),
    )


def template_by_name(name: str) -> SceneTemplate:
    for t in default_templates():
        if t.name == name:
            return t
    raise KeyError(f"no default template named {name!r}")


def _propose_position(
    rule: PlacementRule,
    frame: Frame,
    size: tuple[float, float, float],
    placed: dict[str, list[tuple[float, float]]],
    rng: random.Random,
) -> tuple[float, float] | None:
    lo_x, lo_y, hi_x, hi_y = frame
    mx, my = size[0] / 2, size[1] / 2
    if hi_x - lo_x <= 2 * mx or hi_y - lo_y <= 2 * my:
        return None
    anchor = rule.anchor
    if anchor in ("wall", "wall_mid"):
        side = rng.randrange(4)
        frac = (0.25, 0.75) if anchor == "wall_mid" else (0.0, 1.0)
        if side in (0, 1):  # left / right wall, slide along y
            y0 = lo_y + my + frac[0] * (hi_y - lo_y - 2 * my)
            y1 = lo_y + my + frac[1] * (hi_y - lo_y - 2 * my)
            y = rng.uniform(y0, y1)
            x = lo_x + mx if side == 0 else hi_x - mx
        else:  # bottom / top wall, slide along x
            x0 = lo_x + mx + frac[0] * (hi_x - lo_x - 2 * mx)
            x1 = lo_x + mx + frac[1] * (hi_x - lo_x - 2 * mx)
            x = rng.uniform(x0, x1)
            y = lo_y + my if side == 2 else hi_y - my
        return (x, y)
    if anchor == "center":
        cx, cy = (lo_x + hi_x) / 2, (lo_y + hi_y) / 2
        return (
            rng.uniform(cx - (hi_x - lo_x) / 4, cx + (hi_x - lo_x) / 4),
            rng.uniform(cy - (hi_y - lo_y) / 4, cy + (hi_y - lo_y) / 4),
        )
    if anchor == "anywhere":
        return (rng.uniform(lo_x + mx, hi_x - mx), rng.uniform(lo_y + my, hi_y - my))
    anchors = placed.get(anchor)
    if not anchors:
        return (rng.uniform(lo_x + mx, hi_x - mx), rng.uniform(lo_y + my, hi_y - my))
    ax, ay = rng.choice(anchors)
    for _ in range(20):
        x = ax + rng.gauss(0.0, rule.offset_scale)
        y = ay + rng.gauss(0.0, rule.offset_scale)
        if lo_x + mx <= x <= hi_x - mx and lo_y + my <= y <= hi_y - my:
            return (x, y)
    return None


def generate_synthetic_scene(
    templates: tuple[SceneTemplate, ...],
    n_rooms: int,
    seed: int,
    catalog: ClassCatalog,
) -> SceneGraph:
    """One building with n_rooms template-driven rooms; deterministic per seed.

    Returns the graph; infeasible placements are skipped (the skip count is
    recorded on the module-level counter returned by last_skip_count()).
    """
    if not templates:
        raise ValueError("need at least one template")
    for t in templates:
        t.validate(catalog)
    rng = random.Random(splitmix64(seed, 0))
    nodes = [SceneNode(0, BUILDING)]
    edges: list[tuple[int, int]] = []
    next_id = 1
    skipped = 0
    x_cursor = 0.0
    for _ in range(n_rooms):
        tpl = rng.choice(templates)
        w = rng.uniform(4.0, 8.0)
        h = rng.uniform(4.0, 8.0)
        frame = (x_cursor, 0.0, x_cursor + w, h)
        x_cursor += w + 1.0
        room_id = next_id
        next_id += 1
        nodes.append(
            SceneNode(
                room_id,
                ROOM,
                position=((frame[0] + frame[2]) / 2, h / 2, 1.35),
                dimensions=(w, h, 2.7),
            )
        )
        edges.append((0, room_id))
        placed: dict[str, list[tuple[float, float]]] = {}
        for rule in tpl.rules:
            count = rng.randint(*rule.count_range)
            size = object_size(rule.class_name)
            for _ in range(count):
                pos = _propose_position(rule, frame, size, placed, rng)
                if pos is None:
                    skipped += 1
                    continue
                nodes.append(
                    SceneNode(
                        next_id,
                        OBJECT,
                        class_index=catalog.index(rule.class_name),
                        position=(pos[0], pos[1], size[2] / 2),
                        dimensions=size,
                    )
                )
                edges.append((room_id, next_id))
                next_id += 1
                placed.setdefault(rule.class_name, []).append(pos)
    global _LAST_SKIP_COUNT
    _LAST_SKIP_COUNT = skipped
    return build_graph(nodes, edges, GROUND_TRUTH, catalog)


_LAST_SKIP_COUNT = 0


def last_skip_count() -> int:
    """Placements skipped as infeasible during the last scene generation."""
    return _LAST_SKIP_COUNT


# --- splits ---------------------------------------------------------------


def split_dataset(samples, ratios=(0.8, 0.1, 0.1), seed: int = 0):
    """Disjoint, exhaustive shuffle-split using largest-remainder rounding."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatiosError(f"ratios must be non-negative and sum to 1: {ratios}")
    idx = list(range(len(samples)))
    random.Random(seed).shuffle(idx)
    n = len(samples)
    quotas = [r * n for r in ratios]
    counts = [math.floor(q) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    for _ in range(n - sum(counts)):
        j = max(range(3), key=lambda i: (remainders[i], -i))
        counts[j] += 1
        remainders[j] = -1.0
    out = []
    start = 0
    for c in counts:
        out.append([samples[i] for i in idx[start : start + c]])
        start += c
    return tuple(out)


# --- serialization --------------------------------------------------------


def _array_to_b64(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")


def _array_from_b64(s: str, shape) -> np.ndarray:
    return np.frombuffer(base64.b64decode(s), dtype="<f8").reshape(shape).copy()


def heatmaps_to_dict(h: HeatmapSet) -> dict:
    return {
        "room_ids": list(h.room_ids),
        "grid_size": h.grid_size,
        "room_frames": [list(f) for f in h.room_frames],
        "shape": list(h.data.shape),
        "data_b64": _array_to_b64(h.data),
    }


def heatmaps_from_dict(d: dict) -> HeatmapSet:
    return HeatmapSet(
        _array_from_b64(d["data_b64"], d["shape"]),
        tuple(d["room_ids"]),
        int(d["grid_size"]),
        tuple(tuple(f) for f in d["room_frames"]),
    )


def sample_to_dict(s: BsgSample) -> dict:
    return {
        "version": FORMAT_VERSION,
        "graph": graph_to_dict(s.graph),
        "input_heatmaps": heatmaps_to_dict(s.input_heatmaps),
        "target_heatmaps": heatmaps_to_dict(s.target_heatmaps),
        "counts": {
            "room_ids": list(s.counts.room_ids),
            "data": [[int(v) for v in row] for row in s.counts.data],
        },
        "masked": [list(m) for m in s.masked],
    }


def sample_from_dict(d: dict) -> BsgSample:
    counts = ObjectCounts(
        np.array(d["counts"]["data"], dtype=np.int64), tuple(d["counts"]["room_ids"])
    )
    return BsgSample(
        graph_from_dict(d["graph"]),
        heatmaps_from_dict(d["input_heatmaps"]),
        counts,
        heatmaps_from_dict(d["target_heatmaps"]),
        tuple(tuple(m) for m in d["masked"]),
    )


def save_dataset(
    samples: list[BsgSample],
    splits: tuple[list[BsgSample], list[BsgSample], list[BsgSample]],
    out_dir,
    grid_size: int,
    catalog: ClassCatalog,
    master_seed: int,
) -> None:
    """Write one JSON per sample plus a manifest with split membership."""
    out_dir = Path(out_dir)
    (out_dir / "samples").mkdir(parents=True, exist_ok=True)
    names = {}
    for i, s in enumerate(samples):
        name = f"sample_{i:05d}.json"
        names[id(s)] = name
        with open(out_dir / "samples" / name, "w", encoding="utf-8") as f:
            json.dump(sample_to_dict(s), f)
    manifest = {
        "version": FORMAT_VERSION,
        "grid_size": grid_size,
        "catalog_hash": catalog.hash(),
        "master_seed": master_seed,
        "splits": {
            split_name: [names[id(s)] for s in split]
            for split_name, split in zip(("train", "val", "test"), splits)
        },
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)


def load_dataset(in_dir):
    """Read a dataset directory; returns (manifest, {split: [BsgSample]})."""
    in_dir = Path(in_dir)
    with open(in_dir / "manifest.json", "r", encoding="utf-8") as f:
        manifest = json.load(f)
    splits = {}
    for split_name, file_names in manifest["splits"].items():
        loaded = []
        for name in file_names:
            with open(in_dir / "samples" / name, "r", encoding="utf-8") as f:
                loaded.append(sample_from_dict(json.load(f)))
        splits[split_name] = loaded
    return manifest, splits
