"""Discrete room layouts and blind-node placement from predicted heatmaps."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import OutOfBoundsError
from .raster import Frame, cell_edges

EMPTY = -1


def default_threshold(grid_size: int) -> float:
    # uniform-density floor: a cell must beat 1/S^2 to be considered occupied
    return 1.0 / (grid_size * grid_size)


@dataclass(frozen=True)
class LayoutGrid:
    cells: np.ndarray  # [S, S] of class index or EMPTY
    threshold: float
    frame: Frame | None = None

    @property
    def grid_size(self) -> int:
        return self.cells.shape[0]


def extract_layout(
    heatmaps: np.ndarray, threshold: float, frame: Frame | None = None
) -> LayoutGrid:
    """Per-cell argmax over classes, emptied where no class beats the threshold.

    Ties go to the lowest class index.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    best = np.argmax(heatmaps, axis=0)  # lowest index wins ties
    peak = np.max(heatmaps, axis=0)
    cells = np.where(peak >= threshold, best, EMPTY).astype(np.int64)
    return LayoutGrid(cells, threshold, frame)


def grid_to_world(frame: Frame, cell: tuple[int, int], grid_size: int) -> tuple[float, float]:
    """World coordinates of a cell center under the room frame's linear map."""
    i, j = cell
    if not (0 <= i < grid_size and 0 <= j < grid_size):
        raise OutOfBoundsError(f"cell {cell} outside a {grid_size}x{grid_size} grid")
    ex, ey = cell_edges(frame, grid_size)
    return (float((ex[i] + ex[i + 1]) / 2), float((ey[j] + ey[j + 1]) / 2))


@dataclass(frozen=True)
class Placement:
    class_index: int
    cell: tuple[int, int]
    xy: tuple[float, float]
    low_support: bool = False  # placed beyond the nonzero cells of its heatmap


def place_blind_nodes(
    heatmaps: np.ndarray,
    blind: list[tuple[int, int]],
    layout: LayoutGrid,
    frame: Frame,
) -> list[Placement]:
    """Greedy per-class placement of blind instances at heatmap peaks.

    Each instance of class k takes the highest-probability cell of k's
    heatmap not already holding an instance of k; ties resolve in row-major
    cell order. When a class has more instances than nonzero cells the
    remainder continues down the same ordering with a warning flag.
    """
    s = layout.grid_size
    placements: list[Placement] = []
    for class_index, count in sorted(blind):
        if count < 0:
            raise ValueError("blind counts must be non-negative")
        if count == 0:
            continue
        grid = heatmaps[class_index]
        flat = grid.ravel()
        # stable sort by descending probability, then row-major index
        order = np.argsort(-flat, kind="stable")
        n_nonzero = int(np.count_nonzero(flat))
        for k in range(count):
            if k < n_nonzero:
                idx = int(order[k])
            else:
                # out of support: reuse the class's global-max cells, flagged
                idx = int(order[(k - n_nonzero) % max(1, n_nonzero)])
            i, j = divmod(idx, s)
            placements.append(
                Placement(
                    class_index,
                    (i, j),
                    grid_to_world(frame, (i, j), s),
                    low_support=k >= n_nonzero,
                )
            )
    return placements


# --- serialization --------------------------------------------------------


def _rle(values: list[int]) -> list[list[int]]:
    runs = []
    for v in values:
        if runs and runs[-1][0] == v:
            runs[-1][1] += 1
        else:
            runs.append([v, 1])
    return runs


def _unrle(runs) -> list[int]:
    out = []
    for v, count in runs:
        out.extend([v] * count)
    return out


def layout_to_dict(
    room_id: int, layout: LayoutGrid, placements: list[Placement]
) -> dict:
    return {
        "room_id": room_id,
        "S": layout.grid_size,
        "threshold": layout.threshold,
        "cells": _rle([int(v) for v in layout.cells.ravel()]),
        "placements": [
            {
                "class": p.class_index,
                "cell": list(p.cell),
                "xy": list(p.xy),
                "low_support": p.low_support,
            }
            for p in placements
        ],
    }


def layout_from_dict(d: dict):
    s = int(d["S"])
    cells = np.array(_unrle(d["cells"]), dtype=np.int64).reshape(s, s)
    layout = LayoutGrid(cells, float(d["threshold"]))
    placements = [
        Placement(
            int(p["class"]),
            tuple(p["cell"]),
            tuple(p["xy"]),
            bool(p.get("low_support", False)),
        )
        for p in d["placements"]
    ]
    return int(d["room_id"]), layout, placements


def save_layout(path, room_id: int, layout: LayoutGrid, placements: list[Placement]):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(layout_to_dict(room_id, layout, placements), f, indent=1)
