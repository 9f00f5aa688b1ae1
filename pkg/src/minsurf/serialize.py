"""JSON serialization of grids and sampled maps.

One document format is shared by every module and the CLI:

    {"n": ..., "m": ..., "extents": [[a, b], ...], "counts": [...],
     "values": [...]}

with values flattened row-major, axis 0 slowest, components fastest.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import DomainGrid, GridMap, build_grid

__all__ = ["map_to_document", "map_from_document", "save_map", "load_map"]


def map_to_document(f: GridMap) -> dict:
    return {
        "n": f.grid.n,
        "m": f.m,
        "extents": [[a, b] for a, b in f.grid.extents],
        "counts": list(f.grid.counts),
        "values": f.values.ravel(order="C").tolist(),
    }


def map_from_document(doc: dict) -> GridMap:
    required = {"n", "m", "extents", "counts", "values"}
    missing = required - doc.keys()
    if missing:
        raise ValueError(f"map document missing keys: {sorted(missing)}")
    grid = build_grid(int(doc["n"]), doc["extents"], doc["counts"])
    m = int(doc["m"])
    values = np.asarray(doc["values"], dtype=float).reshape(grid.counts + (m,), order="C")
    return GridMap(grid=grid, values=values)


def save_map(f: GridMap, path) -> None:
    Path(path).write_text(json.dumps(map_to_document(f)))


def load_map(path) -> GridMap:
    return map_from_document(json.loads(Path(path).read_text()))
