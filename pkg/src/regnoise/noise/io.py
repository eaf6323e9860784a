"""CSV/JSON serialisation of sampled paths."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .types import MultiLevelPath, TimeGrid, validate_hurst

PATH_HEADER = ["t", "level", "component", "value"]


def write_path_csv(path: MultiLevelPath, csv_path, meta: dict) -> tuple[Path, Path]:
    """Write ``t,level,component,value`` rows plus a JSON metadata sidecar."""
    csv_path = Path(csv_path)
    t = path.grid.points
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PATH_HEADER)
        for level in range(path.levels.shape[0]):
            for j in range(t.size):
                for c in range(path.dim):
                    w.writerow([repr(float(t[j])), level, c, repr(float(path.levels[level, j, c]))])
    side = csv_path.with_suffix(".json")
    keys = ("hurst", "dim", "seed", "generator", "mvn_scale", "past_truncation")
    payload = {k: meta.get(k) for k in keys}
    payload["hurst"] = path.hurst.value
    payload["dim"] = path.dim
    side.write_text(json.dumps(payload, sort_keys=True, allow_nan=False, indent=2) + "\n", encoding="utf-8")
    return csv_path, side


def read_path_csv(csv_path) -> MultiLevelPath:
    csv_path = Path(csv_path)
    meta = json.loads(csv_path.with_suffix(".json").read_text(encoding="utf-8"))
    rows = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    t = np.unique(rows[:, 0])
    n_levels = int(rows[:, 1].max()) + 1
    dim = int(rows[:, 2].max()) + 1
    levels = rows[:, 3].reshape(n_levels, t.size, dim)
    grid = TimeGrid(t.size - 1, float(t[0]), float(t[-1]))
    return MultiLevelPath(validate_hurst(meta["hurst"]), grid, levels, meta=meta)
