from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


@dataclass
class ExperimentReport:
    """Outcome of one experiment.

    ``passed`` is decided only by the thresholds echoed in ``config``.
    ``runtime_seconds`` is informational and never serialised, so that written
    reports are byte-identical across reruns.
    """

    name: str
    config: dict
    metrics: dict
    passed: bool
    seed: int
    runtime_seconds: float = 0.0
    table: list = field(default_factory=list)
    table_header: tuple = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "config": _plain(self.config),
            "metrics": _plain(self.metrics),
            "pass": bool(self.passed),
            "seed": int(self.seed),
            "table": [_plain(r) for r in self.table],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, allow_nan=False, indent=2, ensure_ascii=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if self.table:
            header = list(self.table_header) or sorted(self.table[0])
            w.writerow(header)
            for row in self.table:
                w.writerow([_cell(row[k]) for k in header])
        else:
            w.writerow(["metric", "value"])
            for k in sorted(self.metrics):
                w.writerow([k, _cell(self.metrics[k])])
        return buf.getvalue()


def _plain(obj: Any):
    """Convert numpy scalars/arrays and tuples into JSON-ready builtins."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _plain(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError(f"non-finite value {obj} cannot be serialised")
    return obj


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v} cannot be serialised")
        return repr(v)
    return str(v)


def write_report(report: ExperimentReport, out_dir) -> tuple[Path, Path]:
    """Write ``<name>-<seed>.json`` and ``<name>-<seed>.csv``; raises ValueError on NaN."""
    out_dir = Path(out_dir)
    text_json = report.to_json()
    text_csv = report.to_csv()
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{report.name}-{report.seed}"
    pj, pc = out_dir / f"{stem}.json", out_dir / f"{stem}.csv"
    pj.write_text(text_json, encoding="utf-8")
    pc.write_text(text_csv, encoding="utf-8")
    return pj, pc
