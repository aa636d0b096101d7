"""Series CSV, snapshot and manifest files."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .flow import SERIES_COLUMNS, Trajectory


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return repr(float(x))


def export_series(traj: Trajectory, path) -> Path:
    """Write the per-sample diagnostics; floats use ``repr`` so they round-trip exactly."""
    if not len(traj):
        raise ValueError("cannot export an empty trajectory")
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for row in traj.rows:
            w.writerow([_fmt(row.get(c)) for c in SERIES_COLUMNS])
    return path


def read_series(path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {
        c: np.array([float(r[c]) if r[c] != "" else np.nan for r in rows]) for c in SERIES_COLUMNS
    }


def write_snapshot(path, v, alpha: float, t: float) -> Path:
    path = Path(path)
    v = np.asarray(v, dtype=float)
    doc = {"n": int(v.size), "alpha": float(alpha), "t": float(t), "v": v.tolist()}
    path.write_text(json.dumps(doc) + "\n")
    return path


def read_snapshot(path) -> dict:
    doc = json.loads(Path(path).read_text())
    missing = {"n", "alpha", "t", "v"} - set(doc)
    if missing:
        raise ValueError(f"snapshot {path} lacks {', '.join(sorted(missing))}")
    v = np.array(doc["v"], dtype=float)
    if v.size != doc["n"]:
        raise ValueError(f"snapshot {path}: n = {doc['n']} but {v.size} samples")
    return {"n": int(doc["n"]), "alpha": float(doc["alpha"]), "t": float(doc["t"]), "v": v}


def write_manifest(path, manifest: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
