"""File formats: dataset CSV, truth sidecar JSON, connected-pair CSV, model JSON."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional

import numpy as np

from .dataset import Dataset, Truth


def fmt(v) -> str:
    return format(float(v), ".17g")


def truth_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".truth.json")


def save_dataset_csv(data: Dataset, path, write_truth: bool = True, noise: Optional[float] = None) -> None:
    """Write ``x1..xD,y`` rows and, when truth is attached, the sidecar JSON.

    ``noise`` (percent) is recorded in the sidecar so later fits can pick
    their default thresholds.
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{k + 1}" for k in range(data.D)] + ["y"])
        for row, yv in zip(data.X, data.y):
            w.writerow([fmt(v) for v in row] + [fmt(yv)])
    if write_truth and data.truth is not None:
        t = data.truth
        doc = {
            "example": t.example_id,
            "seed": t.seed,
            "d": t.d,
            "D": data.D,
            "phi": t.phi.tolist(),
        }
        if noise is not None:
            doc["noise"] = float(noise)
        truth_path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_sidecar(path) -> Optional[dict]:
    tp = truth_path(path)
    return json.loads(tp.read_text()) if tp.exists() else None


def load_dataset_csv(path, truth: bool = True) -> Dataset:
    """Read a dataset CSV and, if present, its truth sidecar.

    Noiseless responses are recomputed from the example formula named in the
    sidecar.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not header or header[-1] != "y":
        raise ValueError(f"{path}: last column must be 'y'")
    arr = np.array(body, dtype=float).reshape(len(body), len(header))
    X, y = arr[:, :-1], arr[:, -1]
    t = None
    doc = read_sidecar(path) if truth else None
    if doc is not None:
        phi = np.asarray(doc["phi"], dtype=float)
        f_values, g = np.full(len(y), np.nan), None
        if doc.get("example") is not None:
            from .synthetic import get_example

            spec = get_example(doc["example"])
            f_values, g = spec.f(X), spec.g
        t = Truth(phi, int(doc["d"]), f_values, doc.get("example"), doc.get("seed"), g)
    return Dataset(X, y, t)


def export_pairs(pairs, X, path) -> None:
    """Write connected pairs as ``i,j,xi_1..xi_D,xj_1..xj_D``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    D = X.shape[1]
    header = ["i", "j"] + [f"xi_{k + 1}" for k in range(D)] + [f"xj_{k + 1}" for k in range(D)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, j in pairs:
            w.writerow([int(i), int(j)] + [fmt(v) for v in X[i]] + [fmt(v) for v in X[j]])


def read_pairs(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return [(int(r[0]), int(r[1])) for r in rows]
