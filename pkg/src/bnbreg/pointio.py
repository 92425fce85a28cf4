"""Plain-text point files: one point per line, whitespace or comma separated, ``#`` comments."""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

__all__ = ["PointFileError", "read_points", "write_points", "write_json", "write_csv"]

_SPLIT = re.compile(r"[,\s]+")


class PointFileError(ValueError):
    pass


def read_points(path) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in _SPLIT.split(line) if v])
            except ValueError as exc:
                raise PointFileError(f"{path}:{lineno}: {exc}") from None
            if len(rows[-1]) != len(rows[0]):
                raise PointFileError(f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}")
    if not rows:
        raise PointFileError(f"{path}: no points")
    P = np.array(rows)
    if not np.all(np.isfinite(P)):
        raise PointFileError(f"{path}: non-finite coordinate")
    return P


def write_points(path, P) -> None:
    P = np.asarray(P, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        for row in P:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
