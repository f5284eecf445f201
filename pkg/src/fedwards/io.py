"""Deterministic containers for arrays, JSON documents and path CSVs.

``numpy.savez`` stamps each zip member with the wall-clock time, which breaks
byte-for-byte reproducibility; :func:`write_npz` pins the timestamps instead.
The result is still an ordinary ``.npz`` readable by :func:`numpy.load`.
"""

from __future__ import annotations

import csv
import io
import json
import os
import zipfile
from pathlib import Path
from typing import Any, Mapping

import numpy as np

__all__ = ["write_npz", "read_npz", "write_json", "read_json", "write_path_csv", "read_path_csv"]

_META_KEY = "__meta__"
_EPOCH = (1980, 1, 1, 0, 0, 0)


def _atomic_write(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def write_npz(path: str | os.PathLike, arrays: Mapping[str, np.ndarray], meta: Mapping[str, Any] | None = None) -> Path:
    """Write ``arrays`` plus a JSON ``meta`` document to ``path``.

    Members are written in sorted key order with fixed timestamps.
    """
    path = Path(path)
    buf = io.BytesIO()
    members = dict(arrays)
    if meta is not None:
        blob = json.dumps(meta, sort_keys=True, indent=1).encode()
        members[_META_KEY] = np.frombuffer(blob, dtype=np.uint8)
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        for key in sorted(members):
            info = zipfile.ZipInfo(key + ".npy", date_time=_EPOCH)
            info.external_attr = 0o644 << 16
            arr = np.ascontiguousarray(members[key])
            member = io.BytesIO()
            np.lib.format.write_array(member, arr, allow_pickle=False)
            zf.writestr(info, member.getvalue())
    _atomic_write(path, buf.getvalue())
    return path


def read_npz(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    with np.load(path, allow_pickle=False) as data:
        arrays = {k: data[k] for k in data.files if k != _META_KEY}
        meta = json.loads(data[_META_KEY].tobytes()) if _META_KEY in data.files else {}
    return arrays, meta


def write_json(path: str | os.PathLike, doc: Any) -> Path:
    path = Path(path)
    _atomic_write(path, (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode())
    return path


def read_json(path: str | os.PathLike) -> Any:
    with open(path) as fh:
        return json.load(fh)


def write_path_csv(path: str | os.PathLike, grid: np.ndarray, path_values: np.ndarray) -> Path:
    """Export a ``d x M`` polymer path with header ``tau,x1,...,xd``."""
    path = Path(path)
    values = np.asarray(path_values, dtype=float)
    d = values.shape[0]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["tau"] + [f"x{i + 1}" for i in range(d)])
    for m, tau in enumerate(grid):
        writer.writerow([f"{tau:.17g}"] + [f"{values[i, m]:.17g}" for i in range(d)])
    _atomic_write(path, out.getvalue().encode())
    return path


def read_path_csv(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`write_path_csv`; returns ``(grid, path)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not header or header[0] != "tau":
        raise ValueError(f"{path}: not a path CSV (header {header})")
    table = np.array([[float(x) for x in row] for row in body], dtype=float).reshape(len(body), len(header))
    return table[:, 0], table[:, 1:].T.copy()
