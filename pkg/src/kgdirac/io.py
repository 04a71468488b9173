"""Run directories: flat metadata, CSV curves and binary snapshot dumps.

Snapshot layout (little endian)::

    8 bytes   magic b"KGSNAP01"
    int32     dim N
    int32     points M
    float64   half length L
    int32     components d
    int32     number of snapshots S
    S times:  float64 t, then d * M^N complex128 values, row-major (component first)
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .spectral import Field, GridSpec

__all__ = [
    "SNAP_MAGIC",
    "write_meta",
    "read_meta",
    "write_csv",
    "read_csv",
    "write_snapshots",
    "read_snapshots",
    "write_run_dir",
]

SNAP_MAGIC = b"KGSNAP01"
_HEADER = struct.Struct("<8siidii")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, complex, np.floating)):
        return repr(v.item() if isinstance(v, np.generic) else v)
    return str(v)


def write_meta(path, meta: dict) -> None:
    with open(path, "w") as fh:
        for k, v in meta.items():
            fh.write(f"{k}={_fmt(v)}\n")


def read_meta(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line and not line.startswith("#"):
            k, v = line.split("=", 1)
            out[k] = v
    return out


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Header row, comma delimiter, floats with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([f"{v:.16e}" if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(rows[0]))


def write_snapshots(path, snapshots: Sequence[tuple[float, Field]]) -> None:
    grid = snapshots[0][1].grid
    d = snapshots[0][1].components
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAP_MAGIC, grid.dim, grid.points, float(grid.half_length), d, len(snapshots)))
        for t, f in snapshots:
            fh.write(struct.pack("<d", float(t)))
            fh.write(np.ascontiguousarray(f.values, dtype="<c16").tobytes())


def read_snapshots(path) -> tuple[GridSpec, list[tuple[float, Field]]]:
    data = Path(path).read_bytes()
    magic, dim, points, L, d, S = _HEADER.unpack_from(data, 0)
    if magic != SNAP_MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    grid = GridSpec(dim, L, points)
    count = d * points**dim
    off = _HEADER.size
    out = []
    for _ in range(S):
        (t,) = struct.unpack_from("<d", data, off)
        off += 8
        vals = np.frombuffer(data, dtype="<c16", count=count, offset=off).reshape((d, *grid.shape))
        off += 16 * count
        out.append((t, Field(grid, vals.copy())))
    return grid, out


def write_run_dir(path, meta: dict, report=None, extra_reports: Sequence = (), snapshots: bool = False) -> Path:
    """meta.txt plus, for a solve, inf_curve.csv, norms.csv and picard.csv."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    write_meta(out / "meta.txt", meta)
    reports = ([report] if report is not None else []) + list(extra_reports)
    if reports:
        inf = sorted({r[0]: r for rep in reports for r in rep.inf_curve}.values())
        norms = sorted({r[0]: r for rep in reports for r in rep.norm_curve}.values())
        write_csv(out / "inf_curve.csv", ["t", "weighted_inf"], inf)
        write_csv(out / "norms.csv", ["t", "x_norm"], norms)
        rows = []
        for rep in reports:
            h, rel = rep.picard_history, rep.relative_history
            for i in range(len(h)):
                factor = h[i] / h[i - 1] if i > 0 and h[i - 1] > 0 else float("nan")
                rows.append((rep.config.direction, i + 1, float(h[i]), float(rel[i]), factor))
        write_csv(out / "picard.csv", ["direction", "iteration", "distance", "relative", "factor"], rows)
        if snapshots:
            snaps = [s for rep in reports for s in rep.snapshots]
            write_snapshots(out / "snapshots.bin", snaps)
    return out
