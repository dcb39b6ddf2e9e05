"""CSV time series and binary field snapshots."""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

SNAPSHOT_MAGIC = b"PCRS"
SNAPSHOT_VERSION = 1


def write_csv(record, path) -> Path:
    """Write a record as CSV; the header carries ``name [unit]`` for every column.

    Values are written with 17 significant digits so reruns are byte-identical
    and a round trip through :func:`read_csv` is lossless.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = record.names()
    rows = zip(*(record.columns[n] for n in names))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{n} [{record.units[n]}]" for n in names])
        for row in rows:
            w.writerow([f"{v:.17g}" for v in row])
    return path


def read_csv(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
    names, units = [], {}
    for h in header:
        name, unit = h.rsplit(" [", 1)
        names.append(name)
        units[name] = unit.rstrip("]")
    if data.size == 0:
        data = np.zeros((0, len(names)))
    return {n: data[:, i] for i, n in enumerate(names)}, units


def write_snapshot(path, mesh_digest: str, time: float, values) -> Path:
    """Binary snapshot: magic, version, mesh hash, time, count, then float64 values."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.ascontiguousarray(values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<I", SNAPSHOT_VERSION))
        fh.write(mesh_digest.encode("ascii").ljust(64, b"\0")[:64])
        fh.write(struct.pack("<dQ", float(time), values.size))
        fh.write(values.tobytes())
    return path


def read_snapshot(path) -> tuple[str, float, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(4) != SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: not a snapshot file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"{path}: unsupported snapshot version {version}")
        digest = fh.read(64).rstrip(b"\0").decode("ascii")
        time, count = struct.unpack("<dQ", fh.read(16))
        values = np.frombuffer(fh.read(8 * count), dtype="<f8").copy()
    if values.size != count:
        raise ValueError(f"{path}: truncated snapshot")
    return digest, time, values


def write_record_snapshots(record, directory) -> list[Path]:
    directory = Path(directory)
    paths = []
    for i, (t, J) in enumerate(zip(record.snapshot_times, record.snapshots)):
        paths.append(write_snapshot(directory / f"J_{i:06d}.bin", record.mesh_digest, t, J))
    return paths
