"""Canonical files: binary scans, label masks, point-cloud / trajectory / stats CSVs.

Scan layout (little-endian)::

    "RSCN" | u16 version | u16 num_azimuths | u32 num_bins |
    f64 range_resolution | f64 azimuth_0_angle | f64 rotation_rate | f64 timestamp |
    num_azimuths * num_bins uint8 half-dB levels, row-major by azimuth
"""

from __future__ import annotations

import csv
import io
import os
import struct
from pathlib import Path

import numpy as np

from .scan import PointCloud, PolarScan, PowerUnit, ScanGeometry, decode_raw, encode_raw
from .se2 import Trajectory

MAGIC = b"RSCN"
VERSION = 1
_HEADER = struct.Struct("<4sHHIdddd")


class ScanFormatError(ValueError):
    pass


def scan_to_bytes(scan: PolarScan) -> bytes:
    g = scan.geometry
    levels = encode_raw(scan)
    header = _HEADER.pack(MAGIC, VERSION, g.num_azimuths, g.num_bins, g.range_resolution,
                          g.azimuth_0_angle, g.rotation_rate, scan.timestamp)
    return header + np.ascontiguousarray(levels, dtype=np.uint8).tobytes()


def scan_from_bytes(data: bytes, raw: bool = False) -> PolarScan:
    if len(data) < _HEADER.size:
        raise ScanFormatError(f"truncated header: {len(data)} bytes < {_HEADER.size}")
    magic, version, n_az, n_bins, res, az0, rate, ts = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ScanFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ScanFormatError(f"unknown scan format version {version}")
    try:
        geometry = ScanGeometry(n_az, n_bins, res, az0, rate)
    except ValueError as exc:
        raise ScanFormatError(f"malformed header: {exc}") from exc
    payload = memoryview(data)[_HEADER.size:]
    expected = n_az * n_bins
    if len(payload) != expected:
        raise ScanFormatError(
            f"payload holds {len(payload)} bytes but header declares {n_az}x{n_bins} = {expected}"
        )
    levels = np.frombuffer(payload, dtype=np.uint8).reshape(n_az, n_bins)
    if raw:
        return PolarScan(geometry, PowerUnit.RAW_HALF_DB, ts, levels)
    return decode_raw(levels, geometry, ts)


def write_scan(scan: PolarScan, path) -> None:
    Path(path).write_bytes(scan_to_bytes(scan))


def read_scan(path, raw: bool = False) -> PolarScan:
    return scan_from_bytes(Path(path).read_bytes(), raw=raw)


def write_mask(mask: np.ndarray, path) -> None:
    Path(path).write_bytes(np.packbits(np.asarray(mask, dtype=bool).reshape(-1)).tobytes())


def read_mask(path, shape: tuple[int, int]) -> np.ndarray:
    data = np.frombuffer(Path(path).read_bytes(), dtype=np.uint8)
    n = shape[0] * shape[1]
    if len(data) != (n + 7) // 8:
        raise ScanFormatError(f"mask holds {len(data)} bytes, expected {(n + 7) // 8} for {shape}")
    return np.unpackbits(data, count=n).astype(bool).reshape(shape)


def _fmt(v: float) -> str:
    return f"{v:.9g}"


CLOUD_HEADER = ["x", "y", "intensity", "azimuth_idx", "range_bin"]


def cloud_to_csv(cloud: PointCloud) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CLOUD_HEADER)
    for p in cloud:
        w.writerow([_fmt(p.x), _fmt(p.y), _fmt(p.intensity), p.azimuth_idx, p.range_bin])
    return buf.getvalue()


def write_cloud(cloud: PointCloud, path) -> None:
    Path(path).write_text(cloud_to_csv(cloud), encoding="utf-8")


def read_cloud(path, timestamp: float = 0.0) -> PointCloud:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CLOUD_HEADER:
        raise ValueError(f"{path}: expected header {','.join(CLOUD_HEADER)}")
    body = rows[1:]
    if not body:
        return PointCloud.empty(timestamp)
    cols = list(zip(*body))
    return PointCloud(
        np.array(cols[0], float), np.array(cols[1], float), np.array(cols[2], float),
        np.array(cols[3], int), np.array(cols[4], int), timestamp,
    )


TRAJECTORY_HEADER = ["timestamp", "x", "y", "theta"]


def write_trajectory(traj: Trajectory, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for t, (x, y, th) in zip(traj.timestamps, traj.poses):
            w.writerow([repr(float(t)), repr(float(x)), repr(float(y)), repr(float(th))])


def read_trajectory(path) -> Trajectory:
    if not os.path.exists(path):
        raise FileNotFoundError(f"trajectory file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != TRAJECTORY_HEADER:
        raise ValueError(f"{path}: expected header {','.join(TRAJECTORY_HEADER)}")
    arr = np.array(rows[1:], dtype=np.float64).reshape(-1, 4)
    return Trajectory(arr[:, 0], arr[:, 1:])


STATS_HEADER = ["frame", "extract_ms", "n_points", "icp_iters", "icp_rms", "flag"]


def write_frame_stats(stats, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STATS_HEADER)
        for s in stats:
            w.writerow([s.frame, f"{s.extract_ms:.4f}", s.n_points, s.icp_iters, _fmt(s.icp_rms), s.flag])
