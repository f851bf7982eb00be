"""Odometry drift (KITTI-style segment errors), detection Pd/Pfa and runtime accounting."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .scan import PointCloud
from .se2 import Trajectory, wrap_angle

SEGMENT_LENGTHS = (100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0)


@dataclass
class SegmentErrors:
    length: float
    samples: int
    ate_percent: float
    are_deg_per_m: float


@dataclass
class OdomErrorReport:
    """Mean relative drift over all (start frame, segment length) samples.

    ``valid`` is false when no start frame has enough path left for even the
    shortest segment; the error fields are then NaN.
    """

    ate_percent: float
    are_deg_per_m: float
    samples: int
    per_length: list[SegmentErrors] = field(default_factory=list)
    valid: bool = True

    @property
    def are_millideg_per_m(self) -> float:
        return self.are_deg_per_m * 1e3

    def to_dict(self) -> dict:
        d = asdict(self)
        d["are_millideg_per_m"] = self.are_millideg_per_m
        return d


def _check_aligned(gt: Trajectory, est: Trajectory) -> None:
    if len(gt) != len(est):
        raise ValueError(f"trajectory lengths differ: {len(gt)} vs {len(est)}")
    if not np.allclose(gt.timestamps, est.timestamps, rtol=0, atol=1e-6):
        raise ValueError("trajectory timestamps do not match")


def _relative(poses: np.ndarray, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Vectorised ``inv(P_i) @ P_j`` as (dx, dy, dtheta) rows."""
    xi, yi, ti = poses[i, 0], poses[i, 1], poses[i, 2]
    dx, dy = poses[j, 0] - xi, poses[j, 1] - yi
    c, s = np.cos(ti), np.sin(ti)
    return np.column_stack((c * dx + s * dy, -s * dx + c * dy, wrap_angle(poses[j, 2] - ti)))


def _error(rel_gt: np.ndarray, rel_est: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Translation norm and |rotation| of ``inv(rel_gt) @ rel_est``, row-wise."""
    c, s = np.cos(rel_gt[:, 2]), np.sin(rel_gt[:, 2])
    dx = rel_est[:, 0] - rel_gt[:, 0]
    dy = rel_est[:, 1] - rel_gt[:, 1]
    ex = c * dx + s * dy
    ey = -s * dx + c * dy
    return np.hypot(ex, ey), np.abs(wrap_angle(rel_est[:, 2] - rel_gt[:, 2]))


def kitti_errors(gt: Trajectory, est: Trajectory, lengths: Sequence[float] = SEGMENT_LENGTHS,
                 stride: int = 1) -> OdomErrorReport:
    """Average translational (%) and rotational (deg/m) drift over fixed path lengths.

    Every ``stride``-th frame is a start; the segment ends at the first frame
    whose ground-truth path length from the start reaches ``L``, and errors are
    divided by ``L``.
    """
    _check_aligned(gt, est)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    dist = gt.path_lengths()
    starts = np.arange(0, len(gt), stride)
    t_all: list[np.ndarray] = []
    r_all: list[np.ndarray] = []
    per_length = []
    for L in lengths:
        ends = np.searchsorted(dist, dist[starts] + L, side="left")
        ok = ends < len(gt)
        i, j = starts[ok], ends[ok]
        if len(i) == 0:
            per_length.append(SegmentErrors(float(L), 0, math.nan, math.nan))
            continue
        t_err, r_err = _error(_relative(gt.poses, i, j), _relative(est.poses, i, j))
        t_s = t_err / L * 100.0
        r_s = np.degrees(r_err) / L
        t_all.append(t_s)
        r_all.append(r_s)
        per_length.append(SegmentErrors(float(L), len(i), float(t_s.mean()), float(r_s.mean())))
    if not t_all:
        return OdomErrorReport(math.nan, math.nan, 0, per_length, valid=False)
    t = np.concatenate(t_all)
    r = np.concatenate(r_all)
    return OdomErrorReport(float(t.mean()), float(r.mean()), len(t), per_length)


@dataclass
class DetectionReport:
    pd: float
    pfa: float
    tp: int
    fn: int
    fp: int
    tn: int

    def to_dict(self) -> dict:
        return asdict(self)


def _dilate_rows(mask: np.ndarray, d: int) -> np.ndarray:
    """OR of ``mask`` shifted by -d..d bins along each row (no wrap)."""
    if d == 0:
        return mask.copy()
    out = mask.copy()
    for s in range(1, d + 1):
        out[:, s:] |= mask[:, :-s]
        out[:, :-s] |= mask[:, s:]
    return out


def detection_metrics(cloud: PointCloud, labels: np.ndarray, dilation: int = 1) -> DetectionReport:
    """Pd and Pfa of a cloud's provenance bins against a boolean label grid.

    A true bin is detected when some point lies within ``dilation`` bins of it
    on the same azimuth. A point farther than that from every true bin marks
    its own bin as a false alarm. Counts are over bins, so the four add up to
    the grid size.
    """
    labels = np.asarray(labels, dtype=bool)
    if labels.ndim != 2:
        raise ValueError("labels must be a 2D grid")
    if dilation < 0:
        raise ValueError("dilation must be >= 0")
    n_az, n_bins = labels.shape
    az = np.asarray(cloud.azimuth_idx, dtype=np.int64)
    rb = np.asarray(cloud.range_bin, dtype=np.int64)
    if len(az) and (az.min() < 0 or az.max() >= n_az or rb.min() < 0 or rb.max() >= n_bins):
        raise ValueError("cloud provenance falls outside the label grid")
    hits = np.zeros_like(labels)
    hits[az, rb] = True
    detected = labels & _dilate_rows(hits, dilation)
    false_alarm = hits & ~_dilate_rows(labels, dilation)
    n_true = int(labels.sum())
    n_false = labels.size - n_true
    tp = int(detected.sum())
    fp = int(false_alarm.sum())
    pd = tp / n_true if n_true else 0.0
    pfa = fp / n_false if n_false else 0.0
    return DetectionReport(pd, pfa, tp, n_true - tp, fp, n_false - fp)


@dataclass
class RuntimeReport:
    mean_extract_ms: float
    mean_points: float
    frames: int


def runtime_report(stats: Sequence) -> RuntimeReport:
    """Mean extraction time and point count over per-frame stats records."""
    if len(stats) == 0:
        raise ValueError("runtime report needs at least one frame")
    ms = np.array([s.extract_ms for s in stats], dtype=np.float64)
    pts = np.array([s.n_points for s in stats], dtype=np.float64)
    return RuntimeReport(float(ms.mean()), float(pts.mean()), len(stats))


def report_to_json(report: OdomErrorReport | DetectionReport, path=None) -> str:
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def table_row(name: str, config: str, reports: dict[str, OdomErrorReport],
              runtime: RuntimeReport | None = None) -> dict:
    """One comparison-table row: averages first, then per-sequence values, then cost."""
    row = {"extractor": name, "config": config}
    valid = [r for r in reports.values() if r.valid]
    row["ate_percent"] = float(np.mean([r.ate_percent for r in valid])) if valid else math.nan
    row["are_millideg_per_m"] = float(np.mean([r.are_millideg_per_m for r in valid])) if valid else math.nan
    for seq, r in reports.items():
        row[f"{seq}_ate_percent"] = r.ate_percent
        row[f"{seq}_are_millideg_per_m"] = r.are_millideg_per_m
    if runtime is not None:
        row["runtime_ms"] = runtime.mean_extract_ms
        row["points"] = runtime.mean_points
    return row


def rows_to_csv(rows: Sequence[dict], path=None, float_fmt: str = "{:.6f}") -> str:
    """Write dict rows as CSV with a stable column order (first-seen keys)."""
    cols: list[str] = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c, ""), float_fmt) for c in cols])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def _cell(v, float_fmt: str) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else float_fmt.format(float(v))
    return str(v)


__all__ = [
    "SEGMENT_LENGTHS", "DetectionReport", "OdomErrorReport", "RuntimeReport", "SegmentErrors",
    "detection_metrics", "kitti_errors", "report_to_json", "rows_to_csv", "runtime_report", "table_row",
]
