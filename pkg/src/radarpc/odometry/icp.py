"""Point-to-point ICP in SE(2) against a sliding submap."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..se2 import Pose2
from .nn import GridIndex


@dataclass(frozen=True)
class IcpConfig:
    max_iterations: int = 50
    max_correspondence_dist: float = 2.0
    trim_fraction: float = 0.1
    convergence_eps: float = 1e-4
    submap_size: int = 3

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.max_correspondence_dist > 0:
            raise ValueError("max_correspondence_dist must be > 0")
        if not 0 <= self.trim_fraction < 1:
            raise ValueError("trim_fraction must lie in [0, 1)")
        if not self.convergence_eps > 0:
            raise ValueError("convergence_eps must be > 0")
        if self.submap_size < 1:
            raise ValueError("submap_size must be >= 1")


@dataclass
class IcpStats:
    iterations: int
    inlier_count: int
    rms_residual: float
    rms_history: list[float] = field(default_factory=list)


class IcpFailure(RuntimeError):
    """No correspondences at some iteration; ``pose`` is the last estimate."""

    def __init__(self, message: str, pose: Pose2, iterations: int):
        super().__init__(message)
        self.pose = pose
        self.iterations = iterations


def solve_rigid_2d(src: np.ndarray, dst: np.ndarray) -> Pose2:
    """Least-squares rigid transform taking ``src`` onto ``dst`` (paired rows)."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if len(src) == 0 or len(src) != len(dst):
        raise ValueError("need equal, non-zero numbers of paired points")
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    s = src - mu_s
    d = dst - mu_d
    sxx = np.dot(s[:, 0], d[:, 0])
    syy = np.dot(s[:, 1], d[:, 1])
    sxy = np.dot(s[:, 0], d[:, 1])
    syx = np.dot(s[:, 1], d[:, 0])
    theta = math.atan2(sxy - syx, sxx + syy)
    c, si = math.cos(theta), math.sin(theta)
    tx = mu_d[0] - (c * mu_s[0] - si * mu_s[1])
    ty = mu_d[1] - (si * mu_s[0] + c * mu_s[1])
    return Pose2(tx, ty, theta)


class Submap:
    """The last ``size`` clouds, already expressed in the odometry frame."""

    def __init__(self, size: int, cell: float):
        self.size = size
        self.cell = cell
        self._clouds: deque = deque(maxlen=size)
        self._index: GridIndex | None = None
        self._points: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._clouds)

    @property
    def timestamps(self) -> list[float]:
        return [t for t, _ in self._clouds]

    def add(self, points_odom: np.ndarray, timestamp: float) -> None:
        pts = np.asarray(points_odom, dtype=np.float64).reshape(-1, 2)
        if self._clouds and timestamp <= self._clouds[-1][0]:
            raise ValueError("submap clouds must arrive in timestamp order")
        self._clouds.append((timestamp, pts))
        self._index = None
        self._points = None

    @property
    def points(self) -> np.ndarray:
        if self._points is None:
            parts = [p for _, p in self._clouds]
            self._points = np.concatenate(parts) if parts else np.empty((0, 2))
        return self._points

    @property
    def index(self) -> GridIndex:
        if self._index is None:
            self._index = GridIndex(self.points, self.cell)
        return self._index


def _as_target(target, cell: float) -> tuple[np.ndarray, GridIndex]:
    if isinstance(target, Submap):
        if len(target.points) == 0:
            raise ValueError("target submap is empty")
        if target.cell >= cell:
            return target.points, target.index
        return target.points, GridIndex(target.points, cell)
    pts = np.asarray(target, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("target point set is empty")
    return pts, GridIndex(pts, cell)


def icp_align(source: np.ndarray, target, init: Pose2, cfg: IcpConfig = IcpConfig()) -> tuple[Pose2, IcpStats]:
    """Refine ``init`` so that ``init.apply(source)`` lands on ``target``.

    ``source`` is an ``(n, 2)`` array in the sensor frame; ``target`` is a
    :class:`Submap` or an ``(m, 2)`` array in the odometry frame.
    """
    src = np.asarray(source, dtype=np.float64).reshape(-1, 2)
    if len(src) == 0:
        raise ValueError("source point set is empty")
    tgt, index = _as_target(target, cfg.max_correspondence_dist)
    pose = init
    history: list[float] = []
    inliers = 0
    rms = math.nan
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        moved = pose.apply(src)
        j, d = index.nearest(moved, cfg.max_correspondence_dist)
        ok = np.flatnonzero(j >= 0)
        if len(ok) == 0:
            raise IcpFailure(f"no correspondences within {cfg.max_correspondence_dist} m at iteration {it}",
                             pose, it)
        n_keep = max(1, len(ok) - int(cfg.trim_fraction * len(ok)))
        if n_keep < len(ok):
            keep = ok[np.argsort(d[ok], kind="stable")[:n_keep]]
        else:
            keep = ok
        history.append(float(np.sqrt(np.mean(d[keep] ** 2))))
        p, q = moved[keep], tgt[j[keep]]
        delta = solve_rigid_2d(p, q)
        pose = delta @ pose
        inliers = len(keep)
        rms = float(np.sqrt(np.mean(np.sum((delta.apply(p) - q) ** 2, axis=1))))
        if math.hypot(delta.x, delta.y) < cfg.convergence_eps and abs(delta.theta) < cfg.convergence_eps:
            break
    return pose, IcpStats(it, inliers, rms, history)
