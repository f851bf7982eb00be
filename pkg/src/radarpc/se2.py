"""SE(2) poses and timestamped trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np


def wrap_angle(a):
    """Wrap to (-pi, pi]. Works on scalars and arrays."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(a, dtype=np.float64), 2.0 * np.pi)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class Pose2:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @classmethod
    def identity(cls) -> "Pose2":
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Pose2":
        return cls(m[0, 2], m[1, 2], math.atan2(m[1, 0], m[0, 0]))

    def as_matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s, self.x], [s, c, self.y], [0.0, 0.0, 1.0]])

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def __matmul__(self, other: "Pose2") -> "Pose2":
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )

    def inverse(self) -> "Pose2":
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.theta)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map an ``(n, 2)`` array of points from this pose's frame to the parent frame."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        c, s = math.cos(self.theta), math.sin(self.theta)
        out = np.empty_like(pts)
        out[:, 0] = c * pts[:, 0] - s * pts[:, 1] + self.x
        out[:, 1] = s * pts[:, 0] + c * pts[:, 1] + self.y
        return out

    def distance_to(self, other: "Pose2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Timestamped poses; ``poses`` is an ``(n, 3)`` array of ``x, y, theta``."""

    timestamps: np.ndarray
    poses: np.ndarray

    def __post_init__(self):
        ts = np.array(self.timestamps, dtype=np.float64, copy=True).reshape(-1)
        poses = np.array(self.poses, dtype=np.float64, copy=True).reshape(-1, 3)
        if len(ts) != len(poses):
            raise ValueError("timestamps and poses differ in length")
        if len(ts) > 1 and np.any(np.diff(ts) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")
        poses[:, 2] = wrap_angle(poses[:, 2]) if len(poses) else poses[:, 2]
        ts.setflags(write=False)
        poses.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "poses", poses)

    @classmethod
    def from_poses(cls, timestamps: Iterable[float], poses: Iterable[Pose2]) -> "Trajectory":
        poses = list(poses)
        arr = np.array([[p.x, p.y, p.theta] for p in poses]).reshape(-1, 3)
        return cls(np.asarray(list(timestamps), dtype=np.float64), arr)

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, i: int) -> Pose2:
        x, y, th = self.poses[i]
        return Pose2(x, y, th)

    def __iter__(self) -> Iterator[Pose2]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return np.array_equal(self.timestamps, other.timestamps) and np.array_equal(self.poses, other.poses)

    __hash__ = None

    def path_lengths(self) -> np.ndarray:
        """Cumulative travelled distance at each pose."""
        if len(self) == 0:
            return np.zeros(0)
        steps = np.hypot(np.diff(self.poses[:, 0]), np.diff(self.poses[:, 1]))
        return np.concatenate([[0.0], np.cumsum(steps)])

    def transformed(self, g: Pose2) -> "Trajectory":
        """Left-multiply every pose by ``g`` (change of world frame)."""
        return Trajectory.from_poses(self.timestamps, (g @ p for p in self))
