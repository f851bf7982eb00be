"""Polar scan containers, power-unit conversions and polar/Cartesian geometry."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

RAW_MAX_LEVEL = 255
DB_MAX = RAW_MAX_LEVEL / 2.0


class UnitError(ValueError):
    """A scan was handed to an operation that needs a different power unit."""


class PowerUnit(enum.Enum):
    RAW_HALF_DB = "raw_half_db"
    DECIBEL = "decibel"
    WATT = "watt"
    WATT_SQUARED = "watt_squared"


@dataclass(frozen=True)
class ScanGeometry:
    num_azimuths: int
    num_bins: int
    range_resolution: float
    azimuth_0_angle: float = 0.0
    rotation_rate: float = 4.0

    def __post_init__(self):
        if self.num_azimuths < 3:
            raise ValueError(f"num_azimuths must be >= 3, got {self.num_azimuths}")
        if self.num_bins < 1:
            raise ValueError(f"num_bins must be >= 1, got {self.num_bins}")
        if not self.range_resolution > 0:
            raise ValueError(f"range_resolution must be > 0, got {self.range_resolution}")
        if not self.rotation_rate > 0:
            raise ValueError(f"rotation_rate must be > 0, got {self.rotation_rate}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_azimuths, self.num_bins)

    @property
    def max_range(self) -> float:
        return self.num_bins * self.range_resolution

    def azimuth_angles(self) -> np.ndarray:
        return self.azimuth_0_angle + 2.0 * np.pi * np.arange(self.num_azimuths) / self.num_azimuths

    def bin_ranges(self) -> np.ndarray:
        # bin-center convention
        return (np.arange(self.num_bins) + 0.5) * self.range_resolution


_DTYPES = {
    PowerUnit.RAW_HALF_DB: np.uint8,
    PowerUnit.DECIBEL: np.float32,
    PowerUnit.WATT: np.float64,
    PowerUnit.WATT_SQUARED: np.float64,
}


@dataclass(frozen=True, eq=False)
class PolarScan:
    """One radar rotation: an ``num_azimuths x num_bins`` grid of power values.

    The grid is stored read-only; conversions return new scans.
    """

    geometry: ScanGeometry
    unit: PowerUnit
    timestamp: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=_DTYPES[self.unit], copy=True)
        if values.shape != self.geometry.shape:
            raise ValueError(
                f"grid shape {values.shape} does not match geometry {self.geometry.shape}"
            )
        if self.unit is not PowerUnit.RAW_HALF_DB:
            if not np.all(np.isfinite(values)):
                raise ValueError("scan values must be finite")
            if values.size and values.min() < 0:
                raise ValueError("scan values must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        if not isinstance(other, PolarScan):
            return NotImplemented
        return (
            self.geometry == other.geometry
            and self.unit == other.unit
            and self.timestamp == other.timestamp
            and self.values.dtype == other.values.dtype
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def require(self, unit: PowerUnit) -> None:
        if self.unit is not unit:
            raise UnitError(f"expected a {unit.value} scan, got {self.unit.value}")

    def with_values(self, values: np.ndarray, unit: PowerUnit) -> "PolarScan":
        return PolarScan(self.geometry, unit, self.timestamp, values)


def decode_raw(levels, geometry: ScanGeometry, timestamp: float = 0.0) -> PolarScan:
    """8-bit half-dB levels to a Decibel scan (``level / 2``, no renormalisation)."""
    levels = np.asarray(levels)
    if levels.shape != geometry.shape:
        raise ValueError(f"level grid shape {levels.shape} does not match geometry {geometry.shape}")
    if levels.dtype != np.uint8:
        if np.any(levels < 0) or np.any(levels > RAW_MAX_LEVEL) or np.any(levels != np.round(levels)):
            raise ValueError("raw levels must be integers in [0, 255]")
        levels = levels.astype(np.uint8)
    return PolarScan(geometry, PowerUnit.DECIBEL, timestamp, levels.astype(np.float32) / np.float32(2.0))


def encode_raw(scan: PolarScan) -> np.ndarray:
    """Inverse of :func:`decode_raw`; values must sit exactly on the half-dB grid."""
    if scan.unit is PowerUnit.RAW_HALF_DB:
        return scan.values.copy()
    scan.require(PowerUnit.DECIBEL)
    doubled = scan.values.astype(np.float64) * 2.0
    levels = np.rint(doubled)
    if np.any(levels != doubled) or np.any(levels < 0) or np.any(levels > RAW_MAX_LEVEL):
        raise ValueError("Decibel scan is not representable as 8-bit half-dB levels")
    return levels.astype(np.uint8)


def as_decibel(scan: PolarScan) -> PolarScan:
    if scan.unit is PowerUnit.RAW_HALF_DB:
        return decode_raw(scan.values, scan.geometry, scan.timestamp)
    scan.require(PowerUnit.DECIBEL)
    return scan


def to_watts(scan: PolarScan) -> PolarScan:
    scan.require(PowerUnit.DECIBEL)
    return scan.with_values(np.power(10.0, scan.values.astype(np.float64) / 10.0), PowerUnit.WATT)


def square_law(scan: PolarScan) -> PolarScan:
    scan.require(PowerUnit.WATT)
    w = scan.values.astype(np.float64)
    return scan.with_values(w * w, PowerUnit.WATT_SQUARED)


def to_watt_squared(scan: PolarScan) -> PolarScan:
    """Raw or Decibel scan through the full CFAR unit chain."""
    if scan.unit is PowerUnit.WATT_SQUARED:
        return scan
    if scan.unit is PowerUnit.WATT:
        return square_law(scan)
    return square_law(to_watts(as_decibel(scan)))


def polar_to_cartesian(azimuth_idx: int, range_bin: int, geometry: ScanGeometry) -> tuple[float, float]:
    if not 0 <= azimuth_idx < geometry.num_azimuths:
        raise IndexError(f"azimuth index {azimuth_idx} out of range")
    if not 0 <= range_bin < geometry.num_bins:
        raise IndexError(f"range bin {range_bin} out of range")
    r = (range_bin + 0.5) * geometry.range_resolution
    theta = geometry.azimuth_0_angle + 2.0 * math.pi * azimuth_idx / geometry.num_azimuths
    return r * math.cos(theta), r * math.sin(theta)


def polar_to_cartesian_arrays(azimuth_idx, range_bin, geometry: ScanGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`polar_to_cartesian`."""
    az = np.asarray(azimuth_idx, dtype=np.int64)
    rb = np.asarray(range_bin, dtype=np.int64)
    if az.size and (az.min() < 0 or az.max() >= geometry.num_azimuths):
        raise IndexError("azimuth index out of range")
    if rb.size and (rb.min() < 0 or rb.max() >= geometry.num_bins):
        raise IndexError("range bin out of range")
    r = (rb + 0.5) * geometry.range_resolution
    theta = geometry.azimuth_0_angle + 2.0 * np.pi * az / geometry.num_azimuths
    return r * np.cos(theta), r * np.sin(theta)


class Point2(NamedTuple):
    x: float
    y: float
    intensity: float
    azimuth_idx: int
    range_bin: int


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Extractor output, stored column-wise.

    ``intensity`` is in dB for every extractor so clouds compare across methods.
    """

    x: np.ndarray
    y: np.ndarray
    intensity: np.ndarray
    azimuth_idx: np.ndarray
    range_bin: np.ndarray
    source_timestamp: float = 0.0

    def __post_init__(self):
        cols = {}
        for name, dtype in (("x", np.float64), ("y", np.float64), ("intensity", np.float64),
                            ("azimuth_idx", np.int64), ("range_bin", np.int64)):
            col = np.array(getattr(self, name), dtype=dtype, copy=True).reshape(-1)
            col.setflags(write=False)
            cols[name] = col
        n = len(cols["x"])
        if any(len(c) != n for c in cols.values()):
            raise ValueError("point cloud columns differ in length")
        for name, col in cols.items():
            object.__setattr__(self, name, col)

    @classmethod
    def empty(cls, timestamp: float = 0.0) -> "PointCloud":
        return cls(np.empty(0), np.empty(0), np.empty(0), np.empty(0, np.int64), np.empty(0, np.int64), timestamp)

    @classmethod
    def from_indices(cls, azimuth_idx, range_bin, intensity, geometry: ScanGeometry,
                     timestamp: float = 0.0) -> "PointCloud":
        """Points at bin centres; each (azimuth, bin) pair may appear once."""
        a = np.asarray(azimuth_idx, dtype=np.int64).reshape(-1)
        b = np.asarray(range_bin, dtype=np.int64).reshape(-1)
        if len(a) and len(np.unique(a * geometry.num_bins + b)) != len(a):
            raise ValueError("duplicate (azimuth_idx, range_bin) pairs in point cloud")
        x, y = polar_to_cartesian_arrays(a, b, geometry)
        return cls(x, y, intensity, azimuth_idx, range_bin, timestamp)

    def __len__(self) -> int:
        return len(self.x)

    def __iter__(self) -> Iterator[Point2]:
        for row in zip(self.x, self.y, self.intensity, self.azimuth_idx, self.range_bin):
            yield Point2(float(row[0]), float(row[1]), float(row[2]), int(row[3]), int(row[4]))

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return self.source_timestamp == other.source_timestamp and all(
            np.array_equal(getattr(self, c), getattr(other, c))
            for c in ("x", "y", "intensity", "azimuth_idx", "range_bin")
        )

    __hash__ = None

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def index_set(self) -> set[tuple[int, int]]:
        return set(zip(self.azimuth_idx.tolist(), self.range_bin.tolist()))

    def has_unique_provenance(self) -> bool:
        return len(self.index_set()) == len(self)
