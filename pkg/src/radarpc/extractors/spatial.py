"""Extractors that look across azimuths: C19 region selection and CFEAR clustering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..scan import PointCloud, PolarScan, PowerUnit, polar_to_cartesian_arrays
from .signal import kstrongest_indices


def prewitt_gradient(values: np.ndarray) -> np.ndarray:
    """Unnormalised Prewitt magnitude. Azimuths wrap, range bins reflect."""
    v = np.asarray(values, dtype=np.float64)
    # rows: azimuth (circular); columns: range (edge-reflected)
    p = np.pad(v, ((0, 0), (1, 1)), mode="symmetric")
    up = np.roll(p, 1, axis=0)
    down = np.roll(p, -1, axis=0)
    col_sum = up + p + down
    gx = col_sum[:, 2:] - col_sum[:, :-2]
    row_diff = down - up
    gy = row_diff[:, :-2] + row_diff[:, 1:-1] + row_diff[:, 2:]
    return np.hypot(gx, gy)


@dataclass(frozen=True)
class AzimuthRegion:
    azimuth_idx: int
    bin_lo: int
    bin_hi: int
    peak_bin: int
    peak_score: float

    def overlaps(self, other: "AzimuthRegion") -> bool:
        return self.bin_lo <= other.bin_hi and other.bin_lo <= self.bin_hi


def c19_regions(values: np.ndarray, l_max: int, region_drop: float = 0.5) -> list[AzimuthRegion]:
    v = np.asarray(values, dtype=np.float64)
    n_az, n_bins = v.shape
    grad = prewitt_gradient(v)
    g_lo, g_hi = grad.min(), grad.max()
    g_norm = (grad - g_lo) / (g_hi - g_lo) if g_hi > g_lo else np.zeros_like(grad)
    score = v * (1.0 - g_norm)
    # descending score, ties by flat index
    order = np.argsort(-score, axis=None, kind="stable")
    masked = np.zeros(v.shape, dtype=bool)
    regions: list[AzimuthRegion] = []
    for flat in order:
        if len(regions) >= l_max:
            break
        a, b = divmod(int(flat), n_bins)
        if masked[a, b]:
            continue
        row, taken = v[a], masked[a]
        floor = region_drop * row[b]
        lo = b
        while lo > 0 and not taken[lo - 1] and row[lo - 1] >= floor:
            lo -= 1
        hi = b
        while hi < n_bins - 1 and not taken[hi + 1] and row[hi + 1] >= floor:
            hi += 1
        taken[lo:hi + 1] = True
        peak = lo + int(np.argmax(row[lo:hi + 1]))
        regions.append(AzimuthRegion(a, lo, hi, peak, float(score[a, b])))
    return regions


def c19_select(regions: list[AzimuthRegion], n_az: int) -> list[AzimuthRegion]:
    """Keep regions that overlap a region on an adjacent (wrapping) azimuth."""
    by_az: dict[int, list[AzimuthRegion]] = {}
    for r in regions:
        by_az.setdefault(r.azimuth_idx, []).append(r)
    keep = []
    for r in regions:
        neighbours = by_az.get((r.azimuth_idx - 1) % n_az, []) + by_az.get((r.azimuth_idx + 1) % n_az, [])
        if any(r.overlaps(o) for o in neighbours if o is not r):
            keep.append(r)
    return keep


def extract_c19(scan: PolarScan, l_max: int, region_drop: float = 0.5) -> PointCloud:
    scan.require(PowerUnit.DECIBEL)
    regions = c19_regions(scan.values, l_max, region_drop)
    chosen = c19_select(regions, scan.geometry.num_azimuths)
    az = np.array([r.azimuth_idx for r in chosen], dtype=np.int64)
    rb = np.array([r.peak_bin for r in chosen], dtype=np.int64)
    return PointCloud.from_indices(az, rb, scan.values[az, rb], scan.geometry, scan.timestamp)


def cfear_from_seeds(xy: np.ndarray, intensity: np.ndarray, azimuth_idx: np.ndarray, range_bin: np.ndarray,
                     r: float, grid: float, p_min: int):
    """Grid-cell clusters of seed points. Returns (x, y, intensity, az, bin) columns."""
    empty = (np.empty(0), np.empty(0), np.empty(0), np.empty(0, np.int64), np.empty(0, np.int64))
    if len(xy) == 0:
        return empty
    cells = np.unique(np.floor(xy / grid).astype(np.int64), axis=0)
    centers = (cells + 0.5) * grid
    tree = cKDTree(xy)
    out = []
    for members in tree.query_ball_point(centers, r):
        if len(members) < p_min:
            continue
        members = np.sort(np.asarray(members, dtype=np.int64))
        # points lined up along one azimuth carry no cross-range structure
        if len(np.unique(azimuth_idx[members])) < 2:
            continue
        mean = xy[members].mean(axis=0)
        strongest = members[int(np.argmax(intensity[members]))]
        out.append((mean[0], mean[1], float(intensity[members].mean()),
                    int(azimuth_idx[strongest]), int(range_bin[strongest])))
    if not out:
        return empty
    cols = list(zip(*out))
    return (np.array(cols[0]), np.array(cols[1]), np.array(cols[2]),
            np.array(cols[3], np.int64), np.array(cols[4], np.int64))


def extract_cfear(scan: PolarScan, k: int, z_min: float, r: float = 0.5, grid: float = 0.5,
                  p_min: int = 5) -> PointCloud:
    scan.require(PowerUnit.DECIBEL)
    az, rb = kstrongest_indices(scan.values, k, z_min)
    x, y = polar_to_cartesian_arrays(az, rb, scan.geometry)
    cols = cfear_from_seeds(np.column_stack([x, y]), scan.values[az, rb].astype(np.float64), az, rb,
                            r, grid, p_min)
    return PointCloud(*cols, source_timestamp=scan.timestamp)
