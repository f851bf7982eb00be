"""Non-CFAR azimuth-wise extractors working directly on dB scans."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter1d

from ..scan import PointCloud, PolarScan, PowerUnit


def kstrongest_indices(values: np.ndarray, k: int, z_min: float) -> tuple[np.ndarray, np.ndarray]:
    """Per row, the ``k`` largest cells above ``z_min``; ties go to the lower bin.

    Works in any unit since only the ordering matters.
    """
    if k < 1:
        raise ValueError("K must be >= 1")
    values = np.asarray(values)
    az_out, bin_out = [], []
    above = values > z_min
    for a in np.flatnonzero(above.any(axis=1)):
        cand = np.flatnonzero(above[a])
        if len(cand) > k:
            # stable sort on the negated values keeps lower bins first among ties
            order = np.argsort(-values[a, cand], kind="stable")[:k]
            cand = np.sort(cand[order])
        az_out.append(np.full(len(cand), a, dtype=np.int64))
        bin_out.append(cand)
    if not az_out:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(az_out), np.concatenate(bin_out).astype(np.int64)


def extract_kstrongest(scan: PolarScan, k: int, z_min: float) -> PointCloud:
    scan.require(PowerUnit.DECIBEL)
    az, rb = kstrongest_indices(scan.values, k, z_min)
    return PointCloud.from_indices(az, rb, scan.values[az, rb], scan.geometry, scan.timestamp)


def c18_transform(values: np.ndarray, w_binom: float) -> np.ndarray:
    """Unbias each azimuth by its mean, then Gaussian-smooth along range."""
    v = np.asarray(values, dtype=np.float64)
    unbiased = v - v.mean(axis=1, keepdims=True)
    return gaussian_filter1d(unbiased, sigma=w_binom / 2.0, axis=1, mode="reflect", truncate=4.0)


def local_maxima(s: np.ndarray) -> np.ndarray:
    """Strictly above the left neighbour and not below the right one (one hit per plateau)."""
    left = np.empty_like(s, dtype=bool)
    right = np.empty_like(s, dtype=bool)
    left[:, 0] = True
    left[:, 1:] = s[:, 1:] > s[:, :-1]
    right[:, -1] = True
    right[:, :-1] = s[:, :-1] >= s[:, 1:]
    return left & right


def c18_mask(values: np.ndarray, w_binom: float, z_q: float) -> np.ndarray:
    s = c18_transform(values, w_binom)
    neg = s < 0
    n_neg = neg.sum(axis=1)
    sq = np.where(neg, s * s, 0.0).sum(axis=1)
    sigma = np.sqrt(np.divide(sq, n_neg, out=np.zeros_like(sq), where=n_neg > 0))
    thr = z_q * sigma
    # constant rows unbias to rounding noise, not signal
    varying = np.ptp(np.asarray(values), axis=1) > 0
    return local_maxima(s) & (s > thr[:, None]) & ((sigma > 0) & varying)[:, None]


def extract_c18(scan: PolarScan, w_binom: float, z_q: float) -> PointCloud:
    scan.require(PowerUnit.DECIBEL)
    az, rb = np.nonzero(c18_mask(scan.values, w_binom, z_q))
    return PointCloud.from_indices(az, rb, scan.values[az, rb], scan.geometry, scan.timestamp)
