"""CFAR detectors on squared-Watt scans.

The ``clutter_*`` functions estimate the clutter power of one reference window and
are the readable definition of each variant. :func:`run_cfar` sweeps a whole scan
through the compiled kernel, which must agree with them cell for cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..scan import PointCloud, PolarScan, PowerUnit
from . import _cfar_kernel as _k
from .config import BFAR, CA, CAGO, CASO, IS, MSCA, OS, TM, VI, CfarWindow


def threshold_scale_from_pfa(p_fa: float, n: int) -> float:
    """Scale factor ``T`` for cell averaging on exponential clutter.

    >>> round(threshold_scale_from_pfa(0.01, 1), 9)
    99.0
    """
    if not 0 < p_fa <= 1:
        raise ValueError(f"P_fa must lie in (0, 1], got {p_fa}")
    if n < 1:
        raise ValueError(f"window size must be >= 1, got {n}")
    # expm1 keeps precision when P_fa is close to 1
    return n * math.expm1(-math.log(p_fa) / n)


def pfa_from_threshold_scale(T: float, n: int) -> float:
    return (1.0 + T / n) ** (-n)


@dataclass(frozen=True)
class HalfWindows:
    lead: np.ndarray
    lag: np.ndarray

    @property
    def cells(self) -> np.ndarray:
        return np.concatenate([self.lead, self.lag])

    @property
    def complete(self) -> bool:
        return len(self.lead) > 0 and len(self.lag) > 0


def gather_half_windows(row, cut_idx: int, window: CfarWindow) -> HalfWindows:
    row = np.asarray(row)
    n = len(row)
    if not 0 <= cut_idx < n:
        raise IndexError(f"cell under test {cut_idx} outside [0, {n})")
    h, g = window.half, window.guard
    lead = row[max(0, cut_idx - g - h):max(0, cut_idx - g)]
    lag = row[min(n, cut_idx + g + 1):min(n, cut_idx + g + h + 1)]
    return HalfWindows(lead, lag)


def _require_cells(hw: HalfWindows) -> None:
    if len(hw.lead) + len(hw.lag) == 0:
        raise ValueError("reference window is empty")


def _require_halves(hw: HalfWindows) -> None:
    if not hw.complete:
        raise ValueError("both half-windows must be non-empty")


def clutter_ca(hw: HalfWindows) -> float:
    _require_cells(hw)
    return float(np.mean(hw.cells))


def clutter_cago(hw: HalfWindows) -> float:
    _require_halves(hw)
    return float(max(np.mean(hw.lead), np.mean(hw.lag)))


def clutter_caso(hw: HalfWindows) -> float:
    _require_halves(hw)
    return float(min(np.mean(hw.lead), np.mean(hw.lag)))


def clutter_is(hw: HalfWindows, cut_value: float, alpha: float, max_interferers: int) -> float:
    """Switching estimate: cells above ``alpha * cut_value`` count as interferers."""
    _require_halves(hw)
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    thr = alpha * cut_value
    bad_lead = hw.lead > thr
    bad_lag = hw.lag > thr
    lead_violates = bad_lead.sum() > max_interferers
    lag_violates = bad_lag.sum() > max_interferers
    if lead_violates and lag_violates:
        return clutter_ca(hw)
    if lead_violates:
        return float(np.mean(hw.lead))
    if lag_violates:
        return float(np.mean(hw.lag))
    kept = np.concatenate([hw.lead[~bad_lead], hw.lag[~bad_lag]])
    if len(kept) == 0:
        return clutter_ca(hw)
    return float(np.mean(kept))


def variability_index(cells) -> float:
    x = np.asarray(cells, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("variability index of an empty window")
    s = x.sum()
    if s == 0:
        raise ValueError("variability index undefined for all-zero cells")
    return float(len(x) * np.sum(x * x) / (s * s))


def clutter_vi(hw: HalfWindows, V: float, R: float) -> float:
    _require_halves(hw)
    hom_lead = variability_index(hw.lead) <= V
    hom_lag = variability_index(hw.lag) <= V
    m_lead, m_lag = float(np.mean(hw.lead)), float(np.mean(hw.lag))
    similar = m_lag > 0 and 1.0 / R < m_lead / m_lag < R
    if hom_lead and hom_lag:
        return clutter_ca(hw) if similar else max(m_lead, m_lag)
    if hom_lead:
        return m_lead
    if hom_lag:
        return m_lag
    return min(m_lead, m_lag)


def clutter_os(hw: HalfWindows, quantile: float = 0.5) -> float:
    """Order statistic at ``floor(quantile * (n - 1))``; the lower median at 0.5."""
    _require_cells(hw)
    cells = np.sort(hw.cells)
    return float(cells[int(math.floor(quantile * (len(cells) - 1)))])


def clutter_tm(hw: HalfWindows, n_trim: int) -> float:
    cells = np.sort(hw.cells)
    if not 0 <= 2 * n_trim < len(cells):
        raise ValueError(f"cannot trim {n_trim} cells from each end of {len(cells)}")
    return float(np.mean(cells[n_trim:len(cells) - n_trim]))


def clutter_msca(hw: HalfWindows, m: int) -> float:
    """Slide an ``m``-cell sub-window over lead+lag and average the smaller edge cell."""
    u = hw.cells
    if m < 2:
        raise ValueError("sub-window size must be >= 2")
    if len(u) < m:
        raise ValueError(f"reference window of {len(u)} cells is shorter than M={m}")
    return float(np.mean(np.minimum(u[: len(u) - m + 1], u[m - 1:])))


_KIND_CODES = {CA: _k.CA, CAGO: _k.CAGO, CASO: _k.CASO, IS: _k.IS, VI: _k.VI,
               OS: _k.OS, TM: _k.TM, MSCA: _k.MSCA, BFAR: _k.BFAR}


def _kernel_args(cfg) -> tuple[int, float, float, float]:
    p1 = p2 = 0.0
    b_eff = 0.0
    if isinstance(cfg, IS):
        p1, p2 = cfg.alpha, cfg.I
    elif isinstance(cfg, VI):
        p1, p2 = cfg.V, cfg.R
    elif isinstance(cfg, OS):
        p1 = cfg.q
    elif isinstance(cfg, TM):
        p1 = cfg.N_T
    elif isinstance(cfg, MSCA):
        p1 = cfg.M
    elif isinstance(cfg, BFAR):
        b_eff = cfg.b_eff
    return _KIND_CODES[type(cfg)], float(p1), float(p2), float(b_eff)


def cfar_mask(values: np.ndarray, cfg, window: CfarWindow | None = None) -> np.ndarray:
    """Detection grid for a raw squared-Watt array (no unit checks)."""
    if type(cfg) not in _KIND_CODES:
        raise TypeError(f"{type(cfg).__name__} is not a CFAR configuration")
    window = window or cfg.window
    kind, p1, p2, b_eff = _kernel_args(cfg)
    grid = np.ascontiguousarray(values, dtype=np.float64)
    if grid.ndim == 1:
        grid = grid[None, :]
    return _k.cfar_grid(grid, kind, float(cfg.T), p1, p2, b_eff, window.half, window.guard)


def run_cfar(scan: PolarScan, cfg, window: CfarWindow | None = None) -> PointCloud:
    scan.require(PowerUnit.WATT_SQUARED)
    mask = cfar_mask(scan.values, cfg, window)
    az, rb = np.nonzero(mask)
    # W^2 back to dB: 10*log10(sqrt(p)) = 5*log10(p)
    with np.errstate(divide="ignore"):
        intensity = 5.0 * np.log10(scan.values[az, rb])
    return PointCloud.from_indices(az, rb, intensity, scan.geometry, scan.timestamp)
