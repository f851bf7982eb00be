"""The 13 point-cloud extractors behind one ``extract(scan, cfg)`` call."""

from __future__ import annotations

import time

from ..scan import PointCloud, PolarScan, as_decibel, to_watt_squared
from .cfar import (
    HalfWindows, clutter_ca, clutter_cago, clutter_caso, clutter_is, clutter_msca, clutter_os,
    clutter_tm, clutter_vi, cfar_mask, gather_half_windows, run_cfar, threshold_scale_from_pfa,
    variability_index,
)
from .config import (
    BFAR, C18, C19, CA, CAGO, CASO, CFAR_KINDS, CFEAR, IS, KINDS, MSCA, OS, PRESETS, TM, VI,
    CfarWindow, ConfigError, ExtractorConfig, KStrongest, format_config, load_config,
    load_config_list, make_config, parse_config,
)
from .signal import extract_c18, extract_kstrongest
from .spatial import extract_c19, extract_cfear, prewitt_gradient


def prepare(scan: PolarScan, cfg: ExtractorConfig) -> PolarScan:
    """Convert a raw/dB scan to the unit the extractor works in."""
    if cfg.is_cfar:
        return to_watt_squared(scan)
    return as_decibel(scan)


def extract_prepared(scan: PolarScan, cfg: ExtractorConfig) -> PointCloud:
    if cfg.is_cfar:
        return run_cfar(scan, cfg)
    if isinstance(cfg, KStrongest):
        return extract_kstrongest(scan, cfg.K, cfg.z_min)
    if isinstance(cfg, C18):
        return extract_c18(scan, cfg.w_binom, cfg.z_q)
    if isinstance(cfg, C19):
        return extract_c19(scan, cfg.l_max, cfg.region_drop)
    if isinstance(cfg, CFEAR):
        return extract_cfear(scan, cfg.k, cfg.z_min, cfg.r, cfg.grid, cfg.p_min)
    raise TypeError(f"unsupported extractor config {cfg!r}")


def extract(scan: PolarScan, cfg: ExtractorConfig) -> PointCloud:
    return extract_prepared(prepare(scan, cfg), cfg)


def extract_timed(scan: PolarScan, cfg: ExtractorConfig) -> tuple[PointCloud, float]:
    """Extract and return the wall time in ms, unit conversion included."""
    t0 = time.perf_counter()
    cloud = extract(scan, cfg)
    return cloud, (time.perf_counter() - t0) * 1e3


__all__ = [
    "BFAR", "C18", "C19", "CA", "CAGO", "CASO", "CFAR_KINDS", "CFEAR", "IS", "KINDS", "MSCA", "OS",
    "PRESETS", "TM", "VI", "CfarWindow", "ConfigError", "ExtractorConfig", "HalfWindows", "KStrongest",
    "cfar_mask", "clutter_ca", "clutter_cago", "clutter_caso", "clutter_is", "clutter_msca",
    "clutter_os", "clutter_tm", "clutter_vi", "extract", "extract_c18", "extract_c19",
    "extract_cfear", "extract_kstrongest", "extract_prepared", "extract_timed", "format_config",
    "gather_half_windows", "load_config", "load_config_list", "make_config", "parse_config",
    "prepare", "prewitt_gradient", "run_cfar", "threshold_scale_from_pfa", "variability_index",
]
