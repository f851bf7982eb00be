"""Scan-to-submap radar odometry."""

from .icp import IcpConfig, IcpFailure, IcpStats, Submap, icp_align, solve_rigid_2d
from .nn import GridIndex, brute_force_nearest
from .pipeline import (
    FLAG_EMPTY, FLAG_ICP_FAILED, FLAG_OK, FrameStats, predict_constant_velocity, run_odometry,
    run_odometry_clouds,
)

__all__ = [
    "FLAG_EMPTY", "FLAG_ICP_FAILED", "FLAG_OK", "FrameStats", "GridIndex", "IcpConfig", "IcpFailure",
    "IcpStats", "Submap", "brute_force_nearest", "icp_align", "predict_constant_velocity",
    "run_odometry", "run_odometry_clouds", "solve_rigid_2d",
]
