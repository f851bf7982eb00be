"""Radar point-cloud extraction, synthetic scans, ICP odometry and evaluation."""

__version__ = "0.1.0"
