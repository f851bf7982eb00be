"""Frame-to-submap odometry: extract, predict with constant velocity, refine with ICP."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from ..extractors import ExtractorConfig, extract_timed
from ..formats import read_scan
from ..scan import PointCloud
from ..se2 import Pose2, Trajectory
from .icp import IcpConfig, IcpFailure, Submap, icp_align

log = logging.getLogger(__name__)

FLAG_OK = "ok"
FLAG_ICP_FAILED = "icp_failed"
FLAG_EMPTY = "empty_cloud"


@dataclass
class FrameStats:
    frame: int
    extract_ms: float
    n_points: int
    icp_iters: int
    icp_rms: float
    flag: str


def predict_constant_velocity(poses: Sequence[Pose2]) -> Pose2:
    if not poses:
        return Pose2.identity()
    if len(poses) == 1:
        return poses[-1]
    prev, last = poses[-2], poses[-1]
    return last @ (prev.inverse() @ last)


def _odometry(pairs: Iterable[tuple[PointCloud, float]], icp_cfg: IcpConfig) -> tuple[Trajectory, list[FrameStats]]:
    submap = Submap(icp_cfg.submap_size, icp_cfg.max_correspondence_dist)
    poses: list[Pose2] = []
    stamps: list[float] = []
    stats: list[FrameStats] = []
    for k, (cloud, ms) in enumerate(pairs):
        xy = cloud.xy
        pred = predict_constant_velocity(poses)
        iters, rms, flag = 0, float("nan"), FLAG_OK
        if len(xy) == 0:
            pose, flag = pred, FLAG_EMPTY
        elif k == 0:
            pose = Pose2.identity()
        elif len(submap) == 0:
            pose, flag = pred, FLAG_EMPTY
        else:
            try:
                pose, st = icp_align(xy, submap, pred, icp_cfg)
                iters, rms = st.iterations, st.rms_residual
            except IcpFailure as exc:
                log.debug("frame %d: %s", k, exc)
                pose, iters, flag = pred, exc.iterations, FLAG_ICP_FAILED
        poses.append(pose)
        stamps.append(cloud.source_timestamp)
        if len(xy):
            submap.add(pose.apply(xy), cloud.source_timestamp)
        stats.append(FrameStats(k, float(ms), len(xy), iters, rms, flag))
    if len(poses) < 2:
        raise ValueError("odometry needs at least two frames")
    return Trajectory.from_poses(stamps, poses), stats


def run_odometry_clouds(clouds: Iterable[PointCloud],
                        icp_cfg: IcpConfig = IcpConfig()) -> tuple[Trajectory, list[FrameStats]]:
    """Odometry over ready-made sensor-frame clouds. Frame 0 defines the origin.

    Frames whose cloud is empty, or where ICP finds no correspondences, keep
    the constant-velocity prediction and are flagged in the stats.
    """
    return _odometry(((c, 0.0) for c in clouds), icp_cfg)


def run_odometry(scan_paths: Sequence, extractor_cfg: ExtractorConfig, icp_cfg: IcpConfig = IcpConfig(),
                 on_cloud: Callable[[int, PointCloud], None] | None = None) -> tuple[Trajectory, list[FrameStats]]:
    """Read scans in order, extract a cloud from each and chain the ICP poses."""
    if len(scan_paths) < 2:
        raise ValueError("odometry needs at least two scans")

    def pairs():
        for i, path in enumerate(scan_paths):
            scan = read_scan(path)
            cloud, ms = extract_timed(scan, extractor_cfg)
            if on_cloud is not None:
                on_cloud(i, cloud)
            yield cloud, ms

    return _odometry(pairs(), icp_cfg)
