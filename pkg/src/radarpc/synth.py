"""Seeded synthetic radar worlds, trajectories, scans with ground-truth labels, and sequences.

Clutter power per bin is exponential (gamma-shaped when ``noise_scale != 1``) around
the preset noise floor plus any clutter-region gain. Landmarks add a Gaussian range
profile whose amplitude fluctuates exponentially from scan to scan. Scans are
quantised to the 8-bit half-dB encoding before anyone sees them.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from matplotlib.path import Path as MplPath

from .formats import write_mask, write_scan, write_trajectory
from .scan import DB_MAX, PolarScan, ScanGeometry, decode_raw
from .se2 import Pose2, Trajectory, wrap_angle


@dataclass(frozen=True)
class Landmark:
    x: float
    y: float
    reflectivity: float  # dB above the noise floor
    extent: float  # range-profile sigma, m

    def __post_init__(self):
        if not self.extent > 0:
            raise ValueError("landmark extent must be > 0")
        if not self.reflectivity > 0:
            raise ValueError("landmark reflectivity must be > 0")


@dataclass(frozen=True)
class ClutterRegion:
    polygon: tuple[tuple[float, float], ...]
    clutter_gain: float  # dB


@dataclass(frozen=True)
class ClutterSpec:
    n_regions: int = 0
    size: tuple[float, float] = (10.0, 40.0)
    gain_db: tuple[float, float] = (3.0, 10.0)


@dataclass(frozen=True)
class World:
    landmarks: tuple[Landmark, ...] = ()
    clutter_regions: tuple[ClutterRegion, ...] = ()

    def to_dict(self) -> dict:
        return {
            "landmarks": [asdict(lm) for lm in self.landmarks],
            "clutter_regions": [
                {"polygon": [list(p) for p in r.polygon], "clutter_gain": r.clutter_gain}
                for r in self.clutter_regions
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "World":
        return cls(
            tuple(Landmark(**lm) for lm in d.get("landmarks", [])),
            tuple(ClutterRegion(tuple(tuple(p) for p in r["polygon"]), r["clutter_gain"])
                  for r in d.get("clutter_regions", [])),
        )


@dataclass(frozen=True)
class SensorPreset:
    name: str
    range_resolution: float
    noise_floor_db: float
    noise_scale: float = 1.0  # clutter gamma scale: 1 means exponential
    num_azimuths: int = 400
    rotation_rate: float = 4.0
    max_range: float = 80.0
    beam_width_deg: float = 0.0  # 0: each landmark lands on its nearest azimuth only

    def __post_init__(self):
        if not (self.range_resolution > 0 and self.rotation_rate > 0 and self.max_range > 0):
            raise ValueError("preset resolutions, rates and ranges must be positive")
        if not self.noise_scale > 0:
            raise ValueError("noise_scale must be > 0")

    @property
    def num_bins(self) -> int:
        return int(round(self.max_range / self.range_resolution))

    def geometry(self) -> ScanGeometry:
        return ScanGeometry(self.num_azimuths, self.num_bins, self.range_resolution, 0.0, self.rotation_rate)

    def replace(self, **changes) -> "SensorPreset":
        return SensorPreset(**{**asdict(self), **changes})


PRESETS = {
    "F1": SensorPreset("F1", range_resolution=0.0596, noise_floor_db=20.0),
    "F2": SensorPreset("F2", range_resolution=0.0438, noise_floor_db=35.0),
}


def get_preset(name: str) -> SensorPreset:
    try:
        return PRESETS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


def make_world(seed: int, extent_m, n_landmarks: int, clutter_spec: ClutterSpec | None = None,
               reflectivity_db: tuple[float, float] = (15.0, 35.0),
               landmark_extent_m: tuple[float, float] = (0.1, 0.5)) -> World:
    """Landmarks uniform over ``extent_m``: a side length (square centred on the
    origin) or ``(xmin, xmax, ymin, ymax)``."""
    if n_landmarks < 0:
        raise ValueError("n_landmarks must be >= 0")
    if np.isscalar(extent_m):
        h = float(extent_m) / 2.0
        bounds = (-h, h, -h, h)
    else:
        bounds = tuple(float(b) for b in extent_m)
    xmin, xmax, ymin, ymax = bounds
    rng = np.random.default_rng(seed)
    xs = rng.uniform(xmin, xmax, n_landmarks)
    ys = rng.uniform(ymin, ymax, n_landmarks)
    refl = rng.uniform(*reflectivity_db, n_landmarks)
    ext = rng.uniform(*landmark_extent_m, n_landmarks)
    landmarks = tuple(Landmark(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(xs, ys, refl, ext))

    regions = []
    spec = clutter_spec or ClutterSpec()
    for _ in range(spec.n_regions):
        cx, cy = rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)
        w, h = rng.uniform(*spec.size, 2)
        ang = rng.uniform(0, np.pi)
        c, s = math.cos(ang), math.sin(ang)
        corners = [(-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)]
        poly = tuple((float(cx + c * u - s * v), float(cy + s * u + c * v)) for u, v in corners)
        regions.append(ClutterRegion(poly, float(rng.uniform(*spec.gain_db))))
    return World(landmarks, tuple(regions))


def _clutter_mean_watts(world: World, pose: Pose2, geometry: ScanGeometry, floor_db: float) -> np.ndarray:
    mean = np.full(geometry.shape, 10.0 ** (floor_db / 10.0))
    if not world.clutter_regions:
        return mean
    ang = geometry.azimuth_angles()[:, None] + pose.theta
    rng_ = geometry.bin_ranges()[None, :]
    wx = (pose.x + rng_ * np.cos(ang)).ravel()
    wy = (pose.y + rng_ * np.sin(ang)).ravel()
    flat = mean.ravel()
    for region in world.clutter_regions:
        poly = np.asarray(region.polygon)
        lo, hi = poly.min(axis=0), poly.max(axis=0)
        cand = np.flatnonzero((wx >= lo[0]) & (wx <= hi[0]) & (wy >= lo[1]) & (wy <= hi[1]))
        if len(cand) == 0:
            continue
        inside = MplPath(poly).contains_points(np.column_stack([wx[cand], wy[cand]]))
        flat[cand[inside]] = 10.0 ** ((floor_db + region.clutter_gain) / 10.0)
    return flat.reshape(geometry.shape)


def landmark_power(world: World, pose: Pose2, preset: SensorPreset, amplitudes: np.ndarray) -> np.ndarray:
    """Noise-free landmark contribution in Watts for given per-landmark amplitudes."""
    geometry = preset.geometry()
    n_az, n_bins = geometry.shape
    out = np.zeros(geometry.shape)
    if not world.landmarks:
        return out
    res = geometry.range_resolution
    dtheta = 2.0 * np.pi / n_az
    beam_sigma = math.radians(preset.beam_width_deg) / 2.3548 if preset.beam_width_deg > 0 else 0.0
    inv = pose.inverse()
    for lm, amp in zip(world.landmarks, amplitudes):
        lx, ly = inv.apply([[lm.x, lm.y]])[0]
        rho = math.hypot(lx, ly)
        if rho - 4 * lm.extent > geometry.max_range:
            continue
        phi = math.atan2(ly, lx) - geometry.azimuth_0_angle
        b_lo = max(0, int(math.floor((rho - 4 * lm.extent) / res)))
        b_hi = min(n_bins, int(math.ceil((rho + 4 * lm.extent) / res)) + 1)
        if b_hi <= b_lo:
            continue
        r = (np.arange(b_lo, b_hi) + 0.5) * res
        profile = amp * np.exp(-0.5 * ((r - rho) / lm.extent) ** 2)
        centre = int(round(phi / dtheta))
        if beam_sigma == 0.0:
            out[centre % n_az, b_lo:b_hi] += profile
            continue
        span = int(math.ceil(3 * beam_sigma / dtheta))
        for off in range(-span, span + 1):
            a = centre + off
            dphi = wrap_angle(a * dtheta - phi)
            out[a % n_az, b_lo:b_hi] += profile * math.exp(-0.5 * (dphi / beam_sigma) ** 2)
    return out


def render_scan(world: World, pose: Pose2, preset: SensorPreset, seed: int,
                timestamp: float = 0.0) -> tuple[PolarScan, np.ndarray]:
    """One Decibel scan seen from ``pose`` and its landmark-dominance labels."""
    geometry = preset.geometry()
    rng = np.random.default_rng(seed)
    clutter_mean = _clutter_mean_watts(world, pose, geometry, preset.noise_floor_db)
    if preset.noise_scale == 1.0:
        fluct = rng.exponential(1.0, geometry.shape)
    else:
        fluct = rng.gamma(1.0 / preset.noise_scale, preset.noise_scale, geometry.shape)
    clutter = clutter_mean * fluct
    means = np.array([10.0 ** ((preset.noise_floor_db + lm.reflectivity) / 10.0) for lm in world.landmarks])
    amps = rng.exponential(1.0, len(world.landmarks)) * means
    targets = landmark_power(world, pose, preset, amps)
    labels = targets > clutter
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(clutter + targets)
    levels = np.rint(np.clip(db, 0.0, DB_MAX) * 2.0).astype(np.uint8)
    return decode_raw(levels, geometry, timestamp), labels


def make_trajectory(shape: str, length_m: float, rotation_rate: float = 4.0, speed: float = 10.0,
                    curvature: float = 1.0 / 200.0) -> Trajectory:
    """Constant-speed path sampled once per rotation, starting at the origin heading +x.

    ``figure8`` is two tangent circles traced once, so it closes on itself.
    """
    if not length_m > 0:
        raise ValueError("length_m must be > 0")
    if shape not in ("line", "arc", "figure8"):
        raise ValueError(f"unknown trajectory shape {shape!r}")
    step = speed / rotation_rate
    n_steps = int(math.ceil(length_m / step - 1e-9))
    while True:
        s = np.arange(n_steps + 1) * step
        poses = _path_poses(shape, s, length_m, curvature)
        traj = Trajectory(s / speed, poses)
        # chords on curved paths are a hair shorter than the arc
        if traj.path_lengths()[-1] >= length_m - 1e-9:
            return traj
        n_steps += 1


def _path_poses(shape: str, s: np.ndarray, length_m: float, curvature: float) -> np.ndarray:
    if shape == "line" or (shape == "arc" and curvature == 0.0):
        return np.column_stack([s, np.zeros_like(s), np.zeros_like(s)])
    if shape == "arc":
        k = curvature
        return np.column_stack([np.sin(k * s) / k, (1 - np.cos(k * s)) / k, k * s])
    radius = length_m / (4.0 * np.pi)
    half = 2.0 * np.pi * radius
    poses = np.empty((len(s), 3))
    for i, si in enumerate(s):
        si = si % length_m
        if si < half:
            # counter-clockwise loop centred at (0, R)
            phi = si / radius
            poses[i] = (radius * math.sin(phi), radius * (1 - math.cos(phi)), phi)
        else:
            # clockwise loop centred at (0, -R)
            phi = (si - half) / radius
            poses[i] = (radius * math.sin(phi), -radius * (1 - math.cos(phi)), -phi)
    return poses


def scan_seed(seed: int, index: int) -> int:
    return int(seed) ^ int(index)


def generate_sequence(world: World, trajectory: Trajectory, preset: SensorPreset, seed: int, out_dir,
                      extra_manifest: dict | None = None) -> Path:
    out = Path(out_dir)
    (out / "scans").mkdir(parents=True, exist_ok=True)
    (out / "labels").mkdir(parents=True, exist_ok=True)
    for i, (ts, pose) in enumerate(zip(trajectory.timestamps, trajectory)):
        scan, labels = render_scan(world, pose, preset, scan_seed(seed, i), float(ts))
        write_scan(scan, out / "scans" / f"{i:06d}.rscn")
        write_mask(labels, out / "labels" / f"{i:06d}.mask")
    write_trajectory(trajectory, out / "gt.csv")
    (out / "world.json").write_text(json.dumps(world.to_dict(), sort_keys=True) + "\n", encoding="utf-8")
    manifest = {
        "preset": asdict(preset),
        "seed": int(seed),
        "num_scans": len(trajectory),
        "num_landmarks": len(world.landmarks),
        "num_clutter_regions": len(world.clutter_regions),
        "num_azimuths": preset.num_azimuths,
        "num_bins": preset.num_bins,
        "path_length_m": float(trajectory.path_lengths()[-1]) if len(trajectory) else 0.0,
    }
    manifest.update(extra_manifest or {})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


@dataclass
class Sequence:
    """Read-side view of a generated sequence directory."""

    root: Path
    scan_paths: list[Path] = field(default_factory=list)
    label_paths: list[Path] = field(default_factory=list)

    @classmethod
    def open(cls, root) -> "Sequence":
        root = Path(root)
        if not (root / "scans").is_dir():
            raise FileNotFoundError(f"{root} has no scans/ directory")
        scans = sorted((root / "scans").glob("*.rscn"))
        labels = sorted((root / "labels").glob("*.mask")) if (root / "labels").is_dir() else []
        return cls(root, scans, labels)

    @property
    def gt_path(self) -> Path:
        return self.root / "gt.csv"

    @property
    def has_ground_truth(self) -> bool:
        return self.gt_path.is_file()
