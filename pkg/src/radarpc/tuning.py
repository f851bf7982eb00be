"""Coarse-to-fine parameter sweeps scored by odometry drift on training sequences."""

from __future__ import annotations

import itertools
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence as Seq

import numpy as np

from .extractors import ConfigError, ExtractorConfig, format_config, make_config
from .extractors.config import _INT_FIELDS, config_class
from .formats import read_trajectory
from .metrics import SEGMENT_LENGTHS, kitti_errors, rows_to_csv, runtime_report
from .odometry import IcpConfig, run_odometry
from .synth import Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep and where.

    ``grids`` maps parameter names to coarse values; ``fixed`` pins other
    parameters for every combination. The fine stage, when enabled, revisits
    each swept parameter at ``coarse step / fine_divisor`` within one coarse
    step either side of the coarse incumbent.
    """

    extractor: str
    grids: dict[str, tuple]
    train: tuple[str, ...]
    test: tuple[str, ...] = ()
    fixed: dict[str, float] = field(default_factory=dict)
    fine: bool = True
    fine_divisor: int = 5
    lengths: tuple[float, ...] = SEGMENT_LENGTHS
    stride: int = 1

    def __post_init__(self):
        config_class(self.extractor)
        if not self.grids:
            raise ConfigError("sweep needs at least one parameter grid")
        for name, values in self.grids.items():
            if len(values) == 0:
                raise ConfigError(f"grid for {name!r} is empty")
            if name in self.fixed:
                raise ConfigError(f"{name!r} is both swept and fixed")
        if not self.train:
            raise ConfigError("sweep needs at least one training sequence")
        overlap = set(self.train) & set(self.test)
        if overlap:
            raise ConfigError(f"train and test sequences overlap: {sorted(overlap)}")
        if self.fine_divisor < 1:
            raise ConfigError("fine_divisor must be >= 1")
        if not self.lengths or min(self.lengths) <= 0:
            raise ConfigError("segment lengths must be positive")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        # every coarse combination must be a valid config before any work starts
        for combo in self.coarse_combos():
            self.config_for(combo)

    def coarse_combos(self) -> list[dict]:
        names = list(self.grids)
        return [dict(zip(names, vals)) for vals in itertools.product(*(self.grids[n] for n in names))]

    def config_for(self, combo: dict) -> ExtractorConfig:
        return make_config(self.extractor, **self.fixed, **combo)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        d = dict(d)
        fine = d.pop("fine", True)
        fine_divisor = d.pop("fine_divisor", 5)
        if isinstance(fine, dict):
            fine_divisor = fine.get("divisor", fine_divisor)
            fine = fine.get("enabled", True)
        known = {"extractor", "grid", "grids", "train", "test", "fixed", "lengths", "stride"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown sweep keys: {sorted(unknown)}")
        if "extractor" not in d:
            raise ConfigError("sweep spec needs an 'extractor'")
        grids = d.get("grid", d.get("grids", {}))
        grids = {k: tuple(v) if isinstance(v, (list, tuple)) else (v,) for k, v in grids.items()}
        return cls(
            extractor=str(d["extractor"]),
            grids=grids,
            train=tuple(d.get("train", ())),
            test=tuple(d.get("test", ())),
            fixed=dict(d.get("fixed", {})),
            fine=bool(fine),
            fine_divisor=int(fine_divisor),
            lengths=tuple(float(x) for x in d.get("lengths", SEGMENT_LENGTHS)),
            stride=int(d.get("stride", 1)),
        )


def load_sweep_spec(path) -> SweepSpec:
    """Read a sweep spec from a ``.toml`` or ``.json`` file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return SweepSpec.from_dict(data)


@dataclass
class SeqResult:
    ate_percent: float
    are_millideg_per_m: float
    runtime_ms: float
    points: float
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass
class SweepRow:
    stage: str
    params: dict
    config: str
    per_seq: dict[str, SeqResult]

    @property
    def failed(self) -> bool:
        return any(not r.ok for r in self.per_seq.values())

    def _mean(self, attr: str) -> float:
        if self.failed:
            return math.nan
        return float(np.mean([getattr(r, attr) for r in self.per_seq.values()]))

    @property
    def ate_percent(self) -> float:
        return self._mean("ate_percent")

    @property
    def are_millideg_per_m(self) -> float:
        return self._mean("are_millideg_per_m")

    @property
    def runtime_ms(self) -> float:
        return self._mean("runtime_ms")

    @property
    def points(self) -> float:
        return self._mean("points")

    def sort_key(self) -> tuple:
        return (self.ate_percent, self.are_millideg_per_m, self.runtime_ms)

    def as_flat(self) -> dict:
        row = {"stage": self.stage, "config": self.config}
        row.update(self.params)
        row.update(ate_percent=self.ate_percent, are_millideg_per_m=self.are_millideg_per_m,
                   runtime_ms=self.runtime_ms, points=self.points, failed=self.failed)
        for name, r in self.per_seq.items():
            row[f"{name}_ate_percent"] = r.ate_percent
            row[f"{name}_are_millideg_per_m"] = r.are_millideg_per_m
        return row


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow]
    incumbent: SweepRow | None

    @property
    def incumbent_config(self) -> ExtractorConfig:
        if self.incumbent is None:
            raise RuntimeError("every combination failed; no incumbent")
        return self.spec.config_for(self.incumbent.params)

    def to_csv(self, path=None) -> str:
        return rows_to_csv([r.as_flat() for r in self.rows], path)

    def to_json(self, path=None) -> str:
        doc = {
            "extractor": self.spec.extractor,
            "train": list(self.spec.train),
            "incumbent": None if self.incumbent is None else self.incumbent.params,
            "incumbent_config": None if self.incumbent is None else self.incumbent.config,
            "rows": [
                {"stage": r.stage, "params": r.params, "config": r.config, "failed": r.failed,
                 "per_seq": {k: asdict(v) for k, v in r.per_seq.items()}}
                for r in self.rows
            ],
        }
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def evaluate_sequence(cfg: ExtractorConfig, seq_dir, icp_cfg: IcpConfig = IcpConfig(),
                      lengths: Seq[float] = SEGMENT_LENGTHS, stride: int = 1) -> SeqResult:
    """Run odometry with ``cfg`` on one sequence and score it; failures are captured, not raised."""
    try:
        seq = Sequence.open(seq_dir)
        gt = read_trajectory(seq.gt_path)
        est, stats = run_odometry(seq.scan_paths, cfg, icp_cfg)
        rep = kitti_errors(gt, est, lengths, stride)
        rt = runtime_report(stats)
        if not rep.valid:
            return SeqResult(math.nan, math.nan, rt.mean_extract_ms, rt.mean_points,
                             "path shorter than the shortest segment length")
        return SeqResult(rep.ate_percent, rep.are_millideg_per_m, rt.mean_extract_ms, rt.mean_points)
    except Exception as exc:  # a failed combo is data, not a crash
        log.warning("%s on %s failed: %s", format_config(cfg), seq_dir, exc)
        return SeqResult(math.nan, math.nan, math.nan, math.nan, f"{type(exc).__name__}: {exc}")


def _shard(args) -> SeqResult:
    return evaluate_sequence(*args)


def _evaluate(spec: SweepSpec, combos: list[dict], dataset_dir: Path, icp_cfg: IcpConfig, stage: str,
              threads: int) -> list[SweepRow]:
    shards = [(spec.config_for(c), dataset_dir / s, icp_cfg, spec.lengths, spec.stride)
              for c in combos for s in spec.train]
    if threads > 1 and len(shards) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_shard, shards))
    else:
        results = [_shard(a) for a in shards]
    rows = []
    it = iter(results)
    for c in combos:
        per_seq = {s: next(it) for s in spec.train}
        rows.append(SweepRow(stage, dict(c), format_config(spec.config_for(c)), per_seq))
    return rows


def pick_incumbent(rows: Seq[SweepRow]) -> SweepRow | None:
    """Lowest mean ATE; ties go to lower ARE, then lower runtime. Failed rows never win."""
    ok = [r for r in rows if not r.failed]
    return min(ok, key=SweepRow.sort_key) if ok else None


def _side_values(v, lo_gap: float, hi_gap: float, divisor: int, integer: bool) -> list:
    vals = [v - lo_gap * k / divisor for k in range(divisor, 0, -1)] + [v]
    vals += [v + hi_gap * k / divisor for k in range(1, divisor + 1)]
    if integer:
        vals = [int(round(x)) for x in vals]
    return list(dict.fromkeys(vals))


def fine_values(coarse: Seq, incumbent, divisor: int, integer: bool = False) -> list:
    """Values within one coarse step of ``incumbent`` at ``step / divisor`` spacing.

    At the ends of the grid the neighbouring gap is mirrored outward.
    Single-value grids are not refined.
    """
    grid = sorted(set(coarse))
    if len(grid) < 2:
        return [incumbent]
    i = grid.index(incumbent)
    lo_gap = grid[i] - grid[i - 1] if i > 0 else grid[1] - grid[0]
    hi_gap = grid[i + 1] - grid[i] if i < len(grid) - 1 else grid[-1] - grid[-2]
    return _side_values(incumbent, lo_gap, hi_gap, divisor, integer)


def _fine_combos(spec: SweepSpec, incumbent: dict, seen: set) -> list[dict]:
    axes = []
    for name, coarse in spec.grids.items():
        numeric = all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in coarse)
        if not numeric:
            axes.append([incumbent[name]])
            continue
        axes.append(fine_values(coarse, incumbent[name], spec.fine_divisor, name in _INT_FIELDS))
    names = list(spec.grids)
    out = []
    for vals in itertools.product(*axes):
        combo = dict(zip(names, vals))
        key = tuple(sorted(combo.items()))
        if key in seen:
            continue
        try:
            spec.config_for(combo)
        except ConfigError:
            continue  # mirrored steps can leave the valid range
        seen.add(key)
        out.append(combo)
    return out


def _check_dataset(dataset_dir: Path, names: Seq[str]) -> None:
    for name in names:
        seq = dataset_dir / name
        if not (seq / "scans").is_dir():
            raise FileNotFoundError(f"sequence {name!r} not found under {dataset_dir}")
        if not (seq / "gt.csv").is_file():
            raise FileNotFoundError(f"sequence {name!r} has no ground truth")


def run_sweep(spec: SweepSpec, dataset_dir, icp_cfg: IcpConfig = IcpConfig(), threads: int = 1) -> SweepResult:
    """Coarse grid on the training sequences, then one fine pass around the best combo."""
    dataset_dir = Path(dataset_dir)
    _check_dataset(dataset_dir, spec.train)
    coarse = spec.coarse_combos()
    rows = _evaluate(spec, coarse, dataset_dir, icp_cfg, "coarse", threads)
    best = pick_incumbent(rows)
    if spec.fine and best is not None:
        seen = {tuple(sorted(c.items())) for c in coarse}
        fine = _fine_combos(spec, best.params, seen)
        rows += _evaluate(spec, fine, dataset_dir, icp_cfg, "fine", threads)
    return SweepResult(spec, rows, pick_incumbent(rows))


@dataclass
class EvaluationReport:
    config: str
    per_seq: dict[str, SeqResult]
    row: dict


def evaluate_on_test(cfg: ExtractorConfig, spec: SweepSpec, dataset_dir, icp_cfg: IcpConfig = IcpConfig(),
                     sequences: Seq[str] | None = None) -> EvaluationReport:
    """Score a fixed config on the test sequences (or ``sequences`` if given)."""
    names = list(spec.test if sequences is None else sequences)
    if not names:
        raise ValueError("no test sequences to evaluate")
    dataset_dir = Path(dataset_dir)
    _check_dataset(dataset_dir, names)
    per_seq = {n: evaluate_sequence(cfg, dataset_dir / n, icp_cfg, spec.lengths, spec.stride) for n in names}
    failed = [n for n, r in per_seq.items() if not r.ok]
    if failed:
        raise RuntimeError(f"evaluation failed on {failed}: {per_seq[failed[0]].error}")
    row = {"extractor": cfg.kind, "config": format_config(cfg)}
    row["ate_percent"] = float(np.mean([r.ate_percent for r in per_seq.values()]))
    row["are_millideg_per_m"] = float(np.mean([r.are_millideg_per_m for r in per_seq.values()]))
    for n, r in per_seq.items():
        row[f"{n}_ate_percent"] = r.ate_percent
        row[f"{n}_are_millideg_per_m"] = r.are_millideg_per_m
    row["runtime_ms"] = float(np.mean([r.runtime_ms for r in per_seq.values()]))
    row["points"] = float(np.mean([r.points for r in per_seq.values()]))
    return EvaluationReport(format_config(cfg), per_seq, row)


def write_incumbent(cfg: ExtractorConfig, path) -> None:
    """A config file that ``load_config`` (and ``--extractor``) accept as-is."""
    Path(path).write_text(format_config(cfg, include_defaults=True) + "\n", encoding="utf-8")


__all__ = [
    "SeqResult", "SweepResult", "SweepRow", "SweepSpec", "EvaluationReport", "evaluate_on_test",
    "evaluate_sequence", "fine_values", "load_sweep_spec", "pick_incumbent", "run_sweep", "write_incumbent",
]
