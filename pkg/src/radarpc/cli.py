"""Command-line entry point: ``radarpc <command> ...``.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .extractors import ConfigError, extract_timed, format_config, load_config, load_config_list
from .formats import read_mask, read_scan, read_trajectory, write_cloud, write_frame_stats, write_trajectory
from .metrics import (
    SEGMENT_LENGTHS, DetectionReport, detection_metrics, kitti_errors, report_to_json, rows_to_csv,
    runtime_report, table_row,
)
from .odometry import IcpConfig, run_odometry
from .synth import PRESETS as SENSOR_PRESETS
from .synth import ClutterSpec, Sequence, generate_sequence, get_preset, make_trajectory, make_world

log = logging.getLogger("radarpc")


class UsageError(Exception):
    """Bad flags or inputs, detected before any work is done."""


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
        return v
    return conv


def _lengths(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated lengths, got {text!r}") from None
    if not vals or min(vals) <= 0:
        raise argparse.ArgumentTypeError("segment lengths must be positive")
    return vals


def _add_icp_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("ICP")
    g.add_argument("--max-iterations", type=_positive(int), default=IcpConfig.max_iterations)
    g.add_argument("--max-corr", type=_positive(float), default=IcpConfig.max_correspondence_dist,
                   help="max correspondence distance in m (default %(default)s)")
    g.add_argument("--trim", type=float, default=IcpConfig.trim_fraction,
                   help="fraction of worst matches dropped (default %(default)s)")
    g.add_argument("--eps", type=_positive(float), default=IcpConfig.convergence_eps,
                   help="convergence threshold on the pose update (default %(default)s)")
    g.add_argument("--submap", type=_positive(int), default=IcpConfig.submap_size,
                   help="clouds kept in the submap (default %(default)s)")


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lengths", type=_lengths, default=SEGMENT_LENGTHS,
                   help="segment lengths in m, comma-separated (default 100,...,800)")
    p.add_argument("--stride", type=_positive(int), default=1, help="start-frame stride (default every frame)")


def _icp_cfg(args) -> IcpConfig:
    try:
        return IcpConfig(args.max_iterations, args.max_corr, args.trim, args.eps, args.submap)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _threads(args) -> int:
    return args.threads if args.threads else (os.cpu_count() or 1)


def _open_sequence(path) -> Sequence:
    try:
        return Sequence.open(path)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None


def _sequence_dirs(path: Path) -> list[Path]:
    """A sequence directory itself, or every sequence directly below a dataset directory."""
    if (path / "scans").is_dir():
        return [path]
    seqs = sorted(p for p in path.iterdir() if (p / "scans").is_dir()) if path.is_dir() else []
    if not seqs:
        raise UsageError(f"{path}: no sequences found")
    return seqs


# ---- synth ----

def cmd_synth(args) -> int:
    preset = get_preset(args.preset)
    changes = {}
    if args.max_range is not None:
        changes["max_range"] = args.max_range
    if args.beam_width is not None:
        changes["beam_width_deg"] = args.beam_width
    if changes:
        preset = preset.replace(**changes)
    traj = make_trajectory(args.shape, args.length, preset.rotation_rate, args.speed, args.curvature)
    if args.extent is not None:
        extent = args.extent
    else:
        pad = preset.max_range
        lo = traj.poses[:, :2].min(axis=0) - pad
        hi = traj.poses[:, :2].max(axis=0) + pad
        extent = (lo[0], hi[0], lo[1], hi[1])
    world = make_world(args.seed, extent, args.landmarks, ClutterSpec(n_regions=args.clutter_regions))
    out = generate_sequence(world, traj, preset, args.seed, args.out,
                            extra_manifest={"shape": args.shape, "length_m": args.length})
    print(f"wrote {len(traj)} scans ({traj.path_lengths()[-1]:.1f} m, preset {preset.name}) to {out}")
    return 0


# ---- extract ----

def cmd_extract(args) -> int:
    cfg = load_config(args.extractor)
    if args.scan:
        if not Path(args.scan).is_file():
            raise UsageError(f"scan file not found: {args.scan}")
        paths = [Path(args.scan)]
    else:
        paths = _open_sequence(args.dataset).scan_paths
    out = Path(args.out)
    if args.dataset:
        out.mkdir(parents=True, exist_ok=True)
    elif out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    for p in paths:
        cloud, ms = extract_timed(read_scan(p), cfg)
        target = out / (p.stem + ".csv") if args.dataset else out
        write_cloud(cloud, target)
        if args.timing:
            print(f"{p.name}\t{ms:.3f} ms\t{len(cloud)} points")
    return 0


# ---- odom ----

def cmd_odom(args) -> int:
    cfg = load_config(args.extractor)
    icp = _icp_cfg(args)
    seq = _open_sequence(args.dataset)
    if len(seq.scan_paths) < 2:
        raise UsageError("odometry needs at least two scans")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    est, stats = run_odometry(seq.scan_paths, cfg, icp)
    write_trajectory(est, out / "trajectory.csv")
    write_frame_stats(stats, out / "stats.csv")
    gt = read_trajectory(seq.gt_path) if seq.has_ground_truth else None
    if not args.no_plots:
        from .report import plot_trajectory
        plot_trajectory(gt, est, out / "trajectory.png")
    rt = runtime_report(stats)
    flagged = sum(s.flag != "ok" for s in stats)
    print(f"{len(est)} poses, {rt.mean_extract_ms:.2f} ms/frame, {rt.mean_points:.0f} points/frame, "
          f"{flagged} flagged frames -> {out}")
    return 0


# ---- eval-odom ----

def cmd_eval_odom(args) -> int:
    gt_path = Path(args.gt) if args.gt else Path(args.dataset) / "gt.csv"
    if not gt_path.is_file():
        raise UsageError(f"ground truth not found: {gt_path}")
    if not Path(args.est).is_file():
        raise UsageError(f"estimate not found: {args.est}")
    gt = read_trajectory(gt_path)
    est = read_trajectory(args.est)
    rep = kitti_errors(gt, est, args.lengths, args.stride)
    text = report_to_json(rep)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        if not args.no_plots:
            from .report import plot_trajectory
            plot_trajectory(gt, est, out.with_suffix(".png"))
    if not rep.valid:
        print("path too short for the shortest segment length; no error samples", file=sys.stderr)
    print(f"ATE {rep.ate_percent:.4f} %  ARE {rep.are_millideg_per_m:.4f} 1e-3 deg/m  ({rep.samples} samples)")
    return 0


# ---- eval-detect ----

def sum_detection(reports) -> DetectionReport:
    tp = sum(r.tp for r in reports)
    fn = sum(r.fn for r in reports)
    fp = sum(r.fp for r in reports)
    tn = sum(r.tn for r in reports)
    pd = tp / (tp + fn) if tp + fn else 0.0
    pfa = fp / (fp + tn) if fp + tn else 0.0
    return DetectionReport(pd, pfa, tp, fn, fp, tn)


def evaluate_detection(seq: Sequence, cfg, dilation: int) -> DetectionReport:
    reps = []
    for sp, lp in zip(seq.scan_paths, seq.label_paths):
        scan = read_scan(sp)
        cloud, _ = extract_timed(scan, cfg)
        reps.append(detection_metrics(cloud, read_mask(lp, scan.geometry.shape), dilation))
    return sum_detection(reps)


def cmd_eval_detect(args) -> int:
    cfg = load_config(args.extractor)
    if args.dilation < 0:
        raise UsageError("--dilation must be >= 0")
    seq = _open_sequence(args.dataset)
    if not seq.label_paths or len(seq.label_paths) != len(seq.scan_paths):
        raise UsageError(f"{args.dataset}: labels missing or incomplete")
    rep = evaluate_detection(seq, cfg, args.dilation)
    text = report_to_json(rep)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    print(f"Pd {rep.pd:.6f}  Pfa {rep.pfa:.3e}  (TP {rep.tp}, FN {rep.fn}, FP {rep.fp}, TN {rep.tn})")
    return 0


# ---- sweep ----

def cmd_sweep(args) -> int:
    from .tuning import evaluate_on_test, load_sweep_spec, run_sweep, write_incumbent

    if not Path(args.spec).is_file():
        raise UsageError(f"sweep spec not found: {args.spec}")
    spec = load_sweep_spec(args.spec)
    icp = _icp_cfg(args)
    if not Path(args.dataset).is_dir():
        raise UsageError(f"dataset directory not found: {args.dataset}")
    for name in (*spec.train, *spec.test):
        d = Path(args.dataset) / name
        if not (d / "scans").is_dir() or not (d / "gt.csv").is_file():
            raise UsageError(f"sequence {name!r} missing or without ground truth under {args.dataset}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_sweep(spec, args.dataset, icp, _threads(args))
    result.to_csv(out / "sweep.csv")
    result.to_json(out / "sweep.json")
    flat = [r.as_flat() for r in result.rows]
    from .report import format_table, plot_sweep
    cols = ["stage", *spec.grids, "ate_percent", "are_millideg_per_m", "runtime_ms", "points"]
    print(format_table(flat, cols), end="")
    if not args.no_plots:
        plot_sweep(flat, next(iter(spec.grids)), out / "sweep.png")
    if result.incumbent is None:
        print("every combination failed", file=sys.stderr)
        return 1
    write_incumbent(result.incumbent_config, out / "incumbent.cfg")
    print(f"incumbent: {result.incumbent.config}  (ATE {result.incumbent.ate_percent:.4f} %)")
    if spec.test:
        rep = evaluate_on_test(result.incumbent_config, spec, args.dataset, icp)
        rows_to_csv([rep.row], out / "test.csv")
        (out / "test.json").write_text(json.dumps(rep.row, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(f"test ATE {rep.row['ate_percent']:.4f} %  ARE {rep.row['are_millideg_per_m']:.4f}")
    return 0


# ---- bench ----

def _bench_one(cfg, seq_dirs, icp, lengths, stride):
    reports = {}
    ms, pts = [], []
    for d in seq_dirs:
        seq = Sequence.open(d)
        gt = read_trajectory(seq.gt_path)
        est, stats = run_odometry(seq.scan_paths, cfg, icp)
        reports[d.name] = kitti_errors(gt, est, lengths, stride)
        rt = runtime_report(stats)
        ms.append(rt.mean_extract_ms)
        pts.append(rt.mean_points)
    return reports, float(np.mean(ms)), float(np.mean(pts))


def _bench_shard(a):
    return _bench_one(*a)


def cmd_bench(args) -> int:
    from .report import format_table, plot_bench

    seq_dirs = _sequence_dirs(Path(args.dataset))
    if args.configs:
        cfgs = load_config_list(args.configs)
    else:
        preset = json.loads((seq_dirs[0] / "manifest.json").read_text())["preset"]["name"]
        cfgs = load_config_list("f2-defaults" if preset.upper() == "F2" else "f1-defaults")
    for d in seq_dirs:
        if not (d / "gt.csv").is_file():
            raise UsageError(f"{d}: no ground truth")
    icp = _icp_cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    shards = [(c, seq_dirs, icp, args.lengths, args.stride) for c in cfgs]
    threads = _threads(args)
    if threads > 1 and len(shards) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_bench_shard, shards))
    else:
        results = [_bench_shard(s) for s in shards]
    rows, timing = [], []
    for cfg, (reports, ms, pts) in zip(cfgs, results):
        row = table_row(cfg.kind, format_config(cfg), reports)
        row["points"] = pts
        rows.append(row)
        timing.append(ms)
    # wall-clock timings live outside the CSV so reruns stay byte-identical
    rows_to_csv(rows, out / "bench.csv")
    (out / "bench_timing.json").write_text(
        json.dumps([{"config": format_config(c), "runtime_ms": t} for c, t in zip(cfgs, timing)], indent=2) + "\n",
        encoding="utf-8")
    shown = [{**r, "runtime_ms": t} for r, t in zip(rows, timing)]
    cols = ["extractor", "ate_percent", "are_millideg_per_m", "runtime_ms", "points"]
    table = format_table(shown, cols)
    (out / "bench.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    if not args.no_plots:
        plot_bench(rows, out / "bench.png", timing)
    if any(not math.isfinite(r["ate_percent"]) for r in rows):
        print("some extractors produced no valid error samples (path too short?)", file=sys.stderr)
    return 0


# ---- parser ----

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radarpc", description="Radar point-cloud extraction and odometry benchmark.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    p.add_argument("--threads", type=_positive(int), default=None,
                   help="worker processes for sweep/bench (default: all cores; use 1 for timing columns)")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    s = sub.add_parser("synth", help="generate a synthetic sequence")
    s.add_argument("--preset", type=str.upper, choices=sorted(SENSOR_PRESETS), required=True)
    s.add_argument("--shape", choices=("line", "arc", "figure8"), default="figure8")
    s.add_argument("--length", type=_positive(float), required=True, help="path length in m")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output sequence directory")
    s.add_argument("--landmarks", type=int, default=300)
    s.add_argument("--extent", type=_positive(float), default=None,
                   help="side of the square world in m (default: path bounds padded by max range)")
    s.add_argument("--clutter-regions", type=int, default=0)
    s.add_argument("--max-range", type=_positive(float), default=None)
    s.add_argument("--beam-width", type=float, default=None, help="azimuth beam width in degrees")
    s.add_argument("--speed", type=_positive(float), default=10.0, help="m/s")
    s.add_argument("--curvature", type=float, default=1.0 / 200.0, help="arc curvature in 1/m")
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("extract", help="extract point clouds from scans")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--scan")
    src.add_argument("--dataset")
    e.add_argument("--extractor", required=True, help="config string (e.g. 'ca T=35') or config file")
    e.add_argument("--out", required=True, help="cloud CSV (with --scan) or directory (with --dataset)")
    e.add_argument("--timing", action="store_true", help="print per-scan extraction time")
    e.set_defaults(func=cmd_extract)

    o = sub.add_parser("odom", help="run odometry on a sequence")
    o.add_argument("--dataset", required=True)
    o.add_argument("--extractor", required=True)
    o.add_argument("--out", required=True)
    o.add_argument("--no-plots", action="store_true")
    _add_icp_flags(o)
    o.set_defaults(func=cmd_odom)

    v = sub.add_parser("eval-odom", help="drift of an estimated trajectory against ground truth")
    g = v.add_mutually_exclusive_group(required=True)
    g.add_argument("--gt")
    g.add_argument("--dataset", help="sequence directory holding gt.csv")
    v.add_argument("--est", required=True)
    v.add_argument("--out", help="JSON report path (a trajectory figure is written next to it)")
    v.add_argument("--no-plots", action="store_true")
    _add_eval_flags(v)
    v.set_defaults(func=cmd_eval_odom)

    d = sub.add_parser("eval-detect", help="Pd/Pfa of an extractor against the synthetic labels")
    d.add_argument("--dataset", required=True)
    d.add_argument("--extractor", required=True)
    d.add_argument("--dilation", type=int, default=1, help="range-bin tolerance (default %(default)s)")
    d.add_argument("--out")
    d.set_defaults(func=cmd_eval_detect)

    w = sub.add_parser("sweep", help="coarse-to-fine parameter sweep")
    w.add_argument("--spec", required=True, help="TOML or JSON sweep spec")
    w.add_argument("--dataset", required=True, help="directory holding the named sequences")
    w.add_argument("--out", required=True)
    w.add_argument("--no-plots", action="store_true")
    _add_icp_flags(w)
    w.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bench", help="compare extractor configs on one dataset")
    b.add_argument("--dataset", required=True, help="a sequence directory or a directory of sequences")
    b.add_argument("--configs", help="preset name (f1-defaults, f2-defaults) or file with one config per line")
    b.add_argument("--out", required=True)
    b.add_argument("--no-plots", action="store_true")
    _add_icp_flags(b)
    _add_eval_flags(b)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"radarpc {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"radarpc {args.command}: failed: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
