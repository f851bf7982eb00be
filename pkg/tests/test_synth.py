import json
import math

import numpy as np
import pytest

from radarpc.formats import read_mask, read_scan, read_trajectory
from radarpc.scan import to_watts
from radarpc.se2 import Pose2
from radarpc.synth import (
    PRESETS, ClutterSpec, Landmark, Sequence, World, generate_sequence, get_preset, landmark_power,
    make_trajectory, make_world, render_scan,
)
from radarpc.synth import _clutter_mean_watts

F1 = PRESETS["F1"]
SMALL = F1.replace(num_azimuths=64, max_range=20.0)


# ---- worlds ----

def test_world_empty_and_deterministic():
    assert make_world(1, 100.0, 0).landmarks == ()
    assert make_world(5, 200.0, 50) == make_world(5, 200.0, 50)
    assert make_world(5, 200.0, 50) != make_world(6, 200.0, 50)


def test_world_landmarks_inside_bounds():
    w = make_world(3, 200.0, 200)
    xy = np.array([(lm.x, lm.y) for lm in w.landmarks])
    assert len(xy) == 200
    assert np.all(np.abs(xy) <= 100.0)
    w2 = make_world(3, (0, 10, -5, 5), 100)
    assert all(0 <= lm.x <= 10 and -5 <= lm.y <= 5 for lm in w2.landmarks)


def test_world_dict_round_trip():
    w = make_world(2, 100.0, 10, ClutterSpec(n_regions=3))
    assert len(w.clutter_regions) == 3
    assert World.from_dict(json.loads(json.dumps(w.to_dict()))) == w


def test_world_rejects_negative_count():
    with pytest.raises(ValueError):
        make_world(0, 10.0, -1)


# ---- presets ----

def test_presets():
    assert get_preset("f1") is F1
    assert F1.num_bins != PRESETS["F2"].num_bins
    assert PRESETS["F2"].noise_floor_db > F1.noise_floor_db
    with pytest.raises(ValueError):
        get_preset("F3")


# ---- rendering ----

def test_empty_world_no_labels_and_floor():
    scan, labels = render_scan(World(), Pose2(), F1, seed=0)
    assert not labels.any()
    power_mean_db = 10 * math.log10(to_watts(scan).values.mean())
    assert abs(power_mean_db - F1.noise_floor_db) <= 1.0


def test_clutter_mean_matches_floor():
    # two empty-world F1 scans give more than a million samples
    watts = np.concatenate([to_watts(render_scan(World(), Pose2(), F1, seed=s)[0]).values.ravel() for s in (1, 2)])
    assert watts.size >= 1_000_000
    assert watts.mean() == pytest.approx(10 ** (F1.noise_floor_db / 10), rel=0.02)


def test_single_landmark_position():
    world = World((Landmark(30.0, 0.0, 25.0, 0.1),))
    res = F1.range_resolution
    expected = round(30.0 / res - 0.5)
    target = landmark_power(world, Pose2(), F1, np.array([1.0]))
    assert set(np.nonzero(target)[0].tolist()) == {0}
    assert abs(int(np.argmax(target[0])) - expected) <= 1
    for seed in range(8):
        _, labels = render_scan(world, Pose2(), F1, seed=seed)
        assert set(np.nonzero(labels)[0].tolist()) == {0}
        hit = np.flatnonzero(labels[0])
        # the run through the expected bin is centred on it; clutter may punch
        # gaps only in the profile tails, inside the landmark's 4-sigma support
        assert labels[0, expected]
        lo = hi = expected
        while labels[0, lo - 1]:
            lo -= 1
        while labels[0, hi + 1]:
            hi += 1
        assert abs((lo + hi) / 2 - expected) <= 1
        assert np.all(np.abs(hit - expected) * res <= 4 * 0.1 + res)


def test_landmark_follows_pose():
    world = World((Landmark(10.0, 10.0, 25.0, 0.2),))
    # looking from (10, 0) with heading +pi/2 the landmark is dead ahead at 10 m
    target = landmark_power(world, Pose2(10.0, 0.0, math.pi / 2), SMALL, np.array([1.0]))
    az = set(np.nonzero(target)[0].tolist())
    assert az == {0}
    assert abs(int(np.argmax(target[0])) - round(10.0 / SMALL.range_resolution - 0.5)) <= 1


def test_beam_width_spreads_azimuths():
    world = World((Landmark(15.0, 0.0, 25.0, 0.2),))
    wide = landmark_power(world, Pose2(), SMALL.replace(beam_width_deg=20.0), np.array([1.0]))
    rows = set(np.nonzero(wide)[0].tolist())
    assert len(rows) > 1 and 0 in rows
    assert wide[0].max() == pytest.approx(wide.max())


def test_labels_mark_landmark_dominance():
    world = make_world(8, 40.0, 30, ClutterSpec(n_regions=2))
    pose = Pose2(1.0, -2.0, 0.4)
    seed = 17
    _, labels = render_scan(world, pose, SMALL, seed)
    # re-evaluate both contributions with the same generator stream
    rng = np.random.default_rng(seed)
    clutter = _clutter_mean_watts(world, pose, SMALL.geometry(), SMALL.noise_floor_db) * rng.exponential(1.0, SMALL.geometry().shape)
    means = np.array([10 ** ((SMALL.noise_floor_db + lm.reflectivity) / 10) for lm in world.landmarks])
    targets = landmark_power(world, pose, SMALL, rng.exponential(1.0, len(world.landmarks)) * means)
    assert labels.any()
    assert np.array_equal(labels, targets > clutter)


def test_render_deterministic_and_seed_sensitive():
    world = make_world(1, 40.0, 20)
    a = render_scan(world, Pose2(), SMALL, 3)
    b = render_scan(world, Pose2(), SMALL, 3)
    c = render_scan(world, Pose2(), SMALL, 4)
    assert a[0] == b[0] and np.array_equal(a[1], b[1])
    assert not a[0] == c[0]


def test_gamma_clutter_scale():
    preset = SMALL.replace(noise_scale=0.25)
    w = np.concatenate([to_watts(render_scan(World(), Pose2(), preset, s)[0]).values.ravel() for s in range(20)])
    floor = 10 ** (preset.noise_floor_db / 10)
    assert w.mean() == pytest.approx(floor, rel=0.03)
    # a gamma shape of 4 has a quarter of the exponential variance
    assert w.var() / floor ** 2 == pytest.approx(0.25, rel=0.15)


# ---- trajectories ----

def test_line_cardinality_and_spacing():
    t = make_trajectory("line", 100.0)
    assert len(t) == 41
    np.testing.assert_allclose(np.diff(t.poses[:, 0]), 2.5)
    np.testing.assert_allclose(np.diff(t.timestamps), 0.25)
    assert t.poses[0].tolist() == [0.0, 0.0, 0.0]


def test_figure8_closes():
    t = make_trajectory("figure8", 400.0)
    assert t.path_lengths()[-1] >= 400.0 - 1e-9
    assert math.hypot(*(t.poses[-1, :2] - t.poses[0, :2])) <= 2.5 + 1e-9


def test_arc_zero_curvature_is_line():
    a = make_trajectory("arc", 50.0, curvature=0.0)
    b = make_trajectory("line", 50.0)
    assert np.array_equal(a.poses, b.poses)


def test_arc_heading_tracks_curvature():
    t = make_trajectory("arc", 100.0, curvature=0.01)
    np.testing.assert_allclose(t.poses[:, 2], 0.01 * np.arange(len(t)) * 2.5, atol=1e-12)


@pytest.mark.parametrize("shape,length", [("line", 0.0), ("circle", 10.0)])
def test_trajectory_rejects_bad_input(shape, length):
    with pytest.raises(ValueError):
        make_trajectory(shape, length)


# ---- sequences ----

def _gen(out, seed=11):
    world = make_world(seed, 60.0, 40)
    traj = make_trajectory("line", 22.5)
    return generate_sequence(world, traj, SMALL, seed, out)


def test_sequence_layout(tmp_path):
    root = _gen(tmp_path / "s")
    seq = Sequence.open(root)
    assert len(seq.scan_paths) == 10 and len(seq.label_paths) == 10
    manifest = json.loads((root / "manifest.json").read_text())
    assert manifest["num_scans"] == 10 and manifest["num_bins"] == SMALL.num_bins
    gt = read_trajectory(seq.gt_path)
    assert len(gt) == 10
    scan = read_scan(seq.scan_paths[3])
    assert scan.timestamp == gt.timestamps[3]
    assert read_mask(seq.label_paths[3], scan.geometry.shape).shape == scan.geometry.shape


def test_sequence_rerun_byte_identical(tmp_path):
    a, b = _gen(tmp_path / "a"), _gen(tmp_path / "b")
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_sequence_open_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        Sequence.open(tmp_path)
