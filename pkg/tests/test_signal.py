import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radarpc.extractors import C18, KStrongest, extract, extract_c18, extract_kstrongest
from radarpc.extractors.signal import c18_mask, c18_transform, kstrongest_indices, local_maxima
from radarpc.scan import PolarScan, PowerUnit, ScanGeometry, decode_raw, to_watt_squared, to_watts


def db_scan(values):
    values = np.atleast_2d(np.asarray(values, dtype=np.float32))
    if values.shape[0] < 3:
        values = np.vstack([values, np.zeros((3 - values.shape[0], values.shape[1]), np.float32)])
    g = ScanGeometry(values.shape[0], values.shape[1], 0.1)
    return PolarScan(g, PowerUnit.DECIBEL, 0.0, values)


# ---- K-strongest ----

def test_kstrongest_example():
    pc = extract_kstrongest(db_scan([5, 12, 7, 3, 9]), 2, 6)
    assert sorted(pc.range_bin.tolist()) == [1, 4]
    assert sorted(pc.intensity.tolist()) == [9.0, 12.0]


def test_kstrongest_all_below_threshold():
    assert len(extract_kstrongest(db_scan([1, 2, 3]), 3, 3)) == 0


def test_kstrongest_saturation():
    v = np.arange(15, dtype=float).reshape(3, 5)
    az, rb = kstrongest_indices(v, 10, -np.inf)
    assert len(az) == 15


def test_kstrongest_ties_prefer_lower_bin():
    az, rb = kstrongest_indices(np.array([[4.0, 7.0, 7.0, 7.0, 1.0]]), 2, 0)
    assert rb.tolist() == [1, 2]


def test_kstrongest_requires_decibel():
    s = to_watts(db_scan([1, 2, 3]))
    with pytest.raises(ValueError):
        extract_kstrongest(s, 1, 0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 30), elements=st.floats(0, 100)), st.integers(1, 10), st.floats(0, 60))
def test_kstrongest_dominance(v, k, z_min):
    az, rb = kstrongest_indices(v, k, z_min)
    for a in range(v.shape[0]):
        sel = rb[az == a]
        assert len(sel) <= k
        rest = np.setdiff1d(np.flatnonzero(v[a] > z_min), sel)
        if len(sel) and len(rest):
            assert v[a, sel].min() >= v[a, rest].max()
        assert np.all(v[a, sel] > z_min)


@settings(max_examples=30, deadline=None)
@given(arrays(np.uint8, (3, 40)), st.integers(1, 8), st.integers(0, 200))
def test_kstrongest_unit_chain_invariance(levels, k, z_level):
    db = decode_raw(levels, ScanGeometry(3, 40, 0.1))
    z_db = z_level / 2
    ref = set(zip(*kstrongest_indices(db.values, k, z_db)))
    w = to_watts(db)
    w2 = to_watt_squared(db)
    assert set(zip(*kstrongest_indices(w.values, k, 10 ** (z_db / 10)))) == ref
    assert set(zip(*kstrongest_indices(w2.values, k, (10 ** (z_db / 10)) ** 2))) == ref


# ---- C18 ----

def test_c18_constant_row_is_empty():
    assert len(extract_c18(db_scan(np.full((3, 200), 30.0)), 4, 2.0)) == 0


def _noisy_floor(n, seed):
    return np.random.default_rng(seed).normal(20.0, 1.0, n)


def _brute_peak(s, lo, hi):
    return lo + int(np.argmax(s[lo:hi]))


def test_c18_single_bump():
    n = 400
    x = np.arange(n)
    row = _noisy_floor(n, 1) + 30.0 * np.exp(-0.5 * ((x - 200) / 3.0) ** 2)
    pc = extract_c18(db_scan(row[None, :]), 4, 3.0)
    hits = pc.range_bin[pc.azimuth_idx == 0]
    assert len(hits) == 1
    apex = _brute_peak(c18_transform(row[None, :], 4)[0], 190, 210)
    assert abs(int(hits[0]) - apex) <= 1
    assert abs(int(hits[0]) - 200) <= 1


def test_c18_two_bumps():
    n = 400
    x = np.arange(n)
    w = 4
    row = _noisy_floor(n, 2) + 30 * np.exp(-0.5 * ((x - 120) / 3) ** 2) + 30 * np.exp(-0.5 * ((x - 120 - 5 * w) / 3) ** 2)
    hits = extract_c18(db_scan(row[None, :]), w, 3.0).range_bin
    hits = sorted(hits.tolist())
    assert len(hits) == 2
    assert abs(hits[0] - 120) <= 1 and abs(hits[1] - 140) <= 1


def test_c18_detections_are_local_maxima_above_threshold():
    rng = np.random.default_rng(5)
    v = rng.normal(30, 3, (6, 300))
    m = c18_mask(v, 6, 1.5)
    s = c18_transform(v, 6)
    assert not (m & ~local_maxima(s)).any()
    for a in range(6):
        neg = s[a][s[a] < 0]
        sigma = np.sqrt(np.mean(neg ** 2))
        assert np.all(s[a][m[a]] > 1.5 * sigma)


def test_local_maxima_plateau_reports_once():
    s = np.array([[0.0, 1.0, 3.0, 3.0, 3.0, 1.0]])
    assert np.flatnonzero(local_maxima(s)[0]).tolist() == [2]


def test_extract_dispatch_prepares_units():
    levels = np.random.default_rng(0).integers(0, 120, (4, 300)).astype(np.uint8)
    raw = decode_raw(levels, ScanGeometry(4, 300, 0.1))
    assert extract(raw, KStrongest(K=3, z_min=10)) == extract_kstrongest(raw, 3, 10)
    assert extract(raw, C18(w_binom=4, z_q=2)) == extract_c18(raw, 4, 2)
