"""Compiled CFAR sweep over a whole WattSquared grid.

Window sums are recomputed per cell under test rather than kept as running
sums: squared-Watt grids span ~1e0..1e25, and add/subtract running sums lose
the small windows to cancellation. OS/TM keep a sorted copy of the reference
window that is updated by two removals and two insertions per step.
"""

import numpy as np
from numba import njit

CA, CAGO, CASO, IS, VI, OS, TM, MSCA, BFAR = range(9)


@njit(cache=True)
def _sorted_remove(buf, n, v):
    lo, hi = 0, n
    while lo < hi:
        mid = (lo + hi) // 2
        if buf[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    for k in range(lo, n - 1):
        buf[k] = buf[k + 1]
    return n - 1


@njit(cache=True)
def _sorted_insert(buf, n, v):
    lo, hi = 0, n
    while lo < hi:
        mid = (lo + hi) // 2
        if buf[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    for k in range(n, lo, -1):
        buf[k] = buf[k - 1]
    buf[lo] = v
    return n + 1


@njit(cache=True)
def _range_sum(row, a, b):
    s = 0.0
    for k in range(a, b):
        s += row[k]
    return s


@njit(cache=True)
def _range_sumsq(row, a, b):
    s = 0.0
    for k in range(a, b):
        s += row[k] * row[k]
    return s


@njit(cache=True)
def _is_clutter(row, l0, l1, r0, r1, cut, alpha, max_int):
    thr = alpha * cut
    n_lead = 0
    n_lag = 0
    s_lead_keep = 0.0
    s_lag_keep = 0.0
    for k in range(l0, l1):
        if row[k] > thr:
            n_lead += 1
        else:
            s_lead_keep += row[k]
    for k in range(r0, r1):
        if row[k] > thr:
            n_lag += 1
        else:
            s_lag_keep += row[k]
    nl = l1 - l0
    nr = r1 - r0
    lead_bad = n_lead > max_int
    lag_bad = n_lag > max_int
    if not lead_bad and not lag_bad:
        kept = (nl - n_lead) + (nr - n_lag)
        if kept == 0:
            return (_range_sum(row, l0, l1) + _range_sum(row, r0, r1)) / (nl + nr)
        return (s_lead_keep + s_lag_keep) / kept
    if lead_bad and not lag_bad:
        return _range_sum(row, l0, l1) / nl
    if lag_bad and not lead_bad:
        return _range_sum(row, r0, r1) / nr
    return (_range_sum(row, l0, l1) + _range_sum(row, r0, r1)) / (nl + nr)


@njit(cache=True)
def _vi_clutter(row, l0, l1, r0, r1, v_thr, ratio_bound):
    nl = l1 - l0
    nr = r1 - r0
    s_l = _range_sum(row, l0, l1)
    s_r = _range_sum(row, r0, r1)
    q_l = _range_sumsq(row, l0, l1)
    q_r = _range_sumsq(row, r0, r1)
    # an all-zero half has no spread: call it homogeneous
    vi_l = nl * q_l / (s_l * s_l) if s_l > 0 else 1.0
    vi_r = nr * q_r / (s_r * s_r) if s_r > 0 else 1.0
    hom_l = vi_l <= v_thr
    hom_r = vi_r <= v_thr
    m_l = s_l / nl
    m_r = s_r / nr
    if m_r > 0:
        ratio = m_l / m_r
        similar = (1.0 / ratio_bound) < ratio < ratio_bound
    else:
        similar = m_l == 0.0
    if hom_l and hom_r:
        if similar:
            return (s_l + s_r) / (nl + nr)
        return max(m_l, m_r)
    if hom_l:
        return m_l
    if hom_r:
        return m_r
    return min(m_l, m_r)


@njit(cache=True)
def _msca_clutter(row, l0, l1, r0, r1, m, u):
    n = 0
    for k in range(l0, l1):
        u[n] = row[k]
        n += 1
    for k in range(r0, r1):
        u[n] = row[k]
        n += 1
    s = 0.0
    cnt = n - m + 1
    for j in range(cnt):
        a = u[j]
        b = u[j + m - 1]
        s += a if a < b else b
    return s / cnt


@njit(cache=True)
def cfar_grid(values, kind, T, p1, p2, b_eff, half, guard):
    """Boolean detection grid. ``p1``/``p2`` carry the variant's extra parameters:
    IS (alpha, I), VI (V, R), OS (quantile, -), TM (N_T, -), MSCA (M, -)."""
    n_az, n_bins = values.shape
    out = np.zeros((n_az, n_bins), dtype=np.bool_)
    buf = np.empty(2 * half + 2, dtype=np.float64)
    for a in range(n_az):
        row = values[a]
        have_buf = False
        n_buf = 0
        pl0 = pl1 = pr0 = pr1 = 0
        for i in range(n_bins):
            l0 = max(0, i - guard - half)
            l1 = i - guard
            r0 = i + guard + 1
            r1 = min(n_bins, i + guard + half + 1)
            if l1 <= l0 or r1 <= r0:
                continue
            nl = l1 - l0
            nr = r1 - r0
            n = nl + nr
            cut = row[i]

            if kind == OS or kind == TM:
                if not have_buf:
                    n_buf = 0
                    for k in range(l0, l1):
                        buf[n_buf] = row[k]
                        n_buf += 1
                    for k in range(r0, r1):
                        buf[n_buf] = row[k]
                        n_buf += 1
                    buf[:n_buf] = np.sort(buf[:n_buf])
                    have_buf = True
                else:
                    for k in range(pl0, min(l0, pl1)):
                        n_buf = _sorted_remove(buf, n_buf, row[k])
                    for k in range(max(pl1, l0), l1):
                        n_buf = _sorted_insert(buf, n_buf, row[k])
                    for k in range(pr0, min(r0, pr1)):
                        n_buf = _sorted_remove(buf, n_buf, row[k])
                    for k in range(max(pr1, r0), r1):
                        n_buf = _sorted_insert(buf, n_buf, row[k])
                pl0, pl1, pr0, pr1 = l0, l1, r0, r1

            if kind == CA or kind == BFAR:
                z = (_range_sum(row, l0, l1) + _range_sum(row, r0, r1)) / n
            elif kind == CAGO:
                z = max(_range_sum(row, l0, l1) / nl, _range_sum(row, r0, r1) / nr)
            elif kind == CASO:
                z = min(_range_sum(row, l0, l1) / nl, _range_sum(row, r0, r1) / nr)
            elif kind == IS:
                z = _is_clutter(row, l0, l1, r0, r1, cut, p1, int(p2))
            elif kind == VI:
                z = _vi_clutter(row, l0, l1, r0, r1, p1, p2)
            elif kind == OS:
                z = buf[int(np.floor(p1 * (n_buf - 1)))]
            elif kind == TM:
                nt = int(p1)
                if n_buf <= 2 * nt:
                    continue
                s = 0.0
                for k in range(nt, n_buf - nt):
                    s += buf[k]
                z = s / (n_buf - 2 * nt)
            else:
                m = int(p1)
                if n < m:
                    continue
                z = _msca_clutter(row, l0, l1, r0, r1, m, buf)
            if cut > T * z + b_eff:
                out[a, i] = True
    return out
