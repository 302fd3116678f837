"""Numba-compiled implementations of the hot numeric kernels.

Same contracts as ``np_kernels``. The item-fit row search exploits concavity
of the log-likelihood along the difficulty axis (interval shrinking plus a
windowed linear scan) so a full calibration stays fast at scale.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

EPS = 1e-9
_INVPHI = 0.6180339887498949
_INVPHI2 = 0.3819660112501051
_GOLDEN_TOL = 1e-11
_GOLDEN_MAX_ITER = 120
_ROW_WINDOW = 16
_A_WINDOW = 8


@njit(cache=True, nogil=True)
def _term(z: float, yi: int) -> float:
    if z >= 0.0:
        p = 1.0 / (1.0 + math.exp(-z))
    else:
        e = math.exp(z)
        p = e / (1.0 + e)
    if p < EPS:
        p = EPS
    elif p > 1.0 - EPS:
        p = 1.0 - EPS
    if yi != 0:
        return math.log(p)
    return math.log(1.0 - p)


@njit(cache=True, nogil=True)
def ll_student(theta: float, a, b, y) -> float:
    s = 0.0
    for i in range(a.shape[0]):
        s += _term(a[i] * (theta - b[i]), y[i])
    return s


@njit(cache=True, nogil=True)
def ll_item(a: float, b: float, theta, y) -> float:
    s = 0.0
    for i in range(theta.shape[0]):
        s += _term(a * (theta[i] - b), y[i])
    return s


@njit(cache=True, nogil=True)
def total_ll(a_items, b_items, theta, item_idx, student_idx, y) -> float:
    s = 0.0
    for i in range(y.shape[0]):
        j = item_idx[i]
        z = a_items[j] * (theta[student_idx[i]] - b_items[j])
        s += _term(z, y[i])
    return s


@njit(cache=True, nogil=True)
def theta_mle(a, b, y, lo: float, hi: float, n_grid: int) -> float:
    grid = np.linspace(lo, hi, n_grid)
    best_k = 0
    best_v = -np.inf
    for k in range(n_grid):
        v = ll_student(grid[k], a, b, y)
        if v > best_v:
            best_v = v
            best_k = k
    best_x = grid[best_k]
    left = grid[best_k - 1] if best_k > 0 else grid[0]
    right = grid[best_k + 1] if best_k < n_grid - 1 else grid[n_grid - 1]
    h = right - left
    if h <= _GOLDEN_TOL:
        return best_x
    x1 = left + _INVPHI2 * h
    x2 = left + _INVPHI * h
    f1 = ll_student(x1, a, b, y)
    f2 = ll_student(x2, a, b, y)
    if f1 > best_v or (f1 == best_v and x1 < best_x):
        best_v = f1
        best_x = x1
    if f2 > best_v or (f2 == best_v and x2 < best_x):
        best_v = f2
        best_x = x2
    for _ in range(_GOLDEN_MAX_ITER):
        if f1 >= f2:
            right = x2
            x2 = x1
            f2 = f1
            h = right - left
            x1 = left + _INVPHI2 * h
            f1 = ll_student(x1, a, b, y)
            if f1 > best_v or (f1 == best_v and x1 < best_x):
                best_v = f1
                best_x = x1
        else:
            left = x1
            x1 = x2
            f1 = f2
            h = right - left
            x2 = left + _INVPHI * h
            f2 = ll_student(x2, a, b, y)
            if f2 > best_v or (f2 == best_v and x2 < best_x):
                best_v = f2
                best_x = x2
        if h <= _GOLDEN_TOL:
            break
    return best_x


@njit(cache=True, nogil=True)
def _row_argmax(a: float, theta, y, b_grid):
    """Leftmost argmax along the b-grid row.

    The unclipped row log-likelihood is concave in b for fixed a, so interval
    shrinking is safe; a windowed linear scan finishes the search exactly.
    """
    n = b_grid.shape[0]
    lo = 0
    hi = n - 1
    while hi - lo > _ROW_WINDOW:
        third = (hi - lo) // 3
        m1 = lo + third
        m2 = hi - third
        f1 = ll_item(a, b_grid[m1], theta, y)
        f2 = ll_item(a, b_grid[m2], theta, y)
        if f1 > f2:
            hi = m2 - 1
        elif f1 < f2:
            lo = m1 + 1
        else:
            hi = m2
    best_k = lo
    best_v = ll_item(a, b_grid[lo], theta, y)
    for k in range(lo + 1, hi + 1):
        v = ll_item(a, b_grid[k], theta, y)
        if v > best_v:
            best_v = v
            best_k = k
    return best_k, best_v


@njit(cache=True, nogil=True)
def _rows_argmax(theta, y, a_grid, b_grid, lo: int, hi: int):
    """Leftmost argmax of the per-row maxima over a-grid rows lo..hi.

    Valid when the row-maximum profile is unimodal over the range, which holds
    separately for the negative-a and non-negative-a sides (the likelihood is
    concave in the slope/offset reparametrization on each side). A windowed
    scan absorbs grid-quantization wiggles near the peak.
    """
    while hi - lo > _A_WINDOW:
        third = (hi - lo) // 3
        m1 = lo + third
        m2 = hi - third
        _k1, f1 = _row_argmax(a_grid[m1], theta, y, b_grid)
        _k2, f2 = _row_argmax(a_grid[m2], theta, y, b_grid)
        if f1 > f2:
            hi = m2 - 1
        elif f1 < f2:
            lo = m1 + 1
        else:
            hi = m2
    best_r = lo
    best_k, best_v = _row_argmax(a_grid[lo], theta, y, b_grid)
    for r in range(lo + 1, hi + 1):
        k, v = _row_argmax(a_grid[r], theta, y, b_grid)
        if v > best_v:
            best_v = v
            best_r = r
            best_k = k
    return best_r, best_k, best_v


@njit(cache=True, nogil=True)
def fit_item(
    theta,
    y,
    a_lo: float,
    a_hi: float,
    n_a: int,
    b_lo: float,
    b_hi: float,
    n_b: int,
    inc_a: float,
    inc_b: float,
):
    a_grid = np.linspace(a_lo, a_hi, n_a)
    b_grid = np.linspace(b_lo, b_hi, n_b)
    split = int(np.searchsorted(a_grid, 0.0))
    best_v = -np.inf
    best_r = 0
    best_k = 0
    if split > 0:
        best_r, best_k, best_v = _rows_argmax(theta, y, a_grid, b_grid, 0, split - 1)
    if split < n_a:
        r2, k2, v2 = _rows_argmax(theta, y, a_grid, b_grid, split, n_a - 1)
        if v2 > best_v:
            best_r, best_k, best_v = r2, k2, v2
    cur_a = a_grid[best_r]
    cur_b = b_grid[best_k]
    cur_v = best_v
    b_ref_lo = b_grid[best_k - 1] if best_k > 0 else b_grid[0]
    b_ref_hi = b_grid[best_k + 1] if best_k < n_b - 1 else b_grid[n_b - 1]
    a_ref_lo = a_grid[best_r - 1] if best_r > 0 else a_grid[0]
    a_ref_hi = a_grid[best_r + 1] if best_r < n_a - 1 else a_grid[n_a - 1]
    for _ in range(2):
        # golden-section along b, a fixed
        left = b_ref_lo
        right = b_ref_hi
        h = right - left
        if h > _GOLDEN_TOL:
            x1 = left + _INVPHI2 * h
            x2 = left + _INVPHI * h
            f1 = ll_item(cur_a, x1, theta, y)
            f2 = ll_item(cur_a, x2, theta, y)
            if f1 > cur_v or (f1 == cur_v and x1 < cur_b):
                cur_v = f1
                cur_b = x1
            if f2 > cur_v or (f2 == cur_v and x2 < cur_b):
                cur_v = f2
                cur_b = x2
            for _i in range(_GOLDEN_MAX_ITER):
                if f1 >= f2:
                    right = x2
                    x2 = x1
                    f2 = f1
                    h = right - left
                    x1 = left + _INVPHI2 * h
                    f1 = ll_item(cur_a, x1, theta, y)
                    if f1 > cur_v or (f1 == cur_v and x1 < cur_b):
                        cur_v = f1
                        cur_b = x1
                else:
                    left = x1
                    x1 = x2
                    f1 = f2
                    h = right - left
                    x2 = left + _INVPHI * h
                    f2 = ll_item(cur_a, x2, theta, y)
                    if f2 > cur_v or (f2 == cur_v and x2 < cur_b):
                        cur_v = f2
                        cur_b = x2
                if h <= _GOLDEN_TOL:
                    break
        # golden-section along a, b fixed
        left = a_ref_lo
        right = a_ref_hi
        h = right - left
        if h > _GOLDEN_TOL:
            x1 = left + _INVPHI2 * h
            x2 = left + _INVPHI * h
            f1 = ll_item(x1, cur_b, theta, y)
            f2 = ll_item(x2, cur_b, theta, y)
            if f1 > cur_v or (f1 == cur_v and x1 < cur_a):
                cur_v = f1
                cur_a = x1
            if f2 > cur_v or (f2 == cur_v and x2 < cur_a):
                cur_v = f2
                cur_a = x2
            for _i in range(_GOLDEN_MAX_ITER):
                if f1 >= f2:
                    right = x2
                    x2 = x1
                    f2 = f1
                    h = right - left
                    x1 = left + _INVPHI2 * h
                    f1 = ll_item(x1, cur_b, theta, y)
                    if f1 > cur_v or (f1 == cur_v and x1 < cur_a):
                        cur_v = f1
                        cur_a = x1
                else:
                    left = x1
                    x1 = x2
                    f1 = f2
                    h = right - left
                    x2 = left + _INVPHI * h
                    f2 = ll_item(x2, cur_b, theta, y)
                    if f2 > cur_v or (f2 == cur_v and x2 < cur_a):
                        cur_v = f2
                        cur_a = x2
                if h <= _GOLDEN_TOL:
                    break
    inc_v = ll_item(inc_a, inc_b, theta, y)
    if cur_v > inc_v:
        return cur_a, cur_b
    return inc_a, inc_b


@njit(cache=True, nogil=True)
def best_split(values, targets):
    n = values.shape[0]
    if n < 2:
        return False, 0.0, 0.0
    order = np.argsort(values, kind="mergesort")
    sv = values[order]
    sy = targets[order]
    total_sum = 0.0
    total_sq = 0.0
    for i in range(n):
        total_sum += sy[i]
        total_sq += sy[i] * sy[i]
    left_sum = 0.0
    left_sq = 0.0
    found = False
    best_sse = np.inf
    best_thr = 0.0
    for i in range(1, n):
        left_sum += sy[i - 1]
        left_sq += sy[i - 1] * sy[i - 1]
        if sv[i] == sv[i - 1]:
            continue
        nl = float(i)
        nr = float(n - i)
        sse = (left_sq - left_sum * left_sum / nl) + (
            (total_sq - left_sq) - (total_sum - left_sum) * (total_sum - left_sum) / nr
        )
        if sse < best_sse:
            best_sse = sse
            best_thr = 0.5 * (sv[i - 1] + sv[i])
            found = True
    if not found:
        return False, 0.0, 0.0
    return True, best_thr, best_sse
