"""Pure-numpy implementations of the hot numeric kernels.

Mirror of ``nb_kernels``; selected via the IRTEXT_BACKEND environment flag or
when numba is unavailable. Grid scans are vectorized over the grid axis,
golden-section refinements run as scalar loops identical to the numba path.
"""

from __future__ import annotations

import numpy as np

EPS = 1e-9
_INVPHI = 0.6180339887498949
_INVPHI2 = 0.3819660112501051
_GOLDEN_TOL = 1e-11
_GOLDEN_MAX_ITER = 120


def _terms(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-answer log-likelihood terms with probabilities clamped to [EPS, 1-EPS]."""
    p = np.empty_like(z)
    pos = z >= 0.0
    p[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    p[~pos] = e / (1.0 + e)
    np.clip(p, EPS, 1.0 - EPS, out=p)
    return np.where(y != 0, np.log(p), np.log(1.0 - p))


def ll_student(theta: float, a: np.ndarray, b: np.ndarray, y: np.ndarray) -> float:
    """Log-likelihood of one student's answers at skill theta."""
    return float(np.sum(_terms(a * (theta - b), y)))


def ll_item(a: float, b: float, theta: np.ndarray, y: np.ndarray) -> float:
    """Log-likelihood of one item's answers at parameters (a, b)."""
    return float(np.sum(_terms(a * (theta - b), y)))


def total_ll(
    a_items: np.ndarray,
    b_items: np.ndarray,
    theta: np.ndarray,
    item_idx: np.ndarray,
    student_idx: np.ndarray,
    y: np.ndarray,
) -> float:
    """Joint log-likelihood over aligned per-interaction index arrays."""
    z = a_items[item_idx] * (theta[student_idx] - b_items[item_idx])
    return float(np.sum(_terms(z, y)))


def _golden_theta(a, b, y, lo, hi, best_v, best_x):
    left = lo
    right = hi
    h = right - left
    if h <= _GOLDEN_TOL:
        return best_x
    x1 = left + _INVPHI2 * h
    x2 = left + _INVPHI * h
    f1 = ll_student(x1, a, b, y)
    f2 = ll_student(x2, a, b, y)
    if f1 > best_v or (f1 == best_v and x1 < best_x):
        best_v, best_x = f1, x1
    if f2 > best_v or (f2 == best_v and x2 < best_x):
        best_v, best_x = f2, x2
    for _ in range(_GOLDEN_MAX_ITER):
        if f1 >= f2:
            right = x2
            x2, f2 = x1, f1
            h = right - left
            x1 = left + _INVPHI2 * h
            f1 = ll_student(x1, a, b, y)
            if f1 > best_v or (f1 == best_v and x1 < best_x):
                best_v, best_x = f1, x1
        else:
            left = x1
            x1, f1 = x2, f2
            h = right - left
            x2 = left + _INVPHI * h
            f2 = ll_student(x2, a, b, y)
            if f2 > best_v or (f2 == best_v and x2 < best_x):
                best_v, best_x = f2, x2
        if h <= _GOLDEN_TOL:
            break
    return best_x

def theta_mle(
    a: np.ndarray, b: np.ndarray, y: np.ndarray, lo: float, hi: float, n_grid: int
) -> float:
    """Skill MLE: full grid scan then golden-section refinement of the bracket.

    Ties in the scan and the refinement resolve toward the smallest theta.
    """
    grid = np.linspace(lo, hi, n_grid)
    z = a[:, None] * (grid[None, :] - b[:, None])
    vals = np.sum(_terms(z, np.broadcast_to(y[:, None], z.shape)), axis=0)
    k = int(np.argmax(vals))
    best_v = float(vals[k])
    best_x = float(grid[k])
    ref_lo = float(grid[k - 1]) if k > 0 else float(grid[0])
    ref_hi = float(grid[k + 1]) if k < n_grid - 1 else float(grid[n_grid - 1])
    return float(_golden_theta(a, b, y, ref_lo, ref_hi, best_v, best_x))


def _row_scan(a: float, theta, y, b_grid) -> tuple[int, float]:
    """Leftmost argmax of the item log-likelihood along a full b-grid row."""
    z = a * (theta[:, None] - b_grid[None, :])
    vals = np.sum(_terms(z, np.broadcast_to(y[:, None], z.shape)), axis=0)
    k = int(np.argmax(vals))
    return k, float(vals[k])


def _golden_item(theta, y, fixed: float, fix_a: bool, lo, hi, best_v, best_x):
    """Golden-section along one parameter axis; fixed holds the other axis."""

    def f(x: float) -> float:
        if fix_a:
            return ll_item(fixed, x, theta, y)
        return ll_item(x, fixed, theta, y)

    left = lo
    right = hi
    h = right - left
    if h <= _GOLDEN_TOL:
        return best_v, best_x
    x1 = left + _INVPHI2 * h
    x2 = left + _INVPHI * h
    f1 = f(x1)
    f2 = f(x2)
    if f1 > best_v or (f1 == best_v and x1 < best_x):
        best_v, best_x = f1, x1
    if f2 > best_v or (f2 == best_v and x2 < best_x):
        best_v, best_x = f2, x2
    for _ in range(_GOLDEN_MAX_ITER):
        if f1 >= f2:
            right = x2
            x2, f2 = x1, f1
            h = right - left
            x1 = left + _INVPHI2 * h
            f1 = f(x1)
            if f1 > best_v or (f1 == best_v and x1 < best_x):
                best_v, best_x = f1, x1
        else:
            left = x1
            x1, f1 = x2, f2
            h = right - left
            x2 = left + _INVPHI * h
            f2 = f(x2)
            if f2 > best_v or (f2 == best_v and x2 < best_x):
                best_v, best_x = f2, x2
        if h <= _GOLDEN_TOL:
            break
    return best_v, best_x


def fit_item(
    theta: np.ndarray,
    y: np.ndarray,
    a_lo: float,
    a_hi: float,
    n_a: int,
    b_lo: float,
    b_hi: float,
    n_b: int,
    inc_a: float,
    inc_b: float,
) -> tuple[float, float]:
    """Maximize one item's (a, b) over the bounded box.

    Coarse scan over the a-grid x b-grid (ties lexicographically smallest),
    then golden-section coordinate sweeps around the winning cell. The
    incumbent parameters are kept unless the candidate is strictly better,
    which makes the calibration loop monotone in joint log-likelihood.
    """
    a_grid = np.linspace(a_lo, a_hi, n_a)
    b_grid = np.linspace(b_lo, b_hi, n_b)
    best_v = -np.inf
    best_r = 0
    best_k = 0
    for r in range(n_a):
        k, v = _row_scan(float(a_grid[r]), theta, y, b_grid)
        if v > best_v:
            best_v, best_r, best_k = v, r, k
    cur_a = float(a_grid[best_r])
    cur_b = float(b_grid[best_k])
    cur_v = best_v
    b_ref_lo = float(b_grid[best_k - 1]) if best_k > 0 else float(b_grid[0])
    b_ref_hi = float(b_grid[best_k + 1]) if best_k < n_b - 1 else float(b_grid[n_b - 1])
    a_ref_lo = float(a_grid[best_r - 1]) if best_r > 0 else float(a_grid[0])
    a_ref_hi = float(a_grid[best_r + 1]) if best_r < n_a - 1 else float(a_grid[n_a - 1])
    for _ in range(2):
        cur_v, cur_b = _golden_item(
            theta, y, cur_a, True, b_ref_lo, b_ref_hi, cur_v, cur_b
        )
        cur_v, cur_a = _golden_item(
            theta, y, cur_b, False, a_ref_lo, a_ref_hi, cur_v, cur_a
        )
    inc_v = ll_item(inc_a, inc_b, theta, y)
    if cur_v > inc_v:
        return cur_a, cur_b
    return inc_a, inc_b


def best_split(values: np.ndarray, targets: np.ndarray) -> tuple[bool, float, float]:
    """Best variance-reducing binary split of one feature column.

    Returns (found, threshold, summed_children_sse); thresholds are midpoints
    between consecutive distinct sorted values and ties prefer the smallest
    threshold.
    """
    n = values.shape[0]
    if n < 2:
        return False, 0.0, 0.0
    order = np.argsort(values, kind="stable")
    sv = values[order]
    sy = targets[order]
    csum = np.cumsum(sy)
    csq = np.cumsum(sy * sy)
    total_sum = csum[-1]
    total_sq = csq[-1]
    boundary = sv[1:] != sv[:-1]
    if not np.any(boundary):
        return False, 0.0, 0.0
    idx = np.nonzero(boundary)[0] + 1
    nl = idx.astype(np.float64)
    nr = n - nl
    lsum = csum[idx - 1]
    lsq = csq[idx - 1]
    sse = (lsq - lsum * lsum / nl) + ((total_sq - lsq) - (total_sum - lsum) ** 2 / nr)
    j = int(np.argmin(sse))
    thr = 0.5 * (sv[idx[j] - 1] + sv[idx[j]])
    return True, float(thr), float(sse[j])
