"""Compiled inner loops for the one-sided estimators.

All functions take ``w`` sorted ascending. Undefined estimates (empty
kernel window) are returned as NaN; the Python layer turns those into
exceptions or skips them.
"""

import numpy as np
from numba import njit

from .kernels import right_kernel


@njit(cache=True)
def _window(w, lo, hi):
    # widen by one index each side; the kernel itself enforces the support
    i0 = np.searchsorted(w, lo, side="left") - 1
    i1 = np.searchsorted(w, hi, side="right") + 1
    if i0 < 0:
        i0 = 0
    if i1 > w.shape[0]:
        i1 = w.shape[0]
    return i0, i1


@njit(cache=True)
def conv_right(w, y, c, h, kcode):
    """sum y K_r((w - c)/h) / sum K_r((w - c)/h)."""
    i0, i1 = _window(w, c, c + h)
    num = 0.0
    den = 0.0
    for j in range(i0, i1):
        k = right_kernel(kcode, (w[j] - c) / h)
        num += y[j] * k
        den += k
    if den > 0.0:
        return num / den
    return np.nan


@njit(cache=True)
def conv_left(w, y, c, h, kcode):
    """sum y K_l((w - c)/h) / sum K_l((w - c)/h) with K_l(u) = K_r(-u)."""
    i0, i1 = _window(w, c - h, c)
    num = 0.0
    den = 0.0
    for j in range(i0, i1):
        k = right_kernel(kcode, -((w[j] - c) / h))
        num += y[j] * k
        den += k
    if den > 0.0:
        return num / den
    return np.nan


@njit(cache=True)
def local_right(w, y, h, kcode):
    out = np.empty(w.shape[0])
    for j in range(w.shape[0]):
        out[j] = conv_right(w, y, w[j], h, kcode)
    return out


@njit(cache=True)
def local_left(w, y, h, kcode):
    out = np.empty(w.shape[0])
    for j in range(w.shape[0]):
        out[j] = conv_left(w, y, w[j], h, kcode)
    return out


@njit(cache=True)
def robust_right(w, y, x, h, kcode, scode, mstar):
    """Double-kernel right estimate at x; ``mstar[j]`` is conv_right at w[j]."""
    anchor = conv_right(w, y, x + h, h, kcode)
    if np.isnan(anchor):
        return np.nan
    i0, i1 = _window(w, x, x + h)
    rho = 0.0
    for j in range(i0, i1):
        if w[j] >= x and w[j] <= x + h and not np.isnan(mstar[j]):
            d = abs(mstar[j] - anchor)
            if d > rho:
                rho = d
    num = 0.0
    den = 0.0
    plain = 0.0
    for j in range(i0, i1):
        if np.isnan(mstar[j]):
            continue
        kw = right_kernel(kcode, (w[j] - x) / h)
        if kw == 0.0:
            continue
        if rho > 0.0:
            ks = right_kernel(scode, abs(mstar[j] - anchor) / rho)
        else:
            ks = right_kernel(scode, 0.0)
        num += y[j] * kw * ks
        den += kw * ks
        plain += kw
    if den > 0.0:
        return num / den
    if plain > 0.0:
        # every K* factor vanished: no discrimination signal, use plain weights
        return conv_right(w, y, x, h, kcode)
    return np.nan


@njit(cache=True)
def robust_left(w, y, x, h, kcode, scode, mstar):
    """Mirror of :func:`robust_right`; ``mstar[j]`` is conv_left at w[j]."""
    anchor = conv_left(w, y, x - h, h, kcode)
    if np.isnan(anchor):
        return np.nan
    i0, i1 = _window(w, x - h, x)
    rho = 0.0
    for j in range(i0, i1):
        if w[j] >= x - h and w[j] <= x and not np.isnan(mstar[j]):
            d = abs(mstar[j] - anchor)
            if d > rho:
                rho = d
    num = 0.0
    den = 0.0
    plain = 0.0
    for j in range(i0, i1):
        if np.isnan(mstar[j]):
            continue
        kw = right_kernel(kcode, -((w[j] - x) / h))
        if kw == 0.0:
            continue
        if rho > 0.0:
            ks = right_kernel(scode, abs(mstar[j] - anchor) / rho)
        else:
            ks = right_kernel(scode, 0.0)
        num += y[j] * kw * ks
        den += kw * ks
        plain += kw
    if den > 0.0:
        return num / den
    if plain > 0.0:
        return conv_left(w, y, x, h, kcode)
    return np.nan


@njit(cache=True)
def one_sided_curves(w, y, grid, h, kcode, scode, robust):
    """Right and left estimates at every grid point (NaN where undefined).

    ``robust`` selects the double-kernel estimator; otherwise the plain
    one-sided kernel averages are returned.
    """
    g = grid.shape[0]
    right = np.empty(g)
    left = np.empty(g)
    if robust:
        ms_r = local_right(w, y, h, kcode)
        ms_l = local_left(w, y, h, kcode)
        for i in range(g):
            right[i] = robust_right(w, y, grid[i], h, kcode, scode, ms_r)
            left[i] = robust_left(w, y, grid[i], h, kcode, scode, ms_l)
    else:
        for i in range(g):
            right[i] = conv_right(w, y, grid[i], h, kcode)
            left[i] = conv_left(w, y, grid[i], h, kcode)
    return right, left


@njit(cache=True)
def argmax_jump(right, left, tol):
    """Index of the largest |right - left|, smallest index within ``tol`` of the max; -1 if none."""
    best = -1.0
    for i in range(right.shape[0]):
        if np.isnan(right[i]) or np.isnan(left[i]):
            continue
        d = abs(right[i] - left[i])
        if d > best:
            best = d
    if best < 0.0:
        return -1
    for i in range(right.shape[0]):
        if np.isnan(right[i]) or np.isnan(left[i]):
            continue
        if abs(right[i] - left[i]) >= best - tol:
            return i
    return -1


@njit(cache=True)
def bootstrap_locations(w, y, idx, grid, h, kcode, scode, robust, tol):
    """Jump location for each resample ``idx[k]`` (rows of indices into w, y)."""
    B = idx.shape[0]
    out = np.empty(B)
    for k in range(B):
        ws = w[idx[k]]
        ys = y[idx[k]]
        order = np.argsort(ws, kind="mergesort")
        ws = ws[order]
        ys = ys[order]
        right, left = one_sided_curves(ws, ys, grid, h, kcode, scode, robust)
        i = argmax_jump(right, left, tol)
        out[k] = grid[i] if i >= 0 else np.nan
    return out
