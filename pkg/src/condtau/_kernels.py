"""Compiled pair-counting kernels.

All counts are exact integers; strict inequalities everywhere, so a tie in
either coordinate makes a pair neither concordant nor discordant.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def concordance_counts(x, y):
    """(concordant, discordant) unordered-pair counts by direct enumeration."""
    n = x.shape[0]
    conc = 0
    disc = 0
    for i in range(n):
        xi = x[i]
        yi = y[i]
        for j in range(i + 1, n):
            dx = x[j] - xi
            dy = y[j] - yi
            if (dx > 0 and dy > 0) or (dx < 0 and dy < 0):
                conc += 1
            elif (dx > 0 and dy < 0) or (dx < 0 and dy > 0):
                disc += 1
    return conc, disc


@njit(cache=True)
def concordant_partners(x, y):
    """For every point, the number of other points strictly concordant with it."""
    n = x.shape[0]
    out = np.zeros(n, dtype=np.int64)
    for i in range(n):
        xi = x[i]
        yi = y[i]
        for j in range(i + 1, n):
            dx = x[j] - xi
            dy = y[j] - yi
            if (dx > 0 and dy > 0) or (dx < 0 and dy < 0):
                out[i] += 1
                out[j] += 1
    return out


@njit(cache=True)
def _strict_inversions(values, buf):
    """Merge sort ``values`` in place, returning #{i < j : values[i] > values[j]}."""
    n = values.shape[0]
    count = 0
    width = 1
    src = values
    dst = buf
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i = lo
            j = mid
            k = lo
            while i < mid and j < hi:
                if src[j] < src[i]:
                    dst[k] = src[j]
                    count += mid - i
                    j += 1
                else:
                    dst[k] = src[i]
                    i += 1
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < hi:
                dst[k] = src[j]
                j += 1
                k += 1
        src, dst = dst, src
        width *= 2
    return count


@njit(cache=True)
def _tied_pairs(sorted_values):
    total = 0
    run = 1
    for i in range(1, sorted_values.shape[0]):
        if sorted_values[i] == sorted_values[i - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    total += run * (run - 1) // 2
    return total


@njit(cache=True)
def _joint_tied_pairs(xs, ys):
    total = 0
    run = 1
    for i in range(1, xs.shape[0]):
        if xs[i] == xs[i - 1] and ys[i] == ys[i - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    total += run * (run - 1) // 2
    return total


@njit(cache=True)
def _fast_counts_sorted(xs, ys):
    # xs, ys ordered lexicographically by (x, y)
    n = xs.shape[0]
    total = n * (n - 1) // 2
    tied_x = _tied_pairs(xs)
    tied_both = _joint_tied_pairs(xs, ys)
    work = ys.copy()
    buf = np.empty_like(work)
    disc = _strict_inversions(work, buf)
    tied_y = _tied_pairs(np.sort(ys))
    conc = total - tied_x - tied_y + tied_both - disc
    return conc, disc


def fast_concordance_counts(x, y):
    """(concordant, discordant) counts in O(N log N), exact with ties."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] < 2:
        return 0, 0
    order = np.lexsort((y, x))
    return _fast_counts_sorted(np.ascontiguousarray(x[order]), np.ascontiguousarray(y[order]))


@njit(cache=True)
def split_balances(a, b):
    """Concordant-minus-discordant counts of every prefix and suffix.

    ``a`` and ``b`` are the two conditioned coordinates, already ordered by
    the splitting coordinate.  ``prefix[L]`` covers points ``0..L-1`` and
    ``suffix[L]`` covers points ``L..N-1``.
    """
    n = a.shape[0]
    prefix = np.zeros(n + 1, dtype=np.int64)
    suffix = np.zeros(n + 1, dtype=np.int64)
    for L in range(1, n + 1):
        j = L - 1
        s = 0
        for i in range(j):
            da = a[j] - a[i]
            db = b[j] - b[i]
            if (da > 0 and db > 0) or (da < 0 and db < 0):
                s += 1
            elif (da > 0 and db < 0) or (da < 0 and db > 0):
                s -= 1
        prefix[L] = prefix[L - 1] + s
    for L in range(n - 1, -1, -1):
        s = 0
        for i in range(L + 1, n):
            da = a[i] - a[L]
            db = b[i] - b[L]
            if (da > 0 and db > 0) or (da < 0 and db < 0):
                s += 1
            elif (da > 0 and db < 0) or (da < 0 and db > 0):
                s -= 1
        suffix[L] = suffix[L + 1] + s
    return prefix, suffix


@njit(cache=True)
def sign_products(a, b):
    """``S[i, j] = sign(a_j - a_i) * sign(b_j - b_i)`` as float64 (exact small ints)."""
    n = a.shape[0]
    out = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            da = a[j] - a[i]
            db = b[j] - b[i]
            s = 0.0
            if (da > 0 and db > 0) or (da < 0 and db < 0):
                s = 1.0
            elif (da > 0 and db < 0) or (da < 0 and db > 0):
                s = -1.0
            out[i, j] = s
            out[j, i] = s
    return out
