"""Compiled inner loops.

Conventions: ``F`` is a (lines x columns) float matrix, row 0 is the top
line, and a last passage path moves right along a row or jumps up to a
smaller row at a column. All kernels release the GIL.
"""

import numpy as np
from numba import njit

NEG = -np.inf


@njit(cache=True, nogil=True)
def forward_table(F, c0, r0, c1, r1):
    """V[r - r1, c - c0] = last passage value from (c0, row r0) to (c, row r)."""
    rows = r0 - r1 + 1
    cols = c1 - c0 + 1
    V = np.empty((rows, cols))
    for k in range(cols):
        c = c0 + k
        for i in range(rows - 1, -1, -1):
            r = r1 + i
            if k == 0:
                best = 0.0 if i == rows - 1 else NEG
            else:
                best = V[i, k - 1] + (F[r, c] - F[r, c - 1])
            if i < rows - 1 and V[i + 1, k] > best:
                best = V[i + 1, k]
            V[i, k] = best
    return V


@njit(cache=True, nogil=True)
def forward_profile(F, c0, r0, r_target):
    """Values from (c0, row r0) to (c, row r_target) for every c >= c0."""
    cols = F.shape[1] - c0
    rows = r0 - r_target + 1
    V = np.full(rows, NEG)
    out = np.empty(cols)
    for k in range(cols):
        c = c0 + k
        for i in range(rows - 1, -1, -1):
            r = r_target + i
            if k == 0:
                best = 0.0 if i == rows - 1 else NEG
            else:
                best = V[i] + (F[r, c] - F[r, c - 1])
            if i < rows - 1 and V[i + 1] > best:
                best = V[i + 1]
            V[i] = best
        out[k] = V[0]
    return out


@njit(cache=True, nogil=True)
def backward_profile(F, c1, r1, r_bottom):
    """Values from (c, row r_bottom) to (c1, row r1) for every c <= c1."""
    rows = r_bottom - r1 + 1
    W = np.full(rows, NEG)
    out = np.empty(c1 + 1)
    for c in range(c1, -1, -1):
        for i in range(rows):
            r = r1 + i
            if c == c1:
                best = 0.0 if i == 0 else NEG
            else:
                best = W[i] + (F[r, c + 1] - F[r, c])
            if i > 0 and W[i - 1] > best:
                best = W[i - 1]
            W[i] = best
        out[c] = W[rows - 1]
    return out


@njit(cache=True, nogil=True)
def backtrack(F, V, c0, r0, c1, r1, rightmost):
    """Jump columns of an optimal path, ordered from the start line upwards.

    Rightmost paths take the vertical move whenever it attains the maximum;
    leftmost paths take the horizontal move whenever it does. Both compare
    bit-identical recomputations of the recorded sums.
    """
    rows = r0 - r1 + 1
    jumps = np.empty(rows - 1, dtype=np.int64)
    i = 0
    k = c1 - c0
    while i < rows - 1:
        c = c0 + k
        r = r1 + i
        if k == 0:
            vertical = True
        elif rightmost:
            vertical = V[i + 1, k] >= V[i, k]
        else:
            vertical = V[i, k - 1] + (F[r, c] - F[r, c - 1]) != V[i, k]
        if vertical:
            # transition from row r + 1 to row r happens at column c
            jumps[rows - 2 - i] = c
            i += 1
        else:
            k -= 1
    return jumps


@njit(cache=True, nogil=True)
def min_forward_table(F, c0, r0, c1, r1):
    """First passage table for paths moving *down* (row index increasing).

    U[r - r0, c - c0] = min over nondecreasing-row paths from (c0, row r0)
    to (c, row r) of the summed increments; r ranges over r0..r1 with r1 >= r0.
    """
    rows = r1 - r0 + 1
    cols = c1 - c0 + 1
    U = np.empty((rows, cols))
    for k in range(cols):
        c = c0 + k
        for i in range(rows):
            r = r0 + i
            if k == 0:
                best = 0.0 if i == 0 else np.inf
            else:
                best = U[i, k - 1] + (F[r, c] - F[r, c - 1])
            if i > 0 and U[i - 1, k] < best:
                best = U[i - 1, k]
            U[i, k] = best
    return U


@njit(cache=True, nogil=True)
def sort_pair_grid(F, a, b):
    """In-place pairwise sort of rows a (upper) and b (lower) on grid points only."""
    f10 = F[a, 0]
    f20 = F[b, 0]
    G = NEG
    for j in range(F.shape[1]):
        d = F[b, j] - F[a, j]
        if d > G:
            G = d
        x1 = F[a, j]
        x2 = F[b, j]
        F[a, j] = x1 - f20 + G
        F[b, j] = x2 - f10 - G


@njit(cache=True, nogil=True)
def melon_grid(F, word):
    """Apply the pairwise sorts listed in ``word`` (upper row indices) in order."""
    for idx in range(word.shape[0]):
        a = word[idx]
        sort_pair_grid(F, a, a + 1)
    return F


@njit(cache=True, nogil=True)
def top_eigen_lpp(inc):
    """Last passage value from (0, bottom row) to (end, top row) given increments."""
    n, m = inc.shape
    V = np.zeros(n)
    for j in range(m):
        for k in range(n):
            V[k] += inc[k, j]
        for k in range(n - 2, -1, -1):
            if V[k + 1] > V[k]:
                V[k] = V[k + 1]
    return V[0]
