"""Compiled inner loops of the exact greedy tree builder.

``S`` is a ``(n_features, m)`` int32 array: row ``j`` lists the node's
sample indices sorted by feature ``j``.  ``XT`` is the transposed design
matrix, ``(n_features, n_samples)``.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def best_split(XT, g, S, min_leaf):
    """Return ``(gain, feature, position)``; feature is -1 when no cut is valid.

    Cutting after ``position`` sends the first ``position + 1`` sorted rows
    left.  Gain is the variance reduction ``SL^2/nL + SR^2/nR - S^2/m``.
    Ties keep the lowest feature, then the lowest position.
    """
    d, m = S.shape
    total = 0.0
    for i in range(m):
        total += g[S[0, i]]
    base = total * total / m
    best_gain = -np.inf
    best_f = -1
    best_pos = -1
    for j in range(d):
        left = 0.0
        for i in range(m - 1):
            left += g[S[j, i]]
            n_left = i + 1
            n_right = m - n_left
            if n_left < min_leaf or n_right < min_leaf:
                continue
            if not XT[j, S[j, i]] < XT[j, S[j, i + 1]]:
                continue
            right = total - left
            gain = left * left / n_left + right * right / n_right - base
            if gain > best_gain:
                best_gain = gain
                best_f = j
                best_pos = i
    return best_gain, best_f, best_pos


@numba.njit(cache=True)
def partition(S, go_left):
    """Stable split of every sorted row list by the boolean ``go_left[sample]``."""
    d, m = S.shape
    n_left = 0
    for i in range(m):
        if go_left[S[0, i]]:
            n_left += 1
    S_left = np.empty((d, n_left), dtype=S.dtype)
    S_right = np.empty((d, m - n_left), dtype=S.dtype)
    for j in range(d):
        a = 0
        b = 0
        for i in range(m):
            s = S[j, i]
            if go_left[s]:
                S_left[j, a] = s
                a += 1
            else:
                S_right[j, b] = s
                b += 1
    return S_left, S_right
