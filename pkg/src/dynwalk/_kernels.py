"""Compiled event loops.

Every kernel takes the initial increments ``x`` (copied, never mutated),
the event coordinates and the replacement deviates in event order.  The
running sum is updated incrementally and recomputed exactly every
``resum_every`` events.
"""

import numpy as np
from numba import njit

RESUM_EVERY = 1 << 16


@njit(cache=True)
def walk_values(x0, coords, repl, resum_every):
    x = x0.copy()
    m = coords.shape[0]
    out = np.empty(m + 1)
    s = np.sum(x)
    out[0] = s
    for k in range(m):
        c = coords[k]
        s += repl[k] - x[c]
        x[c] = repl[k]
        if (k + 1) % resum_every == 0:
            s = np.sum(x)
        out[k + 1] = s
    return out


@njit(cache=True)
def walk_values_brute(x0, coords, repl):
    x = x0.copy()
    m = coords.shape[0]
    out = np.empty(m + 1)
    out[0] = np.sum(x)
    for k in range(m):
        x[coords[k]] = repl[k]
        out[k + 1] = np.sum(x)
    return out


@njit(cache=True)
def sup_and_occupation(x0, times, coords, repl, horizon, level, resum_every):
    """Path supremum on [0, horizon] and time spent at or above ``level``."""
    x = x0.copy()
    m = coords.shape[0]
    s = np.sum(x)
    best = s
    occ = 0.0
    last = 0.0
    for k in range(m):
        t = times[k]
        if s >= level:
            occ += t - last
        last = t
        c = coords[k]
        s += repl[k] - x[c]
        x[c] = repl[k]
        if (k + 1) % resum_every == 0:
            s = np.sum(x)
        if s > best:
            best = s
    if s >= level:
        occ += horizon - last
    return best, occ


@njit(cache=True)
def path_sup_only(x0, coords, repl, resum_every):
    x = x0.copy()
    m = coords.shape[0]
    s = np.sum(x)
    best = s
    for k in range(m):
        c = coords[k]
        s += repl[k] - x[c]
        x[c] = repl[k]
        if (k + 1) % resum_every == 0:
            s = np.sum(x)
        if s > best:
            best = s
    return best


@njit(cache=True)
def values_at(x0, times, coords, repl, query, resum_every):
    """Path value in force at each sorted query time (events at q included)."""
    x = x0.copy()
    m = coords.shape[0]
    out = np.empty(query.shape[0])
    s = np.sum(x)
    k = 0
    for i in range(query.shape[0]):
        q = query[i]
        while k < m and times[k] <= q:
            c = coords[k]
            s += repl[k] - x[c]
            x[c] = repl[k]
            k += 1
            if k % resum_every == 0:
                s = np.sum(x)
        out[i] = s
    return out


@njit(cache=True)
def prefix_sums_at(x0, times, coords, repl, s_query, k_index):
    """``out[i, j] = sum(x[:k_index[j]])`` at dynamical time ``s_query[i]``."""
    x = x0.copy()
    m = coords.shape[0]
    out = np.empty((s_query.shape[0], k_index.shape[0]))
    k = 0
    for i in range(s_query.shape[0]):
        q = s_query[i]
        while k < m and times[k] <= q:
            x[coords[k]] = repl[k]
            k += 1
        csum = 0.0
        pos = 0
        for j in range(k_index.shape[0]):
            target = k_index[j]
            while pos < target:
                csum += x[pos]
                pos += 1
            out[i, j] = csum
    return out


# -- maximal prefix sums ------------------------------------------------------
#
# Node i stores (sum, best) for its range, where best is the largest sum of a
# nonempty prefix of that range.  Leaves sit at size + j for a power-of-two size;
# padding leaves carry (0, -inf) so they never win.


@njit(cache=True)
def tree_build(x):
    n = x.shape[0]
    size = 1
    while size < n:
        size *= 2
    tsum = np.zeros(2 * size)
    tbest = np.full(2 * size, -np.inf)
    for j in range(n):
        tsum[size + j] = x[j]
        tbest[size + j] = x[j]
    for i in range(size - 1, 0, -1):
        l = 2 * i
        r = l + 1
        tsum[i] = tsum[l] + tsum[r]
        tbest[i] = max(tbest[l], tsum[l] + tbest[r])
    return tsum, tbest, size


@njit(cache=True)
def tree_update(tsum, tbest, size, j, value):
    i = size + j
    tsum[i] = value
    tbest[i] = value
    i //= 2
    while i >= 1:
        l = 2 * i
        r = l + 1
        tsum[i] = tsum[l] + tsum[r]
        tbest[i] = max(tbest[l], tsum[l] + tbest[r])
        i //= 2


@njit(cache=True)
def running_max_tree(x0, coords, repl):
    """sup over the path of max_{1 <= k <= n} (x_1 + ... + x_k)."""
    tsum, tbest, size = tree_build(x0)
    best = tbest[1]
    for k in range(coords.shape[0]):
        tree_update(tsum, tbest, size, coords[k], repl[k])
        if tbest[1] > best:
            best = tbest[1]
    return best


@njit(cache=True)
def running_max_scan(x0, coords, repl):
    x = x0.copy()
    best = -np.inf
    for k in range(coords.shape[0] + 1):
        if k > 0:
            x[coords[k - 1]] = repl[k - 1]
        acc = 0.0
        for j in range(x.shape[0]):
            acc += x[j]
            if acc > best:
                best = acc
    return best


@njit(cache=True)
def multilevel_sup(x0, coords, repl, level_ends, block_of_coord, resum_every):
    """Path suprema of the partial sums ``S_{level_ends[j]}`` for every j.

    ``block_of_coord[c]`` is the first level whose end exceeds ``c``; an event
    on ``c`` moves that block and every partial sum from it upward.
    """
    x = x0.copy()
    nl = level_ends.shape[0]
    blocks = np.zeros(nl)
    start = 0
    for j in range(nl):
        blocks[j] = np.sum(x[start:level_ends[j]])
        start = level_ends[j]
    part = np.cumsum(blocks)
    best = part.copy()
    for k in range(coords.shape[0]):
        c = coords[k]
        d = repl[k] - x[c]
        x[c] = repl[k]
        b = block_of_coord[c]
        if (k + 1) % resum_every == 0:
            start = 0
            for j in range(nl):
                blocks[j] = np.sum(x[start:level_ends[j]])
                start = level_ends[j]
            acc = 0.0
            for j in range(nl):
                acc += blocks[j]
                part[j] = acc
                if acc > best[j]:
                    best[j] = acc
            continue
        blocks[b] += d
        for j in range(b, nl):
            part[j] += d
            if part[j] > best[j]:
                best[j] = part[j]
    return best
