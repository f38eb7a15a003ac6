"""Jitted inner loop for the incremental-update engine.

The hot path keeps a binary max-tournament over the per-site signals so a
step costs O(log n) instead of an O(n) rescan. Leaves live at tree[m2+j]
(padding leaves hold -1.0, below any valid signal); parents hold the max of
their children with left preference on ties, so descending the tree finds
the lowest argmax index, matching np.argmax on the signal array bit for bit.

All arithmetic is plain IEEE double with no fastmath, so the trajectory is
bitwise identical to the pure-numpy rescan engine fed the same draw stream.
"""

import numpy as np
from numba import njit, uint64

U64 = np.uint64


@njit(cache=True, nogil=True, inline="always")
def _splitmix64(x):
    z = x + uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return z ^ (z >> uint64(31))


@njit(cache=True, nogil=True)
def tree_build(signals, tree, m2):
    n = signals.shape[0]
    for i in range(m2):
        tree[m2 + i] = signals[i] if i < n else -1.0
    for i in range(m2 - 1, 0, -1):
        left = tree[2 * i]
        right = tree[2 * i + 1]
        tree[i] = left if left >= right else right


@njit(cache=True, nogil=True, inline="always")
def _tree_update(tree, m2, j, val):
    i = m2 + j
    tree[i] = val
    i >>= 1
    while i >= 1:
        left = tree[2 * i]
        right = tree[2 * i + 1]
        v = left if left >= right else right
        if tree[i] == v:
            break
        tree[i] = v
        i >>= 1


@njit(cache=True, nogil=True, inline="always")
def _tree_argmax(tree, m2):
    i = 1
    while i < m2:
        i <<= 1
        if tree[i] < tree[i + 1]:
            i += 1
    return i - m2


@njit(cache=True, nogil=True, inline="always")
def _site_signal(returns, j, m):
    jp = j + 1
    if jp == m:
        jp = 0
    jm = j - 1
    if jm < 0:
        jm = m - 1
    return abs(returns[j] * (returns[jp] - returns[jm]))


@njit(cache=True, nogil=True)
def run_chunk(returns, signals, tree, m2, hits, sqrt_w, z, nsteps, step0,
              tie_mode, tie_salt,
              trace,
              ent_every, ent_s, ent_v, ent_n,
              hit_lo, hit_hi, hit_s, hit_j, hit_n):
    """Advance the lattice by nsteps, consuming 3 standard normals per step.

    Optional outputs (enabled by nonzero buffer sizes / cadence):
      trace[i]    signal after step i
      ent_*       entropy samples at step multiples of ent_every
      hit_*       (s, j) replacement events with hit_lo <= s <= hit_hi

    Returns (ent_n, hit_n, err) with updated buffer counts; err is 1 when a
    return magnitude tripped the exp-overflow guard during entropy sampling.
    """
    m = returns.shape[0]
    record_trace = trace.shape[0] > 0
    record_hits = hit_s.shape[0] > 0
    en = ent_n
    hn = hit_n
    err = 0
    for i in range(nsteps):
        s = step0 + i + 1
        if tie_mode == 0:
            js = _tree_argmax(tree, m2)
        else:
            vmax = tree[1]
            c = 0
            for j in range(m):
                if signals[j] == vmax:
                    c += 1
            if c <= 1:
                js = _tree_argmax(tree, m2)
            else:
                t = _splitmix64(uint64(tie_salt) ^ uint64(s)) % uint64(c)
                js = 0
                k = uint64(0)
                for j in range(m):
                    if signals[j] == vmax:
                        if k == t:
                            js = j
                            break
                        k += uint64(1)

        xm = sqrt_w * z[3 * i]
        x0 = sqrt_w * z[3 * i + 1]
        xp = sqrt_w * z[3 * i + 2]
        mean = (xm + x0 + xp) / 3.0
        xm -= mean
        x0 -= mean
        xp -= mean

        jm = js - 1
        if jm < 0:
            jm = m - 1
        jp = js + 1
        if jp == m:
            jp = 0
        returns[jm] = xm
        returns[js] = x0
        returns[jp] = xp
        hits[jm] += 1
        hits[js] += 1
        hits[jp] += 1

        j2m = jm - 1
        if j2m < 0:
            j2m = m - 1
        j2p = jp + 1
        if j2p == m:
            j2p = 0
        for jj in (j2m, jm, js, jp, j2p):
            val = _site_signal(returns, jj, m)
            signals[jj] = val
            _tree_update(tree, m2, jj, val)

        if record_trace:
            trace[i] = tree[1]
        if record_hits and hit_lo <= s <= hit_hi:
            hit_s[hn] = s
            hit_j[hn] = jm
            hit_s[hn + 1] = s
            hit_j[hn + 1] = js
            hit_s[hn + 2] = s
            hit_j[hn + 2] = jp
            hn += 3
        if ent_every > 0 and s % ent_every == 0:
            acc = 0.0
            for j in range(1, m):
                r = returns[j]
                if r > 700.0 or r < -700.0:
                    err = 1
                acc += r * np.exp(r)
            ent_s[en] = s
            ent_v[en] = acc / (m - 1)
            en += 1
    return en, hn, err
