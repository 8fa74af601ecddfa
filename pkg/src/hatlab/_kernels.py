"""Numba kernels for random-walk Monte Carlo.

Near the target set, walks are stepped exactly, one lattice step at a time,
with a per-(walk, visit) counter-based RNG stream so results are bitwise
reproducible regardless of batching. Far-field propagation of d >= 3 walks
is handled outside these kernels (vectorized numpy multi-step jumps).

d = 2 walks are handled entirely in-kernel: "safe" jumps of m < dist(pos, A)
steps can never reach A mid-jump, so hit detection stays exact. All binomial
draws needed in d = 2 have p = 1/2 and are sampled exactly by popcounting
random bits.
"""

import numpy as np
from numba import njit

# walk status codes
ACTIVE = -1
HIT = 0
ESCAPED = 1
EXHAUSTED = 2

M64 = np.uint64(0xFFFFFFFFFFFFFFFF)


@njit(cache=True, inline="always")
def _splitmix64(z):
    z = (z + np.uint64(0x9E3779B97F4A7C15)) & M64
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & M64
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & M64
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _stream_seed(seed, walk, visit):
    v = (np.uint64(walk) << np.uint64(20)) | np.uint64(visit)
    return _splitmix64(np.uint64(seed) ^ _splitmix64(v))


@njit(cache=True, inline="always")
def _next(state):
    """splitmix64 stream: advance the counter, output the mixed value."""
    s = (state + np.uint64(0x9E3779B97F4A7C15)) & M64
    z = ((s ^ (s >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & M64
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & M64
    return s, z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(cache=True, inline="always")
def _binomial_half(state, n):
    """Exact Binomial(n, 1/2) by popcounting n random bits."""
    total = np.uint64(0)
    while n >= 64:
        state, bits = _next(state)
        total += _popcount(bits)
        n -= 64
    if n > 0:
        state, bits = _next(state)
        total += _popcount(bits & ((np.uint64(1) << np.uint64(n)) - np.uint64(1)))
    return state, np.int64(total)


@njit(cache=True, inline="always")
def _dmin2_argmin(A, pos):
    n, d = A.shape
    best = np.inf
    arg = -1
    for i in range(n):
        s = 0.0
        for j in range(d):
            diff = float(A[i, j] - pos[j])
            s += diff * diff
        if s < best:
            best = s
            arg = i
    return best, arg


@njit(cache=True, inline="always")
def _draw_move(state, pend, have, two_d_u):
    """Uniform move in [0, 2d) via multiply-shift on 32-bit halves of one
    64-bit word (two moves per RNG call; per-direction relative bias is
    at most 2d / 2^32). Returns (state, move, pend, have)."""
    if have:
        return state, pend, pend, False
    state, bits = _next(state)
    mv = np.int64(((bits >> np.uint64(32)) * two_d_u) >> np.uint64(32))
    pd = np.int64(((bits & np.uint64(0xFFFFFFFF)) * two_d_u) >> np.uint64(32))
    return state, mv, pd, True


@njit(cache=True, fastmath=True)
def near_kernel(A, keys, gmin, gext, pos, steps, status, presite, hit_idx,
                idx, visit, center, R2, thr2, max_steps, seed, check_R,
                dmin2_out):
    """Advance each walk in `idx` until it hits A, escapes past R, exhausts
    its budget, or is (or becomes) outside the near field — in that case the
    walk stays ACTIVE and its current squared distance to A is written to
    `dmin2_out` for the caller's far-field jump. Mutates
    pos/steps/status/presite/hit_idx/dmin2_out.

    At distance dmin >= 2 from A the walk advances by exact safe jumps of
    m < dmin unchecked unit steps (it cannot reach A mid-jump); adjacent to
    A it steps one site at a time with per-step hit detection via
    packed-coordinate compares against `keys` (12 bits per axis relative to
    the bounding box corner `gmin`, extents `gext`). When `check_R` is
    False the caller guarantees the escape circle cannot be reached from
    the near field, so the radius test is skipped.
    """
    n, d = A.shape
    two_d_u = np.uint64(2 * d)
    for kk in range(idx.size):
        w = idx[kk]
        pw = pos[w]
        state = _stream_seed(seed, w, visit)
        pend = np.int64(0)
        have = False
        st = steps[w]
        out = ACTIVE
        while True:
            dmin2, _arg = _dmin2_argmin(A, pw)
            if dmin2 == 0.0 and visit > 0:
                # A far-field jump landed exactly on A: a hit with unknown
                # pre-site (covered by the caller's jump bias bound). Only
                # possible at entry after a jump; at visit 0 walks may
                # legitimately start on A.
                out = HIT
                hit_idx[w] = _arg
                for j in range(d):
                    presite[w, j] = pw[j]
                break
            if st >= max_steps:
                out = EXHAUSTED
                break
            if dmin2 >= thr2:
                dmin2_out[w] = dmin2
                break  # back to the far field
            if check_R:
                rc2 = 0.0
                for j in range(d):
                    diff = float(pw[j]) - center[j]
                    rc2 += diff * diff
                if rc2 >= R2:
                    out = ESCAPED
                    break
            if dmin2 >= 4.0:
                # Safe jump: m unchecked steps with m < dist(pos, A).
                m = np.int64(np.sqrt(dmin2))
                if m * m == np.int64(dmin2):
                    m -= 1
                if st + m > max_steps:
                    m = max_steps - st
                for _s in range(m):
                    state, move, pend, have = _draw_move(
                        state, pend, have, two_d_u)
                    if move & 1:
                        pw[move >> 1] += 1
                    else:
                        pw[move >> 1] -= 1
                st += m
                continue
            # Adjacent zone: exact per-step hit detection. Checked steps
            # are valid anywhere, so the zone scan above only runs once
            # per short block of steps.
            for _blk in range(4):
                state, move, pend, have = _draw_move(state, pend, have,
                                                     two_d_u)
                axis = move >> 1
                prev_val = pw[axis]
                if move & 1:
                    pw[axis] = prev_val + 1
                else:
                    pw[axis] = prev_val - 1
                st += 1
                key = np.int64(0)
                inside = True
                for j in range(d):
                    c = pw[j] - gmin[j]
                    if c < 0 or c >= gext[j]:
                        inside = False
                        break
                    key = (key << 12) | c
                if inside:
                    for i in range(n):
                        if keys[i] == key:
                            out = HIT
                            hit_idx[w] = i
                            for j in range(d):
                                presite[w, j] = pw[j]
                            presite[w, axis] = prev_val
                            break
                    if out == HIT:
                        break
            if out == HIT:
                break
        steps[w] = st
        status[w] = out


@njit(cache=True, inline="always")
def _safe_jump_2d(state, pos, dmin2):
    """One exact m-step increment with m < dist(pos, A): cannot reach A."""
    m = np.int64(np.sqrt(dmin2)) - 1
    if m < 1:
        m = 1
    state, k1 = _binomial_half(state, m)
    state, h1 = _binomial_half(state, k1)
    state, h2 = _binomial_half(state, m - k1)
    pos[0] += 2 * h1 - k1
    pos[1] += 2 * h2 - (m - k1)
    return state, m


@njit(cache=True, inline="always")
def _reinject_2d(state, pos, center, radius):
    """A walk outside `radius` re-enters on that circle with the exterior
    Poisson-kernel (wrapped Cauchy) angle law of Brownian motion; the
    lattice correction at the circle is O(1/radius)."""
    dx = float(pos[0]) - center[0]
    dy = float(pos[1]) - center[1]
    rho = np.sqrt(dx * dx + dy * dy)
    theta = np.arctan2(dy, dx)
    r = radius / rho
    state, bits = _next(state)
    u = (bits >> np.uint64(11)) * (2.0 ** -53)
    phi = 2.0 * np.arctan(((1.0 - r) / (1.0 + r)) * np.tan(np.pi * (u - 0.5)))
    pos[0] = np.int64(np.rint(center[0] + radius * np.cos(theta + phi)))
    pos[1] = np.int64(np.rint(center[1] + radius * np.sin(theta + phi)))
    return state


@njit(cache=True)
def hm2d_kernel(A, center, start_radius, max_steps, num_walks, seed):
    """d=2 harmonic measure: walks start uniformly on the circle of
    start_radius around `center` and run until hitting A (safe jumps far
    out, exact steps near). Returns (hit_idx, exhausted)."""
    n, d = A.shape
    hit_idx = np.full(num_walks, -1, dtype=np.int64)
    exhausted = 0
    pos = np.empty(d, dtype=np.int64)
    reinject_radius = 4.0 * start_radius
    rr2 = reinject_radius * reinject_radius
    for w in range(num_walks):
        state = _stream_seed(seed, w, 0)
        state, bits = _next(state)
        theta = (bits >> np.uint64(11)) * (2.0 ** -53) * 2.0 * np.pi
        pos[0] = np.int64(np.rint(center[0] + start_radius * np.cos(theta)))
        pos[1] = np.int64(np.rint(center[1] + start_radius * np.sin(theta)))
        steps = 0
        while steps < max_steps:
            dx = float(pos[0]) - center[0]
            dy = float(pos[1]) - center[1]
            if dx * dx + dy * dy > rr2:
                state = _reinject_2d(state, pos, center, reinject_radius)
            dmin2, arg = _dmin2_argmin(A, pos)
            if dmin2 == 0.0:
                hit_idx[w] = arg
                break
            if dmin2 >= 16.0:
                state, m = _safe_jump_2d(state, pos, dmin2)
                steps += m
            else:
                state, bits = _next(state)
                move = np.int64(bits & np.uint64(3))
                axis = move >> 1
                if move & 1:
                    pos[axis] += 1
                else:
                    pos[axis] -= 1
                steps += 1
        if hit_idx[w] < 0:
            exhausted += 1
    return hit_idx, exhausted


@njit(cache=True)
def transport2d_kernel(A, x0, center, reinject_radius, max_steps, num_walks, seed):
    """d=2 transport: walks from x0 until hitting A (recurrent). Excursions
    beyond reinject_radius are collapsed by Brownian re-injection. Returns
    (codes, presites, hit_idx)."""
    n, d = A.shape
    codes = np.empty(num_walks, dtype=np.int8)
    presites = np.zeros((num_walks, d), dtype=np.int64)
    hit_idx = np.full(num_walks, -1, dtype=np.int64)
    pos = np.empty(d, dtype=np.int64)
    prev = np.empty(d, dtype=np.int64)
    rr2 = reinject_radius * reinject_radius
    for w in range(num_walks):
        state = _stream_seed(seed, w, 0)
        pos[0] = x0[0]
        pos[1] = x0[1]
        steps = 0
        code = EXHAUSTED
        while steps < max_steps:
            dx = float(pos[0]) - center[0]
            dy = float(pos[1]) - center[1]
            if dx * dx + dy * dy > rr2:
                state = _reinject_2d(state, pos, center, reinject_radius)
            dmin2, arg = _dmin2_argmin(A, pos)
            if dmin2 == 0.0:
                code = HIT
                hit_idx[w] = arg
                presites[w, 0] = prev[0]
                presites[w, 1] = prev[1]
                break
            if dmin2 >= 16.0:
                state, m = _safe_jump_2d(state, pos, dmin2)
                steps += m
            else:
                prev[0] = pos[0]
                prev[1] = pos[1]
                state, bits = _next(state)
                move = np.int64(bits & np.uint64(3))
                axis = move >> 1
                if move & 1:
                    pos[axis] += 1
                else:
                    pos[axis] -= 1
                steps += 1
        codes[w] = code
    return codes, presites, hit_idx
