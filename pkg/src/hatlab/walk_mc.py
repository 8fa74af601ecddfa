"""Monte Carlo random-walk estimators.

These estimators are an independent oracle for the exact potential-theory
solvers: they never consult a Green's function to move walks (only to report
an a-priori truncation bias bound), and they are the only available engine
in d = 2 where the walk is recurrent.

Architecture
------------
d >= 3: walks alternate between a near field (within ``JUMP_THRESHOLD`` of
the target set), where a numba kernel steps them exactly with per-walk
counter-based RNG streams, and a far field, where batches of walks take
exact multi-step jumps sampled with numpy's vectorized binomial. A jump of
m steps from a site at distance dmin has displacement distributed as the
exact m-step simple-random-walk increment:

* d >= 3, ``long_jumps``: m = floor(dmin^2). The jump ignores the target
  set, so a walk that would have hit A mid-jump is mis-tracked; the
  probability of that event from distance dmin is at most
  n * G(dmin-ball boundary) / G(o) ~ n * 1.5 c(d) dmin^{2-d} / G(o),
  and the per-jump bounds are accumulated into ``truncation_bias_bound``
  alongside the usual escape-radius truncation term. Jumps may also
  overshoot the escape radius; the resulting error is of the same order as
  the truncation term and is covered by the same bound.
* d = 2 (safe jumps): m = floor(dmin) - 1 < dist(pos, A) in l^1, so the
  jump cannot touch A and introduces no bias at all.

Walk trajectories never consult lattice state outside the escape ball.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import _kernels
from . import green as green_mod
from .lattice import Config, Point, as_config, diam, dimension
from .potential import outer_boundary

# Walks closer than this to the target set are stepped exactly.
JUMP_THRESHOLD = 10.0

# A far-field jump from distance dmin takes floor(JUMP_SCALE * dmin^2) steps.
JUMP_SCALE = 4.0

# Fraction of max_steps-exhausted walks beyond which an estimate is rejected.
BUDGET_FAILURE_FRACTION = 1e-3


@dataclass(frozen=True)
class WalkBudget:
    """Sampling budget for a Monte Carlo estimate."""

    num_walks: int
    escape_radius: float = 0.0  # 0 means "per-operation default"
    max_steps: int = 0  # 0 means "choose from the escape radius"
    seed: int = 0

    def __post_init__(self):
        if self.num_walks < 1:
            raise ValueError("num_walks must be >= 1")
        if self.escape_radius < 0:
            raise ValueError("escape_radius must be nonnegative")

    def resolved_radius(self, default: float = 1.0e3) -> float:
        return self.escape_radius if self.escape_radius > 0 else default

    def resolved_max_steps(self, radius: float) -> int:
        if self.max_steps > 0:
            return self.max_steps
        return int(50 * radius**2)

    def resolved_max_steps_2d(self, reinject_radius: float) -> int:
        # Recurrent walks make O(1) excursions to the re-injection circle
        # before hitting, each contributing ~reinject_radius^2 steps; a few
        # hundred excursions is a conservative tail allowance.
        if self.max_steps > 0:
            return self.max_steps
        return int(500 * reinject_radius**2)


@dataclass(frozen=True)
class McEstimate:
    """A Monte Carlo point estimate with its error budget."""

    value: float
    std_error: float
    samples_used: int
    truncation_bias_bound: float


def _check_radius(A: Config, R: float) -> None:
    if R <= diam(A):
        raise ValueError(
            f"escape_radius {R} must exceed the target set diameter {diam(A)}"
        )


def _center(A_arr: np.ndarray) -> np.ndarray:
    return 0.5 * (A_arr.min(axis=0) + A_arr.max(axis=0))


def _kappa_over_go(d: int) -> float:
    """Coefficient of R^{2-d} in the per-walk truncation bias bound."""
    return 1.5 * green_mod.asymptotic_constant(d) / green_mod.green_origin(d)


def _simulate(
    A_arr: np.ndarray,
    starts: np.ndarray,
    budget: WalkBudget,
    *,
    track_presites: bool,
):
    """Run d >= 3 walks until each hits A, escapes, or exhausts its budget.

    Returns (status, presite, hit_idx, steps, bias_sum) where bias_sum is
    the accumulated long-jump miss-probability bound over all walks.
    """
    n, d = A_arr.shape
    if d < 3:
        raise ValueError("_simulate handles d >= 3 only")
    N = starts.shape[0]
    R = budget.resolved_radius()
    R2 = R * R
    thr2 = JUMP_THRESHOLD * JUMP_THRESHOLD
    max_steps = budget.resolved_max_steps(R)
    seed = np.uint64(budget.seed & 0xFFFFFFFFFFFFFFFF)
    center = _center(A_arr)

    # Packed-coordinate keys for in-kernel hit detection (12 bits per axis
    # relative to the bounding box corner).
    gmin = A_arr.min(axis=0)
    gext = A_arr.max(axis=0) - gmin + 1
    if int(gext.max()) >= 1 << 12 or 12 * d > 63:
        raise ValueError("target set extent too large for packed hit keys")
    keys = np.zeros(n, dtype=np.int64)
    for j in range(d):
        keys = (keys << 12) | (A_arr[:, j] - gmin[j])

    pos = starts.astype(np.int64).copy()
    steps = np.zeros(N, dtype=np.int64)
    status = np.full(N, _kernels.ACTIVE, dtype=np.int64)
    presite = np.zeros((N, d), dtype=np.int64)
    hit_idx = np.full(N, -1, dtype=np.int64)

    # Far-field jump draws come from a single auxiliary stream; the draw
    # order is a deterministic function of the seed and batch, so estimates
    # stay bitwise reproducible.
    far_rng = np.random.Generator(np.random.PCG64(int(seed) ^ 0x5DEECE66D))
    kappa = _kappa_over_go(d) * n
    bias_sum = 0.0
    exponent = 0.5 * (2.0 - d)

    rad_A = float(np.sqrt(((A_arr - center[None, :]) ** 2).sum(axis=1).max()))

    # Near-field positions stay within rad_A + 2 * JUMP_THRESHOLD of the
    # center, so when R is beyond that the in-kernel escape test is dead code
    # and can be skipped.
    check_R = R < rad_A + 2.0 * JUMP_THRESHOLD + 2.0

    dmin2_buf = np.zeros(N, dtype=np.float64)
    alive = np.arange(N, dtype=np.int64)
    visit = 0
    while alive.size:
        # The kernel advances near-field walks and writes the squared
        # distance to A for walks that are (or end up) in the far field.
        _kernels.near_kernel(
            A_arr, keys, gmin, gext, pos, steps, status, presite,
            hit_idx, alive, visit, center, R2, thr2, max_steps, seed,
            check_R, dmin2_buf,
        )
        i_far = alive[status[alive] == _kernels.ACTIVE]
        if i_far.size:
            p = pos[i_far]
            rc2 = ((p - center[None, :]) ** 2).sum(axis=1)
            escaped = rc2 >= R2
            status[i_far[escaped]] = _kernels.ESCAPED
            i_jump = i_far[~escaped]
            if i_jump.size:
                dm2 = dmin2_buf[i_jump]
                # Jump length: the miss-probability bound n*G(dmin)/G(o)
                # holds for jumps of any length, so longer jumps cut both
                # the round count and the accumulated bias. Axis/direction
                # step counts are multinomial via a binomial chain.
                m = (JUMP_SCALE * dm2).astype(np.int64)
                bias_sum += float(kappa * np.sum(dm2**exponent))
                rem = m.copy()
                jump_pos = p[~escaped]
                for j in range(d - 1):
                    kj = far_rng.binomial(rem, 1.0 / (d - j))
                    heads = far_rng.binomial(kj, 0.5)
                    jump_pos[:, j] += 2 * heads - kj
                    rem -= kj
                heads = far_rng.binomial(rem, 0.5)
                jump_pos[:, d - 1] += 2 * heads - rem
                pos[i_jump] = jump_pos
                steps[i_jump] += m
                # Jumps that land exactly on A (a hit) or exceed the step
                # budget are resolved by the kernel on the next round.

        alive = alive[status[alive] == _kernels.ACTIVE]
        visit += 1

    if not track_presites:
        presite = None
    return status, presite, hit_idx, steps, bias_sum


def _budget_check(status: np.ndarray, budget: WalkBudget) -> None:
    frac = float(np.mean(status == _kernels.EXHAUSTED))
    if frac > BUDGET_FAILURE_FRACTION:
        raise RuntimeError(f"budget failure: {frac:.2%} of walks exhausted")


def _truncation_term(A: Config, budget: WalkBudget) -> float:
    d = dimension(A)
    return len(A) * _kappa_over_go(d) * budget.resolved_radius() ** (2 - d)


def mc_escape(A: Config, x: Point, budget: WalkBudget) -> McEstimate:
    """Estimate the escape probability esc_A(x): the chance a walk from x
    reaches the escape radius before returning to A."""
    A = as_config(A)
    if x not in A:
        raise ValueError("x must belong to A")
    d = dimension(A)
    _check_radius(A, budget.resolved_radius())
    A_arr = np.array(sorted(A), dtype=np.int64)
    starts = np.tile(np.array(x, dtype=np.int64), (budget.num_walks, 1))
    if d < 3:
        raise ValueError("escape probabilities vanish in d = 2 (recurrence)")
    status, _, _, _, bias_sum = _simulate(A_arr, starts, budget, track_presites=False)
    _budget_check(status, budget)
    esc = status == _kernels.ESCAPED
    p = float(np.mean(esc))
    se = math.sqrt(max(p * (1 - p), 1e-300) / budget.num_walks)
    trunc = _truncation_term(A, budget) + bias_sum / budget.num_walks
    return McEstimate(p, se, budget.num_walks, trunc)


def mc_transport(U: Config, x: Point, budget: WalkBudget) -> dict[Point, McEstimate]:
    """Among walks from x that hit U\\{x} before the escape radius, return
    the empirical distribution of the site occupied just before hitting."""
    U = as_config(U)
    if x not in U or len(U) < 2:
        raise ValueError("need x in U and |U| >= 2")
    d = dimension(U)
    A = U - {x}
    A_arr = np.array(sorted(A), dtype=np.int64)
    x_arr = np.array(x, dtype=np.int64)
    if d >= 3:
        _check_radius(U, budget.resolved_radius())
        starts = np.tile(x_arr, (budget.num_walks, 1))
        status, presite, _, _, bias_sum = _simulate(A_arr, starts, budget, track_presites=True)
        _budget_check(status, budget)
        hits = status == _kernels.HIT
        trunc = _truncation_term(U, budget) + bias_sum / budget.num_walks
    else:
        center = _center(A_arr)
        reinject = max(budget.resolved_radius(64.0),
                       4.0 * (1.0 + math.dist(x, center)),
                       2.0 * diam(U) + 8.0)
        codes, presite, _ = _kernels.transport2d_kernel(
            A_arr, x_arr, center, reinject,
            budget.resolved_max_steps_2d(reinject),
            budget.num_walks, np.uint64(budget.seed & 0xFFFFFFFFFFFFFFFF),
        )
        status = codes.astype(np.int64)
        frac = float(np.mean(status == _kernels.EXHAUSTED))
        if frac > BUDGET_FAILURE_FRACTION:
            raise RuntimeError(f"budget failure: {frac:.2%} of walks exhausted")
        hits = status == _kernels.HIT
        trunc = 0.0
    n_hit = int(hits.sum())
    if n_hit == 0:
        raise RuntimeError("zero conditioned hits: insufficient budget")
    counts = Counter(tuple(int(v) for v in row) for row in presite[hits])
    support = set(outer_boundary(A))
    out: dict[Point, McEstimate] = {}
    hit_prob = n_hit / budget.num_walks
    for site, c in sorted(counts.items()):
        if site not in support:
            # pre-sites of walks landing on A mid-jump may fall outside the
            # outer boundary; they are covered by the bias bound
            if d >= 3:
                continue
        p = c / n_hit
        se = math.sqrt(max(p * (1 - p), 1e-300) / n_hit)
        out[site] = McEstimate(p, se, n_hit, trunc / max(hit_prob, 1e-300))
    return out


def mc_hit_count(U: Config, x: Point, budget: WalkBudget) -> int:
    """Number of walks from x that hit U\\{x} before escaping."""
    U = as_config(U)
    A = U - {x}
    A_arr = np.array(sorted(A), dtype=np.int64)
    starts = np.tile(np.array(x, dtype=np.int64), (budget.num_walks, 1))
    status, _, _, _, _ = _simulate(A_arr, starts, budget, track_presites=False)
    return int(np.sum(status == _kernels.HIT))


def mc_harmonic_measure_2d(A: Config, budget: WalkBudget) -> dict[Point, McEstimate]:
    """d = 2 harmonic measure: start walks uniformly on a distant circle of
    radius ``escape_radius`` and record the first element of A hit."""
    A = as_config(A)
    d = dimension(A)
    if d != 2:
        raise ValueError("mc_harmonic_measure_2d requires d = 2")
    start_radius = budget.resolved_radius(max(64.0, 2.0**10 * diam(A)))
    _check_radius(A, start_radius)
    A_sorted = sorted(A)
    A_arr = np.array(A_sorted, dtype=np.int64)
    center = _center(A_arr)
    hit_idx, exhausted = _kernels.hm2d_kernel(
        A_arr, center, start_radius,
        budget.resolved_max_steps_2d(4.0 * start_radius),
        budget.num_walks,
        np.uint64(budget.seed & 0xFFFFFFFFFFFFFFFF),
    )
    if exhausted / budget.num_walks > BUDGET_FAILURE_FRACTION:
        raise RuntimeError(
            f"budget failure: {exhausted} of {budget.num_walks} walks exhausted"
        )
    n_hit = budget.num_walks - int(exhausted)
    counts = np.bincount(hit_idx[hit_idx >= 0], minlength=len(A_sorted))
    out: dict[Point, McEstimate] = {}
    for i, site in enumerate(A_sorted):
        p = counts[i] / n_hit
        se = math.sqrt(max(p * (1 - p), 1e-300) / n_hit)
        out[site] = McEstimate(float(p), se, n_hit, 0.0)
    return out
