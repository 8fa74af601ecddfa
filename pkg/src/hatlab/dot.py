"""Dimer-or-trimer (DOT) clustering predicates, center-of-mass and
reference-time machinery, the truncated Z-walk, separation schedules, and
the G1-G4 event trackers used in trajectory analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

from .lattice import (Clustering, Config, Point, as_config, diam, dist,
                      rest, sub)


@dataclass(frozen=True)
class DotParams:
    """(a, b): absolute separation and relative-diameter coefficient."""

    a: float
    b: float

    def __post_init__(self):
        if self.a <= 1 or self.b <= 0:
            raise ValueError("need a > 1 and b > 0")


def is_dot(C: Clustering, p: DotParams) -> bool:
    """True iff every cluster is a dimer or trimer, sep(C) >= a, and each
    cluster's diameter is at most b * log dist(cluster, rest)."""
    if len(C) < 2:
        raise ValueError("DOT predicate needs at least two clusters")
    for block in C:
        if len(block) not in (2, 3):
            return False
    for i, block in enumerate(C):
        gap = dist(block, rest(C, i))
        if gap < p.a:
            return False
        if diam(block) > p.b * math.log(gap):
            return False
    return True


def _partitions_23(pts: list[Point]):
    """All partitions of pts into blocks of size 2 or 3, in the canonical
    order induced by always extending from the lex-least remaining point."""
    if not pts:
        yield ()
        return
    head, tail = pts[0], pts[1:]
    for size in (2, 3):
        for others in combinations(tail, size - 1):
            block = as_config((head,) + others)
            remaining = [q for q in tail if q not in block]
            for sub_part in _partitions_23(remaining):
                yield (block,) + sub_part


def find_dot_clustering(U: Config, p: DotParams) -> Optional[Clustering]:
    """First DOT clustering of U in canonical partition order, or None."""
    U = as_config(U)
    if not 4 <= len(U) <= 12:
        raise ValueError("|U| must be between 4 and 12")
    pts = sorted(U)
    for C in _partitions_23(pts):
        if is_dot(C, p):
            return C
    return None


def center_of_mass(A: Config) -> Point:
    """M(A) = (6/|A|) * sum of A's elements; the factor of six makes this an
    exact lattice point for dimers and trimers."""
    A = as_config(A)
    n = len(A)
    d = len(next(iter(A)))
    total = [0] * d
    for x in A:
        for j in range(d):
            total[j] += x[j]
    if any((6 * c) % n for c in total):
        raise ValueError(f"center of mass of |A| = {n} set is not integral")
    return tuple(6 * c // n for c in total)


def is_reference(A: Config) -> bool:
    """True iff A is an e1-aligned dimer or trimer segment."""
    A = as_config(A)
    if len(A) not in (2, 3):
        return False
    pts = sorted(A)
    base = pts[0]
    return all(p[1:] == base[1:] and p[0] == base[0] + k
               for k, p in enumerate(pts))


@dataclass
class ZWalkState:
    """Truncated Z-walk of the pair (i, j): at each reference time (both
    clusters in Ref) the walk moves by the center-of-mass difference
    increment, zeroed when the gap between reference times exceeds kappa."""

    pair: tuple[int, int]
    kappa: float
    reference_times: list = field(default_factory=lambda: [0])
    positions: list = field(default_factory=list)
    last_diff: Optional[Point] = None

    def __post_init__(self):
        if self.kappa < 3:
            raise ValueError("kappa must be >= 3")


def _cm_diff(C: Clustering, pair: tuple[int, int]) -> Point:
    i, j = pair
    return sub(center_of_mass(C[i]), center_of_mass(C[j]))


def z_walk_advance(state: ZWalkState, C_t: Clustering, t: int) -> ZWalkState:
    """Observe the clustering at time t; if both clusters of the pair are in
    Ref, record a reference time and advance the Z-walk."""
    if t <= state.reference_times[-1] and not (t == 0 and not state.positions):
        raise ValueError("time must increase strictly across calls")
    i, j = state.pair
    if not (is_reference(C_t[i]) and is_reference(C_t[j])):
        return state
    diff = _cm_diff(C_t, state.pair)
    if not state.positions:
        # xi_0: anchor the walk at the current center-of-mass difference
        return ZWalkState(state.pair, state.kappa, [t], [diff], diff)
    gap = t - state.reference_times[-1]
    prev = state.positions[-1]
    if gap > state.kappa or state.last_diff is None:
        step = prev  # truncated increment: walk does not move
    else:
        delta = sub(diff, state.last_diff)
        step = tuple(p + q for p, q in zip(prev, delta))
    return ZWalkState(state.pair, state.kappa,
                      state.reference_times + [t],
                      state.positions + [step], diff)


@dataclass(frozen=True)
class Schedule:
    """Separation schedule: delta_l = c1/(n l), t_l = floor(c2 (n l)^4
    log(a) (2^l a)^2), kappa_l = c3 log(n l t_l)."""

    c1: float
    c2: float
    c3: float
    a: float
    n: int

    def delta(self, ell: int) -> float:
        return self.c1 / (self.n * ell)

    def t(self, ell: int) -> int:
        if ell == 0:
            return 0
        return int(self.c2 * (self.n * ell) ** 4 * math.log(self.a)
                   * (2**ell * self.a) ** 2)

    def kappa(self, ell: int) -> float:
        return self.c3 * math.log(self.n * ell * self.t(ell))


def schedule(c1: float, c2: float, c3: float, a: float, n: int) -> Schedule:
    if min(c1, c2, c3) <= 0 or a <= 1 or n < 2:
        raise ValueError("need c1, c2, c3 > 0, a > 1, n >= 2")
    return Schedule(c1=c1, c2=c2, c3=c3, a=a, n=n)


@dataclass(frozen=True)
class EventRecord:
    """Which of the per-level separation events held at level ell."""

    ell: int
    g1: Optional[bool]  # reference gaps in (t_{l-1}, t_l] all <= kappa_l
    g2: Optional[bool]  # separation reaches 2^l a / delta_l by t_l
    g3: Optional[bool]  # separation >= delta_l 2^{l-1} a throughout
    g4: Optional[bool]  # separation >= 2^l a from S_l to t_l
    insufficient: bool = False


def event_tracker(traj, sched: Schedule, pair: tuple[int, int],
                  levels: int = 1) -> list[EventRecord]:
    """Evaluate G1-G4 for the cluster pair on levels 1..levels.

    `traj` is the sequence of clusterings (C_0, C_1, ...). Levels whose
    window (t_{l-1}, t_l] extends past the trajectory are flagged as
    insufficient rather than silently truncated.
    """
    i, j = pair
    T = len(traj) - 1
    records: list[EventRecord] = []
    for ell in range(1, levels + 1):
        t_lo, t_hi = sched.t(ell - 1), sched.t(ell)
        if t_hi > T:
            records.append(EventRecord(ell, None, None, None, None,
                                       insufficient=True))
            continue
        window = range(t_lo, t_hi + 1)
        dists = [dist(traj[t][i], traj[t][j]) for t in window]

        # G1: gaps between consecutive reference times within the window
        ref_times = [t for t in window
                     if is_reference(traj[t][i]) and is_reference(traj[t][j])]
        kappa_l = sched.kappa(ell)
        g1 = all(b - a_ <= kappa_l for a_, b in zip(ref_times, ref_times[1:]))

        target = 2**ell * sched.a / sched.delta(ell)
        s_l = next((t for t, r in zip(window, dists) if r >= target), None)
        g2 = s_l is not None

        g3 = all(r >= sched.delta(ell) * 2 ** (ell - 1) * sched.a
                 for r in dists)

        if s_l is None:
            g4 = True  # the interval [S_l, t_l] is empty
        else:
            g4 = all(r >= 2**ell * sched.a
                     for t, r in zip(window, dists) if t >= s_l)
        records.append(EventRecord(ell, g1, g2, g3, g4))
    return records


# ---------------------------------------------------------------------------
# Numeric forms of the separation lemmas, asserted on analysis runs.

def sep_to_dist_bound(R: float, r: float) -> float:
    """If both diameters are <= r and the center-of-mass difference has norm
    >= R, then dist >= (R - 8r)/6."""
    return (R - 8 * r) / 6


def check_sep_to_dist(C: Clustering, pair: tuple[int, int]) -> bool:
    i, j = pair
    r = max(diam(C[i]), diam(C[j]))
    R = math.hypot(*_cm_diff(C, pair))
    return dist(C[i], C[j]) >= sep_to_dist_bound(R, r) - 1e-9


def check_dist_below_cm(C: Clustering, pair: tuple[int, int]) -> bool:
    """||M^i - M^j|| >= 6 dist - 6 diam^i - 6 diam^j."""
    i, j = pair
    lhs = math.hypot(*_cm_diff(C, pair))
    rhs = 6 * dist(C[i], C[j]) - 6 * diam(C[i]) - 6 * diam(C[j])
    return lhs >= rhs - 1e-9


def check_amlg(traj, pair: tuple[int, int], xi_m: int, xi_next: int) -> bool:
    """Between consecutive reference times, the center-of-mass difference
    moves by at most 6 (xi_{m+1} - xi_m)^2."""
    base = _cm_diff(traj[xi_m], pair)
    bound = 6 * (xi_next - xi_m) ** 2
    for t in range(xi_m, xi_next + 1):
        drift = sub(_cm_diff(traj[t], pair), base)
        if math.hypot(*drift) > bound + 1e-9:
            return False
    return True
