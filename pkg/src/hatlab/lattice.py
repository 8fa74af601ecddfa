"""Lattice points, configurations, clusterings, and geometric predicates.

Points are tuples of ints, configurations are frozensets of points, and
clusterings are tuples of frozensets. Everything here is pure and
dimension-generic (d >= 2).
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
from typing import Iterable, Iterator, Optional, Sequence

Point = tuple[int, ...]
Config = frozenset  # frozenset[Point]
Clustering = tuple  # tuple[Config, ...]


def as_point(coords: Iterable[int]) -> Point:
    p = tuple(int(c) for c in coords)
    if len(p) < 2:
        raise ValueError("dimension must be >= 2")
    return p


def as_config(points: Iterable[Sequence[int]]) -> Config:
    pts = frozenset(tuple(int(c) for c in p) for p in points)
    if not pts:
        raise ValueError("configuration must be nonempty")
    dims = {len(p) for p in pts}
    if len(dims) != 1:
        raise ValueError("mixed dimensions in configuration")
    if next(iter(dims)) < 2:
        raise ValueError("dimension must be >= 2")
    return pts


def dimension(A: Config) -> int:
    return len(next(iter(A)))


def origin(d: int) -> Point:
    return (0,) * d


def unit(d: int, j: int, sign: int = 1) -> Point:
    return tuple(sign if i == j else 0 for i in range(d))


def add(x: Point, y: Point) -> Point:
    return tuple(a + b for a, b in zip(x, y))


def sub(x: Point, y: Point) -> Point:
    return tuple(a - b for a, b in zip(x, y))


def norm(x: Point) -> float:
    return math.sqrt(sum(c * c for c in x))


def norm_inf(x: Point) -> int:
    return max(abs(c) for c in x)


def neighbors(x: Point) -> list[Point]:
    """The 2d nearest neighbors of x."""
    out = []
    for j in range(len(x)):
        for s in (1, -1):
            y = list(x)
            y[j] += s
            out.append(tuple(y))
    return out


def star_neighbors(x: Point) -> list[Point]:
    """The 3^d - 1 points differing from x by at most one per coordinate."""
    out = []
    for delta in itertools.product((-1, 0, 1), repeat=len(x)):
        if any(delta):
            out.append(add(x, delta))
    return out


def dist(A: Config, B: Config) -> float:
    """Minimum Euclidean distance between elements of A and B."""
    if dimension(A) != dimension(B):
        raise ValueError("dimension mismatch")
    return math.sqrt(min(sum((a - b) ** 2 for a, b in zip(x, y))
                         for x in A for y in B))


def diam(A: Config) -> float:
    if len(A) == 1:
        return 0.0
    pts = list(A)
    return math.sqrt(max(sum((a - b) ** 2 for a, b in zip(x, y))
                         for i, x in enumerate(pts) for y in pts[i + 1:]))


def pi(C: Clustering) -> Config:
    """Union of the clusters (the underlying configuration)."""
    out: set = set()
    for block in C:
        out |= block
    return frozenset(out)


def clust(C: Clustering, x: Point) -> int:
    """Index (0-based) of the cluster containing x."""
    for i, block in enumerate(C):
        if x in block:
            return i
    raise KeyError(f"{x} not in any cluster")


def rest(C: Clustering, i: int) -> Config:
    """Union of all clusters other than i."""
    out: set = set()
    for j, block in enumerate(C):
        if j != i:
            out |= block
    return frozenset(out)


def sep(C: Clustering) -> float:
    """min_i dist(C^i, C^{!=i})."""
    if len(C) < 2:
        raise ValueError("separation undefined for a single cluster")
    return min(dist(C[i], rest(C, i)) for i in range(len(C)))


def sep_inf(C: Clustering) -> float:
    """Separation in the l-infinity norm (recorded alongside Euclidean)."""
    if len(C) < 2:
        raise ValueError("separation undefined for a single cluster")
    return min(
        min(norm_inf(sub(x, y)) for x in C[i] for y in rest(C, i))
        for i in range(len(C))
    )


def lex(A: Config) -> Point:
    return min(A)


def segment(x: Point, k: int) -> Config:
    """x + L_k, the k-point segment {x - j*e1 : 0 <= j <= k-1}."""
    d = len(x)
    return frozenset(sub(x, unit(d, 0, j)) for j in range(k))


# ---------------------------------------------------------------------------
# Reachability from infinity

def _blocked_rays(A: Config, y: Point) -> bool:
    """False if some axis ray from y misses A entirely (fast exit test)."""
    d = len(y)
    for j in range(d):
        for s in (1, -1):
            clear = True
            for z in A:
                if all(z[i] == y[i] for i in range(d) if i != j) and \
                        (z[j] - y[j]) * s > 0:
                    clear = False
                    break
            if clear:
                return False
    return True


def _escape_radius(A: Config) -> float:
    return diam(A) + math.sqrt(dimension(A)) + 2


def reachable_from_infinity(A: Config, y: Point, node_cap: int = 1_000_000) -> bool:
    """True iff y (not in A) is joined to the exterior of the bounding ball
    around lex(A) by a nearest-neighbor path avoiding A."""
    if y in A:
        return False
    anchor = lex(A)
    r2 = _escape_radius(A) ** 2

    def outside(p: Point) -> bool:
        return sum((a - b) ** 2 for a, b in zip(p, anchor)) > r2

    if outside(y) or not _blocked_rays(A, y):
        return True
    # Best-first search, preferring points far from the anchor: in open space
    # this walks straight out; in an enclosed pocket it exhausts the pocket.
    start_key = -sum((a - b) ** 2 for a, b in zip(y, anchor))
    frontier = [(start_key, y)]
    seen = {y}
    visited = 0
    while frontier:
        visited += 1
        if visited > node_cap:
            raise RuntimeError("reachability search exceeded node cap")
        _, p = heapq.heappop(frontier)
        for q in neighbors(p):
            if q in seen or q in A:
                continue
            if outside(q) or not _blocked_rays(A, q):
                return True
            seen.add(q)
            heapq.heappush(frontier, (-sum((a - b) ** 2 for a, b in zip(q, anchor)), q))
    return False


def visible_boundary(A: Config) -> Config:
    """Points *-adjacent to A that are reachable from infinity avoiding A."""
    candidates: set = set()
    for x in A:
        for y in star_neighbors(x):
            if y not in A:
                candidates.add(y)
    return frozenset(y for y in candidates if reachable_from_infinity(A, y))


def is_exposed(A: Config, x: Point) -> bool:
    """True iff some nearest neighbor of x is joined to infinity avoiding A."""
    if x not in A:
        raise ValueError(f"{x} not in configuration")
    return any(y not in A and reachable_from_infinity(A, y)
               for y in neighbors(x))


def exposed_elements(A: Config) -> Config:
    return frozenset(x for x in A if is_exposed(A, x))


ISOLATED = "Isolated"
NON_ISOLATED = "NonIsolated"


def classify(U: Config) -> str:
    """Isolated iff every exposed element of U has no nearest neighbor in U."""
    if len(U) < 2:
        raise ValueError("classification needs |U| >= 2")
    for x in exposed_elements(U):
        if any(y in U for y in neighbors(x)):
            return NON_ISOLATED
    return ISOLATED


# ---------------------------------------------------------------------------
# Lattice symmetries and canonical form

def signed_permutations(d: int) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
    """All 2^d * d! signed coordinate permutations as (perm, signs)."""
    for perm in itertools.permutations(range(d)):
        for signs in itertools.product((1, -1), repeat=d):
            yield perm, signs


def apply_symmetry(perm: tuple[int, ...], signs: tuple[int, ...],
                   x: Point, shift: Optional[Point] = None) -> Point:
    y = tuple(signs[i] * x[perm[i]] for i in range(len(x)))
    return add(y, shift) if shift is not None else y


def canonical_form(U: Config) -> Config:
    """Lexicographically least signed-permutation image, translated so the
    lex element sits at the origin; constant on symmetry orbits."""
    d = dimension(U)
    best = None
    for perm, signs in signed_permutations(d):
        img = [apply_symmetry(perm, signs, x) for x in U]
        anchor = min(img)
        shifted = sorted(sub(x, anchor) for x in img)
        if best is None or shifted < best:
            best = shifted
    return frozenset(best)


# ---------------------------------------------------------------------------
# Serialization: configs as sorted lists of coordinate lists, one JSON value

def config_to_json(A: Config) -> str:
    return json.dumps(sorted(list(p) for p in A))


def config_from_json(text: str) -> Config:
    return as_config(json.loads(text))


def clustering_to_json(C: Clustering) -> str:
    return json.dumps([sorted(list(p) for p in block) for block in C])


def clustering_from_json(text: str) -> Clustering:
    return tuple(as_config(block) for block in json.loads(text))
