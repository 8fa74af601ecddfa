"""Exact potential theory for finite sets in Z^d, d >= 3.

Escape probabilities, capacity, harmonic measure, hitting distributions,
killed Green's functions, and the transport distribution, all via dense
solves against the lattice Green's function:

  last-exit identity   sum_y G(x-y) esc_A(y) = 1        (x in A)
  hitting identity     sum_y G(z-y) h_x(y)   = G(x-z)    (z in A, x not in A)
  killed Green         G_A(x,y) = G(x-y) - sum_z h_x(z) G(z-y)
  transport weight     w(y) = G_A(x,y) n_A(y) / (2d)     (y adjacent to A)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .green import GreenTable
from .lattice import Clustering, Config, Point, dimension, neighbors, sub

MAX_SET_SIZE = 64
CLAMP = -1e-10
COND_LIMIT = 1e12

# Empirical constant for the separation correction in the escape lower bound,
# calibrated over separations 50-200 in d = 5.
MIN_ES_CONST = 1.0


@dataclass(frozen=True)
class HarmonicProfile:
    config: Config
    esc: dict          # Point -> escape probability
    cap: float
    hm: dict           # Point -> harmonic measure

    def __post_init__(self):
        assert abs(sum(self.hm.values()) - 1.0) < 1e-10


@dataclass(frozen=True)
class ClusterHarmonicProfile:
    clustering: Clustering
    esc: dict          # (cluster index, Point) -> escape probability
    total_cap: float
    hm: dict           # (cluster index, Point) -> probability

    def __post_init__(self):
        assert abs(sum(self.hm.values()) - 1.0) < 1e-10


@dataclass(frozen=True)
class TransportDistribution:
    source: Point
    target_set: Config
    weights: dict      # Point -> conditional probability
    hit_probability: float


def _clamped(vec: np.ndarray, what: str) -> np.ndarray:
    if vec.min() < CLAMP:
        raise ArithmeticError(
            f"{what}: negative entry {vec.min():.3e} beyond clamp threshold "
            "(ill-conditioned system)")
    return np.maximum(vec, 0.0)


def _green_matrix(pts: list[Point], G: GreenTable) -> np.ndarray:
    P = np.asarray(pts, dtype=np.int64)
    return G.many(P[:, None, :] - P[None, :, :])


def _solve(M: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    Minv = np.linalg.inv(M)
    cond1 = np.abs(M).sum(axis=0).max() * np.abs(Minv).sum(axis=0).max()
    if cond1 > COND_LIMIT:
        raise ArithmeticError(f"{what}: Green matrix ill-conditioned")
    return Minv @ rhs


def escape_vector(A: Config, G: GreenTable) -> HarmonicProfile:
    """Escape probabilities, capacity, and harmonic measure of A (d >= 3)."""
    if len(A) > MAX_SET_SIZE:
        raise ValueError(f"|A| > {MAX_SET_SIZE} unsupported")
    pts = sorted(A)
    e = _clamped(_solve(_green_matrix(pts, G), np.ones(len(pts)),
                        "escape_vector"), "escape_vector")
    cap = float(e.sum())
    esc = {x: float(v) for x, v in zip(pts, e)}
    hm = {x: float(v / cap) for x, v in zip(pts, e)}
    return HarmonicProfile(config=A, esc=esc, cap=cap, hm=hm)


def clustering_harmonic(C: Clustering, G: GreenTable) -> ClusterHarmonicProfile:
    """Per-cluster escape over total capacity; blind to inter-cluster
    distances (each cluster lives in its own copy of the lattice)."""
    esc: dict = {}
    total_cap = 0.0
    for i, block in enumerate(C):
        prof = escape_vector(block, G)
        total_cap += prof.cap
        for x, v in prof.esc.items():
            esc[(i, x)] = v
    hm = {k: v / total_cap for k, v in esc.items()}
    return ClusterHarmonicProfile(clustering=tuple(C), esc=esc,
                                  total_cap=total_cap, hm=hm)


def hitting_distribution(A: Config, x: Point, G: GreenTable) -> dict:
    """P_x(tau_A < inf, S_{tau_A} = z) for each z in A, with x outside A."""
    if x in A:
        raise ValueError("x must lie outside A")
    pts = sorted(A)
    rhs = np.array([G(sub(x, z)) for z in pts])
    h = _clamped(_solve(_green_matrix(pts, G), rhs, "hitting_distribution"),
                 "hitting_distribution")
    return {z: float(v) for z, v in zip(pts, h)}


def _boundary_counts(A: Config) -> dict:
    """Map each non-A neighbor site y to n_A(y), its number of neighbors in A."""
    out: dict = {}
    for z in A:
        for y in neighbors(z):
            if y not in A:
                out[y] = out.get(y, 0) + 1
    return out


def outer_boundary(A: Config) -> set:
    """All non-A sites with a nearest neighbor in A."""
    return set(_boundary_counts(A))


def transport_distribution(U: Config, x: Point, G: GreenTable) -> TransportDistribution:
    """Distribution of the site occupied immediately before the walk from x
    hits A = U\\{x}, conditioned on hitting (d >= 3)."""
    if x not in U or len(U) < 2:
        raise ValueError("x must be an element of U with |U| >= 2")
    A = frozenset(U) - {x}
    d = dimension(U)
    pts = sorted(A)
    P = np.asarray(pts, dtype=np.int64)
    xv = np.asarray(x, dtype=np.int64)
    counts = _boundary_counts(A)
    cands = sorted(counts)
    C = np.asarray(cands, dtype=np.int64)
    n = len(pts)
    k = len(cands)
    # one fused Green evaluation: pair matrix, source row, source-to-candidate
    # row, and point-to-candidate block
    disps = np.concatenate([
        (P[:, None, :] - P[None, :, :]).reshape(-1, d),
        xv[None, :] - P,
        xv[None, :] - C,
        (P[:, None, :] - C[None, :, :]).reshape(-1, d),
    ])
    vals = G.many(disps)
    M = vals[:n * n].reshape(n, n)
    h = _clamped(_solve(M, vals[n * n:n * n + n], "transport_distribution"),
                 "transport_distribution")
    g_xc = vals[n * n + n:n * n + n + k]
    g_pc = vals[n * n + n + k:].reshape(n, k)
    killed = g_xc - g_pc.T @ h
    n_A = np.array([counts[y] for y in cands], dtype=np.float64)
    w = _clamped(killed, "transport_distribution killed Green") * n_A / (2 * d)
    total = float(w.sum())
    if total <= 0.0:
        raise ArithmeticError("transport weights vanished (internal error)")
    weights = {y: float(v / total) for y, v in zip(cands, w) if v > 0.0}
    return TransportDistribution(source=x, target_set=A, weights=weights,
                                 hit_probability=total)


def min_escape_bound(C: Clustering, G: GreenTable, const: float = MIN_ES_CONST) -> float:
    """Lower bound (3 - 2 G(o))/G(o) - const*n*sep(C)^{2-d} for the escape
    probability of elements of a cluster with at most three elements."""
    if len(C[0]) > 3:
        raise ValueError("bound applies to clusters of size <= 3")
    d = G.dimension
    n = sum(len(block) for block in C)
    go = G.origin()
    from .lattice import sep as _sep
    return (3 - 2 * go) / go - const * n * _sep(C) ** (2 - d)
