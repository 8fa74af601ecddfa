"""HAT and IHAT dynamics: exact-distribution samplers, one-step transition
probabilities, and natural-clustering bookkeeping.

In d >= 3 every step is sampled from the exact activation and transport
distributions computed by the potential-theory solvers (inverse-CDF over the
lexicographically sorted support), so dynamics experiments carry no Monte
Carlo error beyond the trajectory randomness itself. In d = 2 the walk is
recurrent and the solvers do not apply; steps are driven by walk-mc samples
(one walk per draw) with a configurable activation start radius.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .green import GreenTable
from .lattice import (Clustering, Config, Point, as_config, clust, diam,
                      dimension, pi)
from .potential import (clustering_harmonic, escape_vector,
                        transport_distribution)
from .walk_mc import WalkBudget, mc_harmonic_measure_2d, mc_transport


@dataclass(frozen=True)
class MoveRecord:
    """One HAT/IHAT move: which element was activated, where it landed."""

    activated: Point
    target: Point
    cluster_label: Optional[int]
    step_index: int


@dataclass(frozen=True)
class HatState:
    config: Config
    step: int = 0


@dataclass(frozen=True)
class IhatState:
    """Clusters each live in their own copy of the lattice, so overlaps
    between clusters are permitted and ignored."""

    clusters: Clustering
    step: int = 0


@dataclass(frozen=True)
class McDynamicsParams:
    """Controls the walk-mc draws behind d=2 HAT steps: the activation walk
    starts on a circle of radius max(min_radius, radius_factor * diam)."""

    radius_factor: float = 2.0**10
    min_radius: float = 64.0
    transport_radius: float = 0.0  # 0: walk-mc default re-injection radius


def _draw(rng: np.random.Generator, items: list, probs: list[float]):
    """Inverse-CDF draw over a pre-sorted support."""
    u = rng.random()
    acc = 0.0
    for item, p in zip(items, probs):
        acc += p
        if u < acc:
            return item
    return items[-1]


def _seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))


def hat_step(state: HatState, G: Optional[GreenTable],
             rng: np.random.Generator,
             mc_params: McDynamicsParams = McDynamicsParams(),
             ) -> tuple[HatState, MoveRecord]:
    """One HAT step: activate x ~ harmonic measure, transport to y ~ the
    conditioned pre-hit distribution; x = y leaves the state unchanged."""
    U = state.config
    if len(U) < 2:
        raise ValueError("HAT needs |U| >= 2")
    d = dimension(U)
    if d >= 3:
        if G is None:
            raise ValueError("d >= 3 requires a GreenTable")
        hm = escape_vector(U, G).hm
        support = sorted(hm)
        x = _draw(rng, support, [hm[s] for s in support])
        td = transport_distribution(U, x, G)
        cands = sorted(td.weights)
        y = _draw(rng, cands, [td.weights[c] for c in cands])
    else:
        budget = WalkBudget(
            num_walks=1,
            escape_radius=max(mc_params.min_radius,
                              mc_params.radius_factor * diam(U)),
            seed=_seed(rng))
        hm_draw = mc_harmonic_measure_2d(U, budget)
        x = max(hm_draw, key=lambda s: hm_draw[s].value)
        t_budget = WalkBudget(num_walks=1,
                              escape_radius=mc_params.transport_radius,
                              seed=_seed(rng))
        t_draw = mc_transport(U, x, t_budget)
        y = max(t_draw, key=lambda s: t_draw[s].value)
    new_config = U if y == x else (U - {x}) | {y}
    record = MoveRecord(activated=x, target=y, cluster_label=None,
                        step_index=state.step)
    return HatState(config=as_config(new_config), step=state.step + 1), record


def _replace_in_cluster(C: Clustering, i: int, x: Point, y: Point) -> Clustering:
    """(C \\^i {x}) u^i {y}: move cluster i's element x to y."""
    blocks = list(C)
    blocks[i] = (blocks[i] - {x}) | {y}
    return tuple(blocks)


def hat_transition_prob(E0: Clustering, E1: Clustering, G: GreenTable) -> float:
    """Sum of exact p_{pi(E0)}(x, y) over the pairs (x, y) whose move turns
    the clustering E0 into exactly E1 (including the diagonal x = y)."""
    U0 = pi(E0)
    hm = escape_vector(U0, G).hm
    total = 0.0
    for x in sorted(U0):
        td = transport_distribution(U0, x, G)
        i = clust(E0, x)
        # diagonal: y = x leaves the state unchanged
        if E1 == E0:
            total += hm[x] * td.weights.get(x, 0.0)
        for y, w in td.weights.items():
            if y == x:
                continue
            if _replace_in_cluster(E0, i, x, y) == E1:
                total += hm[x] * w
    return total


def ihat_step(state: IhatState, G: GreenTable,
              rng: np.random.Generator) -> tuple[IhatState, MoveRecord]:
    """One IHAT step: activate (i, x) ~ per-cluster escape over total
    capacity, transport within cluster i only."""
    C = state.clusters
    if any(len(block) < 2 for block in C):
        raise ValueError("IHAT needs every cluster to have >= 2 elements")
    prof = clustering_harmonic(C, G)
    support = sorted(prof.hm)
    i, x = _draw(rng, support, [prof.hm[k] for k in support])
    td = transport_distribution(C[i], x, G)
    cands = sorted(td.weights)
    y = _draw(rng, cands, [td.weights[c] for c in cands])
    new_clusters = C if y == x else _replace_in_cluster(C, i, x, y)
    assert all(len(a) == len(b) for a, b in zip(C, new_clusters))
    record = MoveRecord(activated=x, target=y, cluster_label=i,
                        step_index=state.step)
    return IhatState(clusters=new_clusters, step=state.step + 1), record


def ihat_transition_prob(D0: Clustering, D1: Clustering, G: GreenTable) -> float:
    """Sum of exact q_{D0}(i, x, y) over the triples whose move turns D0
    into exactly D1."""
    prof = clustering_harmonic(D0, G)
    total = 0.0
    for i, block in enumerate(D0):
        for x in sorted(block):
            td = transport_distribution(block, x, G)
            if D1 == D0:
                total += prof.hm[(i, x)] * td.weights.get(x, 0.0)
            for y, w in td.weights.items():
                if y == x:
                    continue
                if _replace_in_cluster(D0, i, x, y) == D1:
                    total += prof.hm[(i, x)] * w
    return total


def natural_clustering_update(C_t: Clustering, U_t: Config,
                              U_next: Config) -> Clustering:
    """Transfer cluster labels across one HAT move; fall back to a single
    cluster when the configurations differ by more than one element."""
    U_t = as_config(U_t)
    U_next = as_config(U_next)
    if pi(C_t) != U_t:
        raise ValueError("C_t must partition U_t")
    if U_next == U_t:
        return C_t
    removed = U_t - U_next
    added = U_next - U_t
    if len(removed) == 1 and len(added) == 1:
        (x,) = removed
        (y,) = added
        return _replace_in_cluster(C_t, clust(C_t, x), x, y)
    return (U_next,)
