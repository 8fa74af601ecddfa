"""Formation algorithms: deterministic move scripts that rearrange any
configuration into a well-separated dimer-or-trimer clustering.

Stage 1 (``algorithm_a1``) gathers the configuration into connected,
far-separated clusters of size >= 2 by walking the lexicographically least
element toward the rest and treadmilling pairs far away in the -e1
direction. Stage 2 (``algorithm_a2``) rearranges each cluster into a -e1
line segment anchored at its lex-least element. Stage 3 (``algorithm_a3``)
peels pairs off each segment, treadmilling them away as new clusters, until
only a dimer or trimer of each original segment remains.

Every algorithm returns a :class:`MoveScript` whose moves are single
activation/transport steps, with treadmills expanded so that each
intermediate configuration appears explicitly. ``verify_script`` replays a
script and certifies that every move has positive probability under the
exact activation and transport distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .dynamics import MoveRecord
from .green import GreenTable
from .lattice import (Clustering, Config, Point, dimension, dist,
                      is_exposed, lex, neighbors, pi, segment, sep, sub,
                      unit)
from .potential import escape_vector, transport_distribution

__all__ = [
    "SelectorPolicy", "MoveScript", "MoveCheck", "VerifyReport",
    "mu", "nu", "near", "can_be_lined_up",
    "algorithm_a1", "algorithm_a2", "algorithm_a3",
    "replay_script", "verify_script",
]


# ---------------------------------------------------------------------------
# Selectors

@dataclass(frozen=True)
class SelectorPolicy:
    """Deterministic tie-breaking for the selectors.

    ``mu_domain`` chooses the candidate set of ``mu``: ``"support"`` (the
    support of the exact transport distribution) or ``"literal"`` (the
    elements of the remaining set themselves, on which the last-site kernel
    places no mass, so this mode always raises). All ties are broken
    lexicographically; ``near`` prefers the smallest cluster index.
    """

    mu_domain: str = "support"

    def __post_init__(self):
        if self.mu_domain not in ("literal", "support"):
            raise ValueError(f"unknown mu_domain {self.mu_domain!r}")


DEFAULT_POLICY = SelectorPolicy()


def mu(U: Config, x: Point, G: GreenTable,
       policy: SelectorPolicy = DEFAULT_POLICY) -> Point:
    """Most likely transport target when x is activated in U.

    Returns the lexicographically least maximizer of the transport
    distribution of ``(U, x)`` over the candidate set chosen by ``policy``.
    Raises ValueError if no candidate carries positive mass.
    """
    if x not in U:
        raise ValueError("x must be an element of U")
    if len(U) < 2:
        raise ValueError("mu requires |U| >= 2")
    td = transport_distribution(U, x, G)
    if policy.mu_domain == "literal":
        rest_set = U - {x}
        cands = {y: w for y, w in td.weights.items() if y in rest_set and w > 0}
    else:
        cands = {y: w for y, w in td.weights.items() if w > 0}
    if not cands:
        raise ValueError("empty candidate support")
    best = max(cands.values())
    return min(y for y, w in cands.items() if w == best)


def nu(U: Config, x: Point) -> Point:
    """Lexicographically least neighbor of x that lies in U and is exposed."""
    cands = [y for y in neighbors(x) if y in U and is_exposed(U, y)]
    if not cands:
        raise ValueError("no exposed neighbor")
    return min(cands)


def near(C: Clustering, y: Point) -> int:
    """Index (0-based) of the first cluster within distance 1 of y."""
    for j, block in enumerate(C):
        if dist(frozenset([y]), block) <= 1.0:
            return j
    raise ValueError("no cluster within distance 1")


# ---------------------------------------------------------------------------
# Scripts

@dataclass(frozen=True)
class MoveScript:
    """A deterministic sequence of single HAT moves.

    Replaying ``moves`` from ``initial`` yields ``pi(final_clustering)``;
    every move preserves cardinality.
    """

    initial: Config
    moves: tuple
    final_clustering: Clustering


def _apply_move(W: Config, x: Point, y: Point) -> Config:
    if x not in W:
        raise ValueError(f"activated site {x} not in configuration")
    if y != x and y in W:
        raise ValueError(f"target {y} already occupied")
    return (W - {x}) | {y}


def replay_script(script: MoveScript) -> Config:
    """Apply the moves in order and check the final-configuration invariant."""
    W = script.initial
    n = len(W)
    for mv in script.moves:
        W = _apply_move(W, mv.activated, mv.target)
        if len(W) != n:
            raise ValueError(f"move {mv.step_index} changed cardinality")
    if W != pi(script.final_clustering):
        raise ValueError("replayed configuration does not match final clustering")
    return W


def can_be_lined_up(C: Clustering, r: float) -> bool:
    """Connected clusters of size >= 2 with pairwise separation >= 2r."""
    for block in C:
        if len(block) < 2 or not _connected(block):
            return False
    return len(C) < 2 or sep(C) >= 2 * r


def _connected(A: Config) -> bool:
    start = next(iter(A))
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for y in neighbors(x):
            if y in A and y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == len(A)


def _treadmill(ell: Point, y: Point, r: int, label: Optional[int],
               start_index: int) -> list:
    """Moves treadmilling the pair {ell, y} to {ell-r*e1, ell-(r-1)*e1}.

    The first move activates y and transports it to ell - e1; each later
    move activates the trailing element of the pair and leapfrogs it one
    site past the leading element, r moves in total.
    """
    d = len(ell)
    e1 = unit(d, 0)
    out = [MoveRecord(y, sub(ell, e1), label, start_index)]
    for m in range(1, r):
        out.append(MoveRecord(sub(ell, unit(d, 0, m - 1)),
                              sub(ell, unit(d, 0, m + 1)),
                              label, start_index + m))
    return out


# ---------------------------------------------------------------------------
# Algorithm 1: gather into far-separated connected clusters

def algorithm_a1(U: Config, a: int, G: GreenTable,
                 policy: SelectorPolicy = DEFAULT_POLICY) -> MoveScript:
    """Gather U into a clustering that can be lined up with separation dn^2 a.

    Repeatedly takes the lex-least element ell of the remaining set: while
    ell is isolated, replaces it by the most likely transport target (which
    either rejoins the remaining set or an existing cluster); once ell has a
    neighbor, treadmills the pair a distance 3d(n-i+1)^3 a in the -e1
    direction to become cluster i. A final leftover singleton joins the
    nearest cluster.
    """
    n = len(U)
    d = dimension(U)
    if n < 4:
        raise ValueError("algorithm_a1 requires |U| >= 4")
    if d < 5:
        raise ValueError("algorithm_a1 requires dimension >= 5")
    if a < 2:
        raise ValueError("a must be an integer >= 2")
    initial = frozenset(U)
    live = set(U)
    clusters: list = []
    moves: list = []
    i = 1  # 1-based index of the next treadmilled cluster
    idx = 0

    def whole() -> Config:
        out = set(live)
        for block in clusters:
            out |= block
        return frozenset(out)

    while live:
        ell = lex(live)
        r = 3 * d * (n - i + 1) ** 3 * a
        rest_live = frozenset(live - {ell})
        R = dist(frozenset([ell]), rest_live) if rest_live else math.inf
        guard = 0
        # Walk ell toward the rest of the configuration until it has a
        # lattice neighbor (or live is reduced to a singleton).
        while R > 1 and len(live) > 1:
            x = mu(whole(), ell, G, policy)
            if any(z in live for z in neighbors(x)):
                live.discard(ell)
                live.add(x)
                moves.append(MoveRecord(ell, x, None, idx))
            else:
                j = near(tuple(clusters), x)
                live.discard(ell)
                clusters[j] = clusters[j] | {x}
                moves.append(MoveRecord(ell, x, j, idx))
            idx += 1
            ell = lex(live)
            rest_live = frozenset(live - {ell})
            R = dist(frozenset([ell]), rest_live)
            guard += 1
            if guard > n * (n + 1):
                raise RuntimeError("inner loop exceeded its proven bound")
        if len(live) > 1:
            # ell is non-isolated: treadmill the pair {ell, y} away.
            y = nu(whole(), ell)
            if y not in live:
                raise RuntimeError("exposed neighbor of the lex element "
                                   "belongs to a formed cluster")
            tm = _treadmill(ell, y, r, i - 1, idx)
            moves.extend(tm)
            idx += len(tm)
            live -= {ell, y}
            clusters.append(segment(sub(ell, unit(d, 0, r - 1)), 2))
            i += 1
        else:
            # live == {ell}: move it until it joins an existing cluster.
            x = mu(whole(), ell, G, policy)
            j = near(tuple(clusters), x)
            moves.append(MoveRecord(ell, x, j, idx))
            idx += 1
            live.discard(ell)
            clusters[j] = clusters[j] | {x}
    return MoveScript(initial, tuple(moves), tuple(clusters))


# ---------------------------------------------------------------------------
# Algorithm 2: line up each cluster as a -e1 segment

def algorithm_a2(C: Clustering) -> MoveScript:
    """Rearrange each cluster into the segment lex(C^i) + L_{|C^i|}.

    For each cluster, one element at a time (lex-least among those exposed
    in the full configuration and not yet part of the growing segment) is
    moved to the next empty segment position below the anchor. Positions
    already occupied need no move and are skipped.
    """
    n = len(pi(C))
    d = dimension(pi(C))
    if not can_be_lined_up(C, d * n * n * 2):
        raise ValueError("clustering cannot be lined up at the required separation")
    initial = pi(C)
    clusters = [set(block) for block in C]
    moves: list = []
    idx = 0
    for i, block in enumerate(clusters):
        anchor = lex(block)
        k = len(block)
        for j in range(1, k):
            y = sub(anchor, unit(d, 0, j))
            if y in block:
                continue
            grown = segment(anchor, j)
            whole = frozenset().union(*clusters)
            cands = [z for z in block - grown if is_exposed(whole, z)]
            if not cands:
                raise RuntimeError("no exposed element outside the growing segment")
            x = min(cands)
            block.discard(x)
            block.add(y)
            moves.append(MoveRecord(x, y, i, idx))
            idx += 1
    final = tuple(frozenset(block) for block in clusters)
    return MoveScript(initial, tuple(moves), final)


# ---------------------------------------------------------------------------
# Algorithm 3: peel pairs off each segment

def algorithm_a3(C: Clustering, a: int) -> MoveScript:
    """Treadmill pairs off each segment until a dimer or trimer remains.

    Requires the clusters to be -e1 segments with separation >= n^2 a. The
    j-th pair peeled from a cluster travels r = 2(n-j)a sites in the -e1
    direction and becomes a new cluster appended after the existing ones.
    """
    if a < 2:
        raise ValueError("a must be an integer >= 2")
    U = pi(C)
    n = len(U)
    d = dimension(U)
    if any(block != segment(max(block), len(block)) for block in C):
        raise ValueError("clusters must be -e1 segments anchored at their lex elements")
    if len(C) >= 2 and sep(C) < n * n * a:
        raise ValueError("clustering is not n^2 a separated")
    clusters = [set(block) for block in C]
    moves: list = []
    idx = 0
    m = len(clusters)
    for i in range(m):
        pairs = len(clusters[i]) // 2 - 1
        for j in range(1, pairs + 1):
            ell = lex(clusters[i])
            r = 2 * (n - j) * a
            label = len(clusters)
            tm = _treadmill(ell, sub(ell, unit(d, 0, -1)), r, label, idx)
            moves.extend(tm)
            idx += len(tm)
            clusters[i] -= {ell, sub(ell, unit(d, 0, -1))}
            clusters.append(set(segment(sub(ell, unit(d, 0, r - 1)), 2)))
    final = tuple(frozenset(block) for block in clusters)
    return MoveScript(frozenset(U), tuple(moves), final)


# ---------------------------------------------------------------------------
# Verification

@dataclass(frozen=True)
class MoveCheck:
    """Exact probabilities of one scripted move (zero when illegal)."""

    step_index: int
    activated: Point
    target: Point
    activation_prob: float
    transport_prob: float
    move_prob: float
    cause: Optional[str] = None


@dataclass(frozen=True)
class VerifyReport:
    """Legality report for a MoveScript.

    ``probability`` is the product of the exact per-move probabilities (a
    lower bound on the chance HAT realizes the script); ``log_probability``
    is its natural log, computed stably. On failure, ``failure_index`` and
    ``failure_cause`` identify the first illegal move.
    """

    ok: bool
    checks: tuple
    probability: float
    log_probability: float
    failure_index: Optional[int] = None
    failure_cause: Optional[str] = None


def _batch_probs(seq: list, G: GreenTable, chunk: int = 2048):
    """Exact (activation, transport) probabilities for a list of legal-shape
    moves ``(W, x, y)``, arithmetic mirroring escape_vector and
    transport_distribution, batched over stacked small linear systems."""
    import numpy as np
    from .potential import CLAMP, COND_LIMIT, _boundary_counts

    total = len(seq)
    hm_out = np.empty(total)
    tr_out = np.empty(total)
    if total == 0:
        return hm_out, tr_out
    d = len(seq[0][1])
    two_d = 2.0 * d

    def batch_inv(M, what):
        Minv = np.linalg.inv(M)
        cond1 = (np.abs(M).sum(axis=1).max(axis=1)
                 * np.abs(Minv).sum(axis=1).max(axis=1))
        if cond1.max() > COND_LIMIT:
            raise ArithmeticError(f"{what}: Green matrix ill-conditioned")
        return Minv

    def clamp(vec, what):
        if vec.min() < CLAMP:
            raise ArithmeticError(
                f"{what}: negative entry {vec.min():.3e} beyond clamp "
                "threshold (ill-conditioned system)")
        return np.maximum(vec, 0.0)

    for lo in range(0, total, chunk):
        part = seq[lo:lo + chunk]
        N = len(part)
        n = len(part[0][0])
        pts = np.empty((N, n, d), dtype=np.int64)
        xs = np.empty((N, d), dtype=np.int64)
        x_idx = np.empty(N, dtype=np.int64)
        counts_all = []
        y_idx = np.empty(N, dtype=np.int64)
        kmax = 0
        for k, (W, x, y) in enumerate(part):
            spts = sorted(W)
            pts[k] = spts
            xs[k] = x
            x_idx[k] = spts.index(x)
            counts = _boundary_counts(W - {x})
            cands = sorted(counts)
            counts_all.append((cands, counts))
            y_idx[k] = cands.index(y) if y in cands else -1
            kmax = max(kmax, len(cands))
        # activation: harmonic measure of x in W
        M = G.many(pts[:, :, None, :] - pts[:, None, :, :])
        z = clamp(batch_inv(M, "escape_vector").sum(axis=2), "escape_vector")
        hm_out[lo:lo + N] = z[np.arange(N), x_idx] / z.sum(axis=1)
        # transport: conditional weight of y for the walk from x to W\{x}
        keep = np.ones(n, dtype=bool)
        B = np.empty((N, n - 1, d), dtype=np.int64)
        for k in range(N):
            keep[:] = True
            keep[x_idx[k]] = False
            B[k] = pts[k][keep]
        cpad = np.zeros((N, kmax, d), dtype=np.int64)
        npad = np.zeros((N, kmax))
        for k, (cands, counts) in enumerate(counts_all):
            cpad[k, :len(cands)] = cands
            npad[k, :len(cands)] = [counts[c] for c in cands]
        M2inv = batch_inv(G.many(B[:, :, None, :] - B[:, None, :, :]),
                          "transport_distribution")
        g_xb = G.many(xs[:, None, :] - B)
        h = clamp(np.einsum("nij,nj->ni", M2inv, g_xb),
                  "transport_distribution")
        g_xc = G.many(xs[:, None, :] - cpad)
        g_pc = G.many(B[:, :, None, :] - cpad[:, None, :, :])
        killed = g_xc - np.einsum("nik,ni->nk", g_pc, h)
        if (killed[npad > 0]).min() < CLAMP:
            raise ArithmeticError(
                "transport_distribution killed Green: negative entry beyond "
                "clamp threshold (ill-conditioned system)")
        w = np.maximum(killed, 0.0) * npad / two_d
        tot = w.sum(axis=1)
        if tot.min() <= 0.0:
            raise ArithmeticError("transport weights vanished (internal error)")
        present = y_idx >= 0
        vals = np.zeros(N)
        vals[present] = (w[np.arange(N), np.maximum(y_idx, 0)] / tot)[present]
        tr_out[lo:lo + N] = vals
    return hm_out, tr_out


def verify_script(script: MoveScript, G: GreenTable) -> VerifyReport:
    """Check every move is a positive-probability HAT transition.

    Each move must activate a site of positive harmonic measure and
    transport it to a site of positive weight under the exact transport
    distribution; verification stops at the first illegal move. Matches the
    per-move probabilities of escape_vector and transport_distribution.
    """
    import numpy as np

    W = script.initial
    seq: list = []
    struct_cause = None
    struct_at = None
    for k, mv in enumerate(script.moves):
        x, y = mv.activated, mv.target
        if x not in W:
            struct_at, struct_cause = k, "activated site not in configuration"
            break
        rest_set = W - {x}
        if y != x:
            if y in rest_set:
                struct_at, struct_cause = k, "target occupied"
                break
            if not any(z in rest_set for z in neighbors(y)):
                struct_at, struct_cause = k, "target not adjacent to remaining set"
                break
        seq.append((W, x, y))
        W = rest_set | {y}

    hm_ps, tr_ps = _batch_probs(seq, G)
    bad_hm = hm_ps <= 0.0
    bad_tr = tr_ps <= 0.0
    prob_at = int(np.argmax(bad_hm | bad_tr)) if (bad_hm | bad_tr).any() else None

    checks: list = []
    log_p = 0.0
    good = len(seq) if prob_at is None else prob_at
    for k in range(good):
        mv = script.moves[k]
        hm_p, tr_p = float(hm_ps[k]), float(tr_ps[k])
        checks.append(MoveCheck(mv.step_index, mv.activated, mv.target,
                                hm_p, tr_p, hm_p * tr_p))
        log_p += math.log(hm_p) + math.log(tr_p)
    if prob_at is not None:
        mv = script.moves[prob_at]
        if bad_hm[prob_at]:
            cause, hm_p, tr_p = "activation has zero harmonic measure", 0.0, 0.0
        else:
            cause, hm_p, tr_p = ("transport target has zero probability",
                                 float(hm_ps[prob_at]), 0.0)
        checks.append(MoveCheck(mv.step_index, mv.activated, mv.target,
                                hm_p, tr_p, 0.0, cause))
        return VerifyReport(False, tuple(checks), 0.0, -math.inf,
                            mv.step_index, cause)
    if struct_cause is not None:
        mv = script.moves[struct_at]
        checks.append(MoveCheck(mv.step_index, mv.activated, mv.target,
                                0.0, 0.0, 0.0, struct_cause))
        return VerifyReport(False, tuple(checks), 0.0, -math.inf,
                            mv.step_index, struct_cause)
    if W != pi(script.final_clustering):
        return VerifyReport(False, tuple(checks), 0.0, -math.inf, None,
                            "final configuration does not match final clustering")
    return VerifyReport(True, tuple(checks), math.exp(log_p), log_p)
