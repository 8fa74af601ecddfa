import numpy as np
import pytest

from hatlab.dynamics import (HatState, IhatState, McDynamicsParams, hat_step,
                             ihat_step, natural_clustering_update)
from hatlab.lattice import as_config, neighbors, pi, segment


def test_hat_step_d5_invariants(G5, rng):
    state = HatState(config=as_config(
        [(0, 0, 0, 0, 0), (1, 0, 0, 0, 0), (30, 0, 0, 0, 0),
         (31, 0, 0, 0, 0)]))
    for _ in range(50):
        new, mv = hat_step(state, G5, rng)
        assert len(new.config) == len(state.config)
        assert mv.activated in state.config
        remaining = state.config - {mv.activated}
        assert mv.target not in remaining
        assert any(y in remaining for y in neighbors(mv.target))
        assert new.config == remaining | {mv.target}
        assert new.step == state.step + 1
        state = new


def test_hat_step_d2_runs_without_green_table(rng):
    state = HatState(config=as_config([(0, 0), (1, 0), (10, 0), (11, 0)]))
    params = McDynamicsParams(radius_factor=8.0)
    for _ in range(20):
        state, mv = hat_step(state, None, rng, params)
        assert len(state.config) == 4


def test_ihat_step_invariants(G5, rng):
    clusters = (segment((1, 0, 0, 0, 0), 2), segment((52, 0, 0, 0, 0), 2))
    state = IhatState(clusters=clusters)
    for _ in range(50):
        new, mv = ihat_step(state, G5, rng)
        assert tuple(len(b) for b in new.clusters) == (2, 2)
        assert mv.cluster_label in (0, 1)
        assert mv.activated in state.clusters[mv.cluster_label]
        assert mv.target in new.clusters[mv.cluster_label]
        state = new


def test_natural_clustering_update_label_transfer():
    C = (as_config([(0, 0, 0, 0, 0)]), as_config([(5, 0, 0, 0, 0)]))
    U = pi(C)
    U_next = as_config([(0, 0, 0, 0, 0), (6, 0, 0, 0, 0)])
    C_next = natural_clustering_update(C, U, U_next)
    assert C_next == (as_config([(0, 0, 0, 0, 0)]),
                      as_config([(6, 0, 0, 0, 0)]))


def test_natural_clustering_update_fallback_and_validation():
    C = (as_config([(0, 0, 0, 0, 0)]), as_config([(5, 0, 0, 0, 0)]))
    U = pi(C)
    # More than one site changed: collapse to a single cluster.
    U_far = as_config([(1, 0, 0, 0, 0), (7, 0, 0, 0, 0)])
    assert natural_clustering_update(C, U, U_far) == (U_far,)
    with pytest.raises(ValueError):
        natural_clustering_update(C, as_config([(9, 9, 9, 9, 9)]), U)


def test_step_is_seed_deterministic(G5):
    init = as_config([(0, 0, 0, 0, 0), (1, 0, 0, 0, 0)])
    runs = []
    for _ in range(2):
        rng = np.random.default_rng(77)
        state = HatState(config=init)
        moves = []
        for _ in range(20):
            state, mv = hat_step(state, G5, rng)
            moves.append((mv.activated, mv.target))
        runs.append(moves)
    assert runs[0] == runs[1]
