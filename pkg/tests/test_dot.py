import math

import pytest

from hatlab.dot import (DotParams, ZWalkState, center_of_mass, check_amlg,
                        check_dist_below_cm, check_sep_to_dist,
                        event_tracker, find_dot_clustering, is_dot,
                        is_reference, schedule, sep_to_dist_bound,
                        z_walk_advance)
from hatlab.lattice import as_config, segment


def dot_clustering(a):
    # Two e1-aligned dimers separated by exactly a.
    return (segment((1, 0, 0, 0, 0), 2), segment((2 + a, 0, 0, 0, 0), 2))


def test_is_reference():
    assert is_reference(segment((5, 1, 0), 2))
    assert is_reference(segment((5, 1, 0), 3))
    assert not is_reference(as_config([(0, 0, 0), (0, 1, 0)]))
    assert not is_reference(as_config([(0, 0, 0), (2, 0, 0)]))
    assert not is_reference(as_config([(0, 0, 0)]))


def test_center_of_mass():
    # Scaled by 6 so two- and three-element clusters stay on the lattice.
    A = as_config([(0, 0), (2, 4)])
    assert center_of_mass(A) == (6, 12)
    B = as_config([(0, 0), (1, 0), (2, 0)])
    assert center_of_mass(B) == (6, 0)


def test_is_dot_and_find_dot_clustering():
    a = 16
    C = dot_clustering(a)
    p = DotParams(a=a, b=1.0)
    assert is_dot(C, p)
    found = find_dot_clustering(frozenset().union(*C), p)
    assert found is not None
    assert set(found) == set(C)
    # Too-near clusters are not a dot.
    assert not is_dot(dot_clustering(2), DotParams(a=16, b=1.0))


def test_schedule_formulas_and_validation():
    s = schedule(1.0, 2.0, 3.0, a=10.0, n=4)
    assert s.delta(2) == 1.0 / 8
    assert s.t(2) == int(2.0 * 8**4 * math.log(10.0) * (4 * 10.0) ** 2)
    assert s.kappa(1) == 3.0 * math.log(4 * 1 * s.t(1))
    assert s.t(0) == 0
    with pytest.raises(ValueError):
        schedule(0.0, 1.0, 1.0, a=10.0, n=4)
    with pytest.raises(ValueError):
        schedule(1.0, 1.0, 1.0, a=0.5, n=4)


def test_event_tracker_insufficient_trajectory():
    C = dot_clustering(16)
    sched = schedule(1.0, 1.0, 1.0, a=4.0, n=4)
    recs = event_tracker([C] * 3, sched, (0, 1), levels=1)
    assert recs[0].insufficient
    assert recs[0].g1 is None


def test_event_tracker_static_far_pair():
    # A frozen pair of reference dimers very far apart: G1 and G3 hold,
    # G2 fires immediately, and G4 holds after S_l.
    a = 2.0
    sched = schedule(1.0, 0.001, 5.0, a=a, n=4)
    t1 = sched.t(1)
    assert 0 < t1 < 200
    C = dot_clustering(1000)
    recs = event_tracker([C] * (t1 + 1), sched, (0, 1), levels=1)
    r = recs[0]
    assert not r.insufficient
    assert r.g1 and r.g2 and r.g3 and r.g4


def test_z_walk_records_reference_positions():
    C = dot_clustering(16)
    state = ZWalkState(pair=(0, 1), kappa=10.0)
    for t in range(3):
        state = z_walk_advance(state, C, t)
    assert len(state.positions) >= 1


def test_sep_to_dist_bound_and_checks():
    assert sep_to_dist_bound(68.0, 1.0) == pytest.approx(10.0)
    C = dot_clustering(100)
    assert check_sep_to_dist(C, (0, 1))
    assert check_dist_below_cm(C, (0, 1))
    assert check_amlg([C, C, C], (0, 1), 0, 2)
