import pytest

from hatlab.lattice import as_config, neighbors, segment
from hatlab.potential import (MAX_SET_SIZE, clustering_harmonic, escape_vector,
                              hitting_distribution, min_escape_bound,
                              outer_boundary, transport_distribution)
from hatlab.walk_mc import WalkBudget, mc_transport

O5 = (0, 0, 0, 0, 0)
E1 = (1, 0, 0, 0, 0)


def dimer():
    return as_config([O5, E1])


def test_dimer_escape_closed_form(G5):
    # Last-exit identity for two symmetric sites: esc = 1/(G(o) + G(e1)).
    prof = escape_vector(dimer(), G5)
    expected = 1.0 / (G5.origin() + G5(E1))
    for v in prof.esc.values():
        assert v == pytest.approx(expected, abs=1e-12)
    assert prof.cap == pytest.approx(2 * expected, abs=1e-12)
    assert prof.hm[O5] == pytest.approx(0.5, abs=1e-12)


def test_escape_probabilities_in_unit_interval(G5, rng):
    pts = {tuple(int(c) for c in p) for p in rng.integers(-3, 4, size=(8, 5))}
    prof = escape_vector(frozenset(pts), G5)
    assert all(0.0 <= v <= 1.0 for v in prof.esc.values())
    assert sum(prof.hm.values()) == pytest.approx(1.0, abs=1e-10)


def test_set_size_limit(G5):
    big = as_config([(i, 0, 0, 0, 0) for i in range(MAX_SET_SIZE + 1)])
    with pytest.raises(ValueError):
        escape_vector(big, G5)


def test_hitting_distribution_single_point_oracle(G5):
    # For A = {o}, h_x(o) = P_x(hit o) = G(x)/G(o).
    A = as_config([O5])
    for x in [(2, 0, 0, 0, 0), (1, 1, 1, 0, 0), (5, 5, 0, 0, 0)]:
        h = hitting_distribution(A, x, G5)
        assert h[O5] == pytest.approx(G5(x) / G5.origin(), abs=1e-12)


def test_hitting_distribution_requires_exterior_start(G5):
    with pytest.raises(ValueError):
        hitting_distribution(dimer(), O5, G5)


def test_outer_boundary_dimer():
    bd = outer_boundary(dimer())
    expected = (set(neighbors(O5)) | set(neighbors(E1))) - dimer()
    assert bd == expected


def test_transport_distribution_properties(G5):
    U = as_config([O5, E1, (0, 1, 0, 0, 0)])
    tr = transport_distribution(U, O5, G5)
    assert tr.source == O5
    assert sum(tr.weights.values()) == pytest.approx(1.0, abs=1e-10)
    assert 0.0 < tr.hit_probability <= 1.0
    # Transport targets are adjacent to the remaining set.
    A = U - {O5}
    bd = outer_boundary(A) | A
    assert all(y in bd for y in tr.weights)


def test_transport_symmetry(G5):
    # Source and target set both lie on the e1 axis, so the distribution
    # is invariant under sign flips and permutations of coordinates 2..5.
    tr = transport_distribution(dimer(), O5, G5)

    def flip(y):
        return (y[0], -y[1]) + y[2:]

    def swap(y):
        return (y[0], y[2], y[1]) + y[3:]

    for y, w in tr.weights.items():
        assert w == pytest.approx(tr.weights[flip(y)], abs=1e-12)
        assert w == pytest.approx(tr.weights[swap(y)], abs=1e-12)


def test_transport_vs_mc(G5):
    # Dual route: killed-Green exact solver vs direct walk simulation.
    U = as_config([O5, E1, (2, 0, 0, 0, 0)])
    tr = transport_distribution(U, (2, 0, 0, 0, 0), G5)
    est = mc_transport(U, (2, 0, 0, 0, 0),
                       WalkBudget(num_walks=400_000, escape_radius=300.0,
                                  seed=11))
    for y, e in est.items():
        exact = tr.weights.get(y, 0.0)
        assert abs(e.value - exact) <= 4 * e.std_error + 5e-3


def test_transport_requires_member_source(G5):
    with pytest.raises(ValueError):
        transport_distribution(dimer(), (9, 9, 9, 9, 9), G5)


def test_clustering_harmonic_matches_escape_vector_blind_union(G5):
    # Cluster-aware escape of a single cluster equals the plain profile.
    C = (dimer(),)
    cprof = clustering_harmonic(C, G5)
    prof = escape_vector(dimer(), G5)
    for x in dimer():
        assert cprof.hm[(0, x)] == pytest.approx(prof.hm[x], abs=1e-12)


def test_clustering_harmonic_two_far_clusters(G5):
    C = (dimer(), frozenset({(100 + c[0],) + c[1:] for c in dimer()}))
    cprof = clustering_harmonic(C, G5)
    assert sum(cprof.hm.values()) == pytest.approx(1.0, abs=1e-10)
    # Far-separated identical clusters split the measure nearly evenly.
    m0 = sum(v for (i, _), v in cprof.hm.items() if i == 0)
    assert m0 == pytest.approx(0.5, abs=1e-3)


def test_min_escape_bound_is_a_lower_bound(G5):
    a = 50
    C = (segment((1, 0, 0, 0, 0), 2), segment((1 + 1 + a, 0, 0, 0, 0), 2))
    bound = min_escape_bound(C, G5)
    cprof = clustering_harmonic(C, G5)
    assert min(cprof.esc.values()) >= bound > 0.0
