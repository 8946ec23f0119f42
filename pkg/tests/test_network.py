import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetexplore import network as nw


def test_neighbors():
    full = nw.complete_sequence(4)
    assert nw.neighbors_in(full, 0, 1) == {1, 2, 3}
    empty = nw.static_sequence(3, [])
    assert nw.neighbors_in(empty, 1, 0) == set()
    assert nw.neighbors_in(empty, 1, 0, closed=True) == {1}
    one = nw.static_sequence(3, [(2, 1)])
    assert nw.neighbors_in(one, 1, 5) == {2}
    assert nw.neighbors_in(one, 2, 5) == set()


def test_arc_validation():
    with pytest.raises(ValueError):
        nw.arcs_to_adj(2, [(0, 2)])
    assert nw.adj_to_arcs(nw.arcs_to_adj(3, [(0, 1), (1, 1)])) == {(0, 1)}


def test_validate_assumption():
    assert nw.validate_assumption(nw.complete_sequence(4, 2), 20) == (True, None)
    assert nw.validate_assumption(nw.directed_cycle_sequence(3), 30) == (True, None)
    assert nw.validate_assumption(nw.static_sequence(2, []), 4) == (False, 0)
    with pytest.raises(ValueError):
        nw.validate_assumption(nw.complete_sequence(3, 4), 2)


def test_window_convention():
    # arc (0, 1) only at t = 2; the window for k = 0 with tau = 2 covers t = 1, 2
    seq = nw.GraphSequence(2, lambda t: nw.arcs_to_adj(2, [(0, 1)] if t == 2 else []), 2)
    assert seq.window_union(0)[0, 1]
    assert not seq.window_union(1).any()


def test_diameter():
    assert nw.diameter(~np.eye(5, dtype=bool)) == 1
    assert nw.diameter(nw.arcs_to_adj(4, [(0, 1), (1, 2), (2, 3), (3, 0)])) == 3
    assert nw.diameter(np.zeros((1, 1), bool)) == 0
    with pytest.raises(nw.DisconnectedError):
        nw.diameter(np.zeros((2, 2), bool))


def test_proximity_graph():
    assert nw.proximity_graph([(0, 0), (1, 0)], 2) == {(0, 1), (1, 0)}
    assert nw.proximity_graph([(0, 0), (3, 0)], 2) == set()
    chain = nw.proximity_graph([(0, 0), (1.5, 0), (3, 0)], 2)
    assert chain == {(0, 1), (1, 0), (1, 2), (2, 1)}
    with pytest.raises(ValueError):
        nw.proximity_graph([(0, 0)], 0)


def test_shared_frontier_graph():
    arcs = nw.shared_frontier_graph([{1, 2}, {2}, {3}])
    assert arcs == {(0, 1), (1, 0)}


@settings(max_examples=40)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=8), st.floats(0.1, 6))
def test_proximity_symmetric(pts, r):
    arcs = nw.proximity_graph(pts, r)
    assert all((i, j) in arcs for j, i in arcs)


@settings(max_examples=30)
@given(st.integers(2, 6), st.integers(1, 3), st.floats(0, 0.5), st.integers(0, 10_000))
def test_patched_random_sequences_are_valid(n, tau, p, seed):
    seq = nw.random_sequence(n, tau, p, seed)
    assert nw.validate_assumption(seq, 6 * tau)[0]
    # pure in (seed, t)
    assert np.array_equal(seq.adjacency(5), nw.random_sequence(n, tau, p, seed).adjacency(5))


@settings(max_examples=30)
@given(st.integers(2, 6), st.integers(1, 3), st.integers(0, 1000))
def test_adding_arcs_keeps_validity(n, tau, seed):
    base = nw.ring_sequence(n, tau)
    extra = nw.random_sequence(n, tau, 0.3, seed)
    both = nw.GraphSequence(n, lambda t: base.adjacency(t) | extra.adjacency(t), tau)
    assert nw.validate_assumption(base, 4 * tau)[0]
    assert nw.validate_assumption(both, 4 * tau)[0]


def test_ring_spreads_over_tau():
    seq = nw.ring_sequence(5, 3)
    assert not nw.strongly_connected(seq.adjacency(1))
    assert nw.strongly_connected(seq.window_union(0))
