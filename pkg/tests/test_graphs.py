import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stldecomp.errors import GraphError
from stldecomp.graphs import (UndirectedGraph, edge_sequence, enumerate_cycles, hop_distances, rewrite_task_graph,
                              shortest_path, validate_cycle)

COMM8 = [(1, 2), (1, 3), (1, 4), (1, 5), (4, 6), (5, 6), (6, 7), (6, 8)]


def graph(n, edges):
    return UndirectedGraph(n, frozenset(edges))


def test_formation_paths():
    g = graph(8, COMM8)
    assert shortest_path(g, 5, 2) == (5, 1, 2)
    assert shortest_path(g, 4, 6) == (4, 6)
    assert shortest_path(g, 8, 7) == (8, 6, 7)


def test_path_errors():
    g = graph(4, [(1, 2), (3, 4)])
    with pytest.raises(GraphError):
        shortest_path(g, 1, 3)
    with pytest.raises(GraphError):
        shortest_path(g, 1, 9)
    with pytest.raises(GraphError):
        shortest_path(g, 1, 1)


def test_edge_sequence():
    assert edge_sequence([1, 2, 3]) == [(1, 2), (2, 3)]
    assert edge_sequence([4, 6]) == [(4, 6)]
    assert edge_sequence([1, 2, 6, 1]) == [(1, 2), (2, 6), (6, 1)]


def test_rewrite_formation():
    gc = graph(8, COMM8)
    gpsi = graph(8, [(2, 5), (2, 3), (3, 4), (4, 7), (5, 8), (7, 8), (4, 6), (5, 6), (1, 2), (6, 8)])
    paths = {(2, 5): (5, 1, 2), (2, 3): (2, 1, 3), (3, 4): (4, 1, 3), (4, 7): (4, 6, 7), (5, 8): (5, 6, 8),
             (7, 8): (8, 6, 7)}
    out = rewrite_task_graph(gpsi, gc, paths)
    assert out.edges <= gc.edges
    assert out.edges == gc.edges


def test_rewrite_trivial_and_small():
    g = graph(3, [(1, 2)])
    assert rewrite_task_graph(g, graph(3, [(1, 2), (2, 3)]), {}) == g
    out = rewrite_task_graph(graph(3, [(1, 3)]), graph(3, [(1, 2), (2, 3)]), {(1, 3): (1, 2, 3)})
    assert out.edges == {(1, 2), (2, 3)}
    with pytest.raises(GraphError):
        rewrite_task_graph(graph(3, [(1, 3)]), graph(3, [(1, 2), (2, 3)]), {})


def test_cycles_examples():
    assert enumerate_cycles(graph(3, [(1, 2), (2, 3), (1, 3)])) == [(1, 2, 3, 1)]
    assert enumerate_cycles(graph(4, [(1, 2), (2, 3), (2, 4)])) == []
    k4 = graph(4, list(itertools.combinations(range(1, 5), 2)))
    cyc = enumerate_cycles(k4, max_len=4)
    assert len(cyc) == 7
    assert sum(len(c) == 4 for c in cyc) == 4 and sum(len(c) == 5 for c in cyc) == 3


def _brute_cycles(g, max_len):
    found = set()
    for k in range(3, max_len + 1):
        for nodes in itertools.permutations(g.nodes, k):
            if nodes[0] != min(nodes):
                continue
            closed = nodes + (nodes[0],)
            if all(g.has_edge(a, b) for a, b in edge_sequence(closed)):
                found.add(frozenset(frozenset(e) for e in edge_sequence(closed)))
    return found


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 6), st.integers(0, 2**31 - 1))
def test_cycles_match_brute_force(n, seed):
    r = np.random.default_rng(seed)
    edges = [e for e in itertools.combinations(range(1, n + 1), 2) if r.random() < 0.5]
    g = graph(n, edges)
    cyc = enumerate_cycles(g, max_len=n)
    for c in cyc:
        validate_cycle(g, c)
    as_sets = [frozenset(frozenset(e) for e in edge_sequence(c)) for c in cyc]
    assert len(set(as_sets)) == len(as_sets)
    assert set(as_sets) == _brute_cycles(g, n)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**31 - 1))
def test_path_length_is_bfs_distance(n, seed):
    r = np.random.default_rng(seed)
    # random spanning tree plus extra edges keeps the graph connected
    edges = [(int(r.integers(1, k)), k) for k in range(2, n + 1)]
    edges += [e for e in itertools.combinations(range(1, n + 1), 2) if r.random() < 0.3]
    g = graph(n, edges)
    for i, j in itertools.permutations(g.nodes, 2):
        p = shortest_path(g, i, j)
        assert len(p) == hop_distances(g, i)[j] + 1
        assert p[0] == i and p[-1] == j


def test_path_closure_on_random_signals(rng):
    x = {a: rng.normal(size=(5, 2)) for a in range(1, 5)}
    path = (1, 3, 2, 4)
    total = sum(x[s] - x[r] for r, s in edge_sequence(path))
    assert np.allclose(total, x[4] - x[1])
    cyc = (1, 2, 3, 1)
    assert np.allclose(sum(x[s] - x[r] for r, s in edge_sequence(cyc)), 0, atol=1e-12)


def test_graph_validation():
    with pytest.raises(GraphError):
        graph(3, [(1, 1)])
    with pytest.raises(GraphError):
        graph(3, [(1, 4)])
    g = graph(3, [(2, 1)])
    assert g.has_edge(1, 2) and g.neighbors(3) == () and not g.is_connected()
