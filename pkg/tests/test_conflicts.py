import pytest
from hypothesis import given, settings, strategies as st

from stldecomp.conflicts import (TYPE1, TYPE2, TYPE3, Conjunct, EdgeTaskBundle, audit, combination_tuples,
                                 cycle_premise, detect_cycle_conflicts, detect_edge_conflicts, regions_disjoint,
                                 resolution_constraints, triggering_tuples)
from stldecomp.errors import ConflictError
from stldecomp.geometry import HyperRect
from stldecomp.problem import BoxInBox, ParameterSet, VertexInclusion
from stldecomp.stl import Ball, Operator, Polytope, Rect

G, F = Operator.ALWAYS, Operator.EVENTUALLY


def fixed(uid, op, iv, center, size):
    return Conjunct(uid, op, iv, predicate=Rect(HyperRect(center, size)))


def param(uid, op, iv, ps, key):
    return Conjunct(uid, op, iv, expr=ps.rect(key))


def params(*keys, dim=2):
    """Parameter set with every block registered before expressions are built."""
    ps = ParameterSet(dim)
    for k in keys:
        ps.add(k)
    return ps


def solved(uid, op, iv, center, size):
    """A parametric conjunct whose values are already known."""
    ps = ParameterSet(len(center))
    ps.add(uid)
    return Conjunct(uid, op, iv, expr=ps.rect(uid), rect=HyperRect(center, size))


def test_type1_example():
    b = EdgeTaskBundle((1, 2), [fixed("a", G, (0, 5), [0, 0], [1, 1]), fixed("b", G, (3, 8), [10, 10], [1, 1])])
    recs = detect_edge_conflicts(b)
    assert [r.kind for r in recs] == [TYPE1]
    b = EdgeTaskBundle((1, 2), [fixed("a", G, (0, 2), [0, 0], [1, 1]), fixed("b", G, (3, 8), [10, 10], [1, 1])])
    assert detect_edge_conflicts(b) == []


def test_type2_example():
    b = EdgeTaskBundle((1, 2), [fixed("g", G, (0, 10), [0, 0], [1, 1]), fixed("f", F, (2, 3), [5, 5], [1, 1])])
    assert [r.kind for r in detect_edge_conflicts(b)] == [TYPE2]
    # F window sticking out of the G window: no premise
    b = EdgeTaskBundle((1, 2), [fixed("g", G, (0, 10), [0, 0], [1, 1]), fixed("f", F, (8, 12), [5, 5], [1, 1])])
    assert detect_edge_conflicts(b) == []


def test_unsolved_parametric_skipped():
    ps = params("p")
    b = EdgeTaskBundle((1, 2), [param("p", G, (0, 5), ps, "p"), fixed("b", G, (0, 5), [10, 10], [1, 1])])
    assert detect_edge_conflicts(b) == []


def triangle(centers, sizes, intervals=None, ops=None):
    intervals = intervals or [(0, 1)] * 3
    ops = ops or [G] * 3
    cycle = (1, 2, 3, 1)
    edges = [(1, 2), (2, 3), (1, 3)]
    # conjuncts are written over x_s - x_r along the traversal; the (3, 1) step is stored reversed
    bundles = {}
    for k, ((r, s), c, v) in enumerate(zip([(1, 2), (2, 3), (3, 1)], centers, sizes)):
        conj = solved(f"c{k}", ops[k], intervals[k], c, v)
        if r > s:
            conj = conj.flipped()
        bundles[edges[k]] = EdgeTaskBundle(edges[k], [conj])
    return cycle, bundles


def test_type3_triangle_examples():
    tiny = [[0.1, 0.1]] * 3
    cyc, bundles = triangle([[1, 0], [1, 0], [1, 0]], tiny)
    recs = detect_cycle_conflicts(cyc, bundles, (0, 0, 0))
    assert [r.kind for r in recs] == [TYPE3]
    cyc, bundles = triangle([[1, 0], [1, 0], [-2, 0]], [[1, 1]] * 3)
    assert detect_cycle_conflicts(cyc, bundles, (0, 0, 0)) == []
    cyc, bundles = triangle([[1, 0]] * 3, tiny, intervals=[(0, 1), (2, 3), (4, 5)])
    assert detect_cycle_conflicts(cyc, bundles, (0, 0, 0)) == []


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 3), st.floats(0.05, 3)),
                min_size=3, max_size=3))
def test_type3_invariant_to_orientation_and_start(boxes):
    centers = [[b[0], b[1]] for b in boxes]
    sizes = [[b[2], b[3]] for b in boxes]
    cyc, bundles = triangle(centers, sizes)
    base = bool(detect_cycle_conflicts(cyc, bundles, (0, 0, 0)))
    for other in [(2, 3, 1, 2), (3, 1, 2, 3), (1, 3, 2, 1), (2, 1, 3, 2)]:
        assert bool(detect_cycle_conflicts(other, bundles, (0, 0, 0))) == base


def test_combination_counts_and_cap():
    def bundle(edge, n):
        return EdgeTaskBundle(edge, [fixed(f"{edge}{k}", G, (0, 1), [0, 0], [1, 1]) for k in range(n)])
    bundles = {(1, 2): bundle((1, 2), 2), (2, 3): bundle((2, 3), 1), (1, 3): bundle((1, 3), 3)}
    assert len(list(combination_tuples((1, 2, 3, 1), bundles))) == 6
    with pytest.raises(ValueError, match="1, 2, 3, 1"):
        combination_tuples((1, 2, 3, 1), bundles, cap=5)
    single = {k: bundle(k, 1) for k in bundles}
    assert len(list(combination_tuples((1, 2, 3, 1), single))) == 1


def test_timing_filter():
    cs = [fixed(f"c{k}", G, iv, [0, 0], [1, 1]) for k, iv in enumerate([(0, 1), (2, 3), (4, 5)])]
    assert cycle_premise(cs) is None
    bundles = {e: EdgeTaskBundle(e, [c]) for e, c in zip([(1, 2), (2, 3), (1, 3)], cs)}
    assert triggering_tuples((1, 2, 3, 1), bundles) == []
    f = [fixed("g", G, (0, 10), [0, 0], [1, 1]), fixed("f", F, (2, 4), [0, 0], [1, 1])]
    assert cycle_premise(f) == ("Type4", 1)
    two_f = [fixed("f1", F, (2, 4), [0, 0], [1, 1]), fixed("f2", F, (2, 4), [0, 0], [1, 1])]
    assert cycle_premise(two_f) is None
    instants = [fixed("f1", F, (3, 3), [0, 0], [1, 1]), fixed("f2", F, (3, 3), [0, 0], [1, 1])]
    assert cycle_premise(instants) == ("Type4", 2)


def test_regions_disjoint_mixed_shapes():
    ball = Ball([0, 0], 1)
    assert regions_disjoint(ball, Ball([2.5, 0], 1))
    assert not regions_disjoint(ball, Ball([1.5, 0], 1))
    assert regions_disjoint(ball, Rect(HyperRect([2, 2], [1, 1])))
    assert not regions_disjoint(ball, Rect(HyperRect([1.2, 0], [1, 1])))
    half = Polytope([[1, 1]], [-2])  # x + y <= -2, distance sqrt(2) from the origin
    assert regions_disjoint(ball, half)
    assert not regions_disjoint(Ball([0, 0], 1.5), half)
    assert regions_disjoint(Rect(HyperRect([0, 0], [1, 1])), half)
    assert not regions_disjoint(Rect(HyperRect([-2, -2], [1, 1])), half)


def parametric_pair(d1, d2, op2=G):
    ps = params("a", "b")
    a = param("a", G, (0, d1), ps, "a")
    b = param("b", op2, (0, d2), ps, "b")
    return ps, EdgeTaskBundle((1, 2), [a, b])


def test_type1_resolution_direction():
    ps, b = parametric_pair(5, 3)
    cons, recs = resolution_constraints({(1, 2): b}, [], ps.size)
    (c,), (r,) = cons, recs
    assert isinstance(c, BoxInBox) and r.kind == TYPE1
    # the shorter window goes inside
    assert c.inner.terms == (("+", "b"),) and c.outer.terms == (("+", "a"),)
    ps, b = parametric_pair(3, 3)
    (c,), _ = resolution_constraints({(1, 2): b}, [], ps.size)
    assert c.inner.terms == (("+", "a"),)


def test_type2_resolution_direction():
    ps, b = parametric_pair(10, 3, op2=F)
    (c,), (r,) = resolution_constraints({(1, 2): b}, [], ps.size)
    assert r.kind == TYPE2 and c.inner.terms == (("+", "b"),)
    # parametric F inside a fixed G region
    ps = params("f")
    f = param("f", F, (2, 3), ps, "f")
    g = Conjunct("g", G, (0, 10), predicate=Ball([0, 0], 2))
    (c,), _ = resolution_constraints({(1, 2): EdgeTaskBundle((1, 2), [g, f])}, [], ps.size)
    assert isinstance(c, VertexInclusion) and c.predicate is g.predicate


def test_fixed_conflict_rejected():
    b = EdgeTaskBundle((1, 2), [fixed("a", G, (0, 5), [0, 0], [1, 1]), fixed("b", G, (3, 8), [10, 10], [1, 1])])
    with pytest.raises(ConflictError):
        resolution_constraints({(1, 2): b}, [], 0)
    ok = EdgeTaskBundle((1, 2), [fixed("a", G, (0, 5), [0, 0], [1, 1]), fixed("b", G, (3, 8), [0.5, 0], [1, 1])])
    assert resolution_constraints({(1, 2): ok}, [], 0) == ([], [])


def test_cycle_resolution_row():
    ps = params("b0", "b1", "b2")
    edges = [(1, 2), (2, 3), (1, 3)]
    bundles = {e: EdgeTaskBundle(e, [param(f"b{k}", G, (0, 4), ps, f"b{k}")]) for k, e in enumerate(edges)}
    cons, recs = resolution_constraints(bundles, [(1, 2, 3, 1)], ps.size)
    (c,), (r,) = cons, recs
    assert r.kind == TYPE3 and r.split == 1
    assert c.inner.terms == (("+", "b0"),)
    # -(B1 + flipped B2): the (3, 1) step enters with a sign flip, then the whole sum is negated
    assert sorted(c.outer.terms) == [("+", "b2"), ("-", "b1")]


def test_audit_after_values(rng):
    ps = params("b0", "b1", "b2")
    edges = [(1, 2), (2, 3), (1, 3)]
    bundles = {e: EdgeTaskBundle(e, [param(f"b{k}", G, (0, 4), ps, f"b{k}")]) for k, e in enumerate(edges)}
    x = ps.pack({"b0": ([1, 0], [0.2, 0.2]), "b1": ([1, 0], [0.2, 0.2]), "b2": ([2, 0], [0.2, 0.2])})
    assert audit(bundles, [(1, 2, 3, 1)], x) == []
    x = ps.pack({"b0": ([1, 0], [0.2, 0.2]), "b1": ([1, 0], [0.2, 0.2]), "b2": ([-2, 0], [0.2, 0.2])})
    assert [r.kind for r in audit(bundles, [(1, 2, 3, 1)], x)] == [TYPE3]
