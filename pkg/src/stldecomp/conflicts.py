"""Detection and resolution of conflicting conjunctions.

Conjuncts are grouped per edge ``(i, j)`` (``i < j``) of the rewritten task
graph, with every region expressed over ``e_ij = x_j - x_i``. A region is
either *fixed* (a predicate inherited from the original specification) or
*parametric* (an affine box expression in the decision vector, optionally
with solved values attached for auditing).

Four patterns are recognised: two ``G`` conjuncts on one edge with
overlapping windows (type 1), a ``G`` and an ``F`` conjunct with the ``F``
window nested in the ``G`` window (type 2), and cycles on which the closure
``sum e = 0`` cannot hold while every conjunct is active (types 3 and 4).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linprog, minimize

from .errors import ConflictError
from .geometry import HyperRect, chebyshev_center, inscribe_rect, minkowski_sum, negate
from .graphs import edge_sequence
from .problem import BoxInBox, RectExpr, VertexInclusion
from .stl import Ball, Operator, Polytope, Rect

TYPE1, TYPE2, TYPE3, TYPE4 = "Type1", "Type2", "Type3", "Type4"

DEFAULT_COMBINATION_CAP = 10_000


@dataclass(eq=False)
class Conjunct:
    """One conjunct on a bundle edge.

    Exactly one of ``predicate`` (fixed) or ``expr`` (parametric) is set.
    ``rect`` carries solved values of a parametric region.
    """

    uid: str
    operator: Operator
    interval: tuple
    predicate: object = None
    expr: RectExpr | None = None
    rect: HyperRect | None = None

    def __post_init__(self):
        if (self.predicate is None) == (self.expr is None):
            raise ValueError(f"conjunct {self.uid} must be either fixed or parametric")

    @property
    def parametric(self) -> bool:
        return self.expr is not None

    @property
    def always(self) -> bool:
        return self.operator is Operator.ALWAYS

    @property
    def duration(self) -> float:
        return self.interval[1] - self.interval[0]

    def flipped(self) -> "Conjunct":
        """The same conjunct seen over ``e_ji = -e_ij``."""
        return replace(
            self,
            predicate=None if self.predicate is None else self.predicate.reflect(),
            expr=None if self.expr is None else -self.expr,
            rect=None if self.rect is None else negate(self.rect),
        )

    def region(self):
        """Concrete superlevel set as a predicate, or ``None`` if unsolved."""
        if self.predicate is not None:
            return self.predicate
        return None if self.rect is None else Rect(self.rect)

    def box(self) -> HyperRect | None:
        """Hyper-rectangle for cycle arithmetic (fixed regions are inscribed)."""
        if self.predicate is not None:
            return inscribe_rect(self.predicate)
        return self.rect

    def box_expr(self, n_vars: int) -> RectExpr:
        if self.expr is not None:
            return self.expr
        return RectExpr.constant(inscribe_rect(self.predicate), n_vars, self.uid)


@dataclass(eq=False)
class EdgeTaskBundle:
    edge: tuple
    conjuncts: list = field(default_factory=list)

    def __post_init__(self):
        i, j = self.edge
        if not i < j:
            raise ValueError(f"bundle edge {self.edge} must be written with i < j")
        uids = [c.uid for c in self.conjuncts]
        if len(set(uids)) != len(uids):
            raise ValueError(f"duplicate conjunct ids on edge {self.edge}")

    @property
    def always_indices(self) -> list:
        return [k for k, c in enumerate(self.conjuncts) if c.always]

    @property
    def eventually_indices(self) -> list:
        return [k for k, c in enumerate(self.conjuncts) if not c.always]

    def oriented(self, r, s) -> list:
        """Conjuncts seen over ``x_s - x_r``."""
        if (r, s) == self.edge:
            return list(self.conjuncts)
        if (s, r) == self.edge:
            return [c.flipped() for c in self.conjuncts]
        raise ValueError(f"({r},{s}) is not the bundle edge {self.edge}")

    def with_values(self, x) -> "EdgeTaskBundle":
        """Copy with every parametric region evaluated at ``x``."""
        out = []
        for c in self.conjuncts:
            if c.parametric:
                c = replace(c, rect=c.expr.evaluate(x))
            out.append(c)
        return EdgeTaskBundle(self.edge, out)


@dataclass(frozen=True)
class ConflictRecord:
    kind: str
    location: tuple
    conjuncts: tuple
    intervals: tuple
    split: int | None = None
    f_count: int | None = None
    detail: str = ""

    def __str__(self):
        where = "cycle " + "-".join(map(str, self.location)) if len(self.location) > 2 else f"edge {self.location}"
        return f"{self.kind} on {where}: {', '.join(self.conjuncts)} {self.detail}".rstrip()


# ----------------------------------------------------------- set emptiness


def _halfspaces(pf):
    if isinstance(pf, Polytope):
        return np.asarray(pf.normals), np.asarray(pf.offsets)
    if isinstance(pf, Rect):
        return pf.rect.halfspaces()
    raise TypeError(type(pf).__name__)


def _ball_polytope_gap(ball: Ball, A, b) -> float:
    """Distance from the ball center to ``{A z <= b}`` minus the radius."""
    if np.all(A @ ball.center <= b):
        return -ball.radius
    res = linprog(np.zeros(A.shape[1]), A_ub=A, b_ub=b, bounds=[(None, None)] * A.shape[1], method="highs")
    if res.status != 0:
        return math.inf
    start, _ = chebyshev_center(A, b) if _has_interior(A, b) else (res.x, 0.0)
    out = minimize(
        lambda z: float(np.sum((z - ball.center) ** 2)),
        start,
        jac=lambda z: 2 * (z - ball.center),
        constraints=[{"type": "ineq", "fun": lambda z: b - A @ z, "jac": lambda z: -A}],
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 500},
    )
    return float(np.sqrt(max(out.fun, 0.0))) - ball.radius


def _has_interior(A, b) -> bool:
    try:
        _, r = chebyshev_center(A, b)
    except ValueError:
        return False
    return r > 0


def regions_disjoint(u, v) -> bool:
    """Whether two closed superlevel sets (Ball, Rect, Polytope) have no common point."""
    if isinstance(u, HyperRect):
        u = Rect(u)
    if isinstance(v, HyperRect):
        v = Rect(v)
    if isinstance(v, Ball) and not isinstance(u, Ball):
        u, v = v, u
    if isinstance(u, Rect) and isinstance(v, Rect):
        gap = np.abs(u.center - v.center) - (u.size + v.size) / 2
        return bool(np.any(gap > 0))
    if isinstance(u, Ball) and isinstance(v, Ball):
        return bool(np.linalg.norm(u.center - v.center) > u.radius + v.radius)
    if isinstance(u, Ball) and isinstance(v, Rect):
        nearest = np.clip(u.center, v.rect.lower, v.rect.upper)
        return bool(np.linalg.norm(u.center - nearest) > u.radius)
    if isinstance(u, Ball):
        A, b = _halfspaces(v)
        return _ball_polytope_gap(u, A, b) > 1e-9
    A1, b1 = _halfspaces(u)
    A2, b2 = _halfspaces(v)
    A, b = np.vstack([A1, A2]), np.concatenate([b1, b2])
    res = linprog(np.zeros(A.shape[1]), A_ub=A, b_ub=b, bounds=[(None, None)] * A.shape[1], method="highs")
    return res.status == 2


# ---------------------------------------------------------------- premises


def _overlap(i1, i2) -> bool:
    return max(i1[0], i2[0]) <= min(i1[1], i2[1])


def _inside(inner, outer) -> bool:
    return outer[0] <= inner[0] and inner[1] <= outer[1]


def _common(intervals):
    """Intersection of closed intervals; the empty family gives the whole line."""
    lo = max((iv[0] for iv in intervals), default=-math.inf)
    hi = min((iv[1] for iv in intervals), default=math.inf)
    return (lo, hi) if lo <= hi else None


def pair_premise(c1: Conjunct, c2: Conjunct):
    """Return ``(kind, g, f)`` if the timing premise of type 1 or 2 holds, else ``None``.

    For type 2, ``g`` is the always conjunct and ``f`` the eventually one.
    """
    if c1.always and c2.always:
        return (TYPE1, c1, c2) if _overlap(c1.interval, c2.interval) else None
    if c1.always != c2.always:
        g, f = (c1, c2) if c1.always else (c2, c1)
        return (TYPE2, g, f) if _inside(f.interval, g.interval) else None
    return None


def cycle_premise(conjs) -> tuple | None:
    """Timing premise for a cycle tuple: ``(kind, q)`` or ``None``.

    Type 3: every conjunct is ``G`` and the windows share a time. Type 4:
    ``q >= 1`` conjuncts are ``F`` and either a single ``F`` window lies in the
    common ``G`` window, or every ``F`` window is the same instant inside it.
    """
    g = [c.interval for c in conjs if c.always]
    f = [c.interval for c in conjs if not c.always]
    common = _common(g)
    if common is None:
        return None
    if not f:
        return (TYPE3, 0)
    q = len(f)
    if q == 1 and _inside(f[0], common):
        return (TYPE4, q)
    if all(iv[0] == iv[1] == f[0][0] for iv in f) and common[0] <= f[0][0] <= common[1]:
        return (TYPE4, q)
    return None


# --------------------------------------------------------------- detection


def detect_edge_conflicts(bundle: EdgeTaskBundle) -> list:
    """Type 1 and type 2 conflicts among concrete regions of one edge.

    Parametric conjuncts without solved values are skipped.
    """
    out = []
    cs = bundle.conjuncts
    for k, l in itertools.combinations(range(len(cs)), 2):
        prem = pair_premise(cs[k], cs[l])
        if prem is None:
            continue
        u, v = cs[k].region(), cs[l].region()
        if u is None or v is None:
            continue
        if regions_disjoint(u, v):
            out.append(
                ConflictRecord(prem[0], bundle.edge, (cs[k].uid, cs[l].uid), (cs[k].interval, cs[l].interval))
            )
    return out


def _cycle_conjuncts(cycle, bundles, combination) -> list:
    edges = edge_sequence(cycle)
    if len(combination) != len(edges):
        raise ValueError(f"combination has {len(combination)} entries for {len(edges)} cycle edges")
    out = []
    for (r, s), k in zip(edges, combination):
        bundle = bundles[(min(r, s), max(r, s))]
        out.append(bundle.oriented(r, s)[k])
    return out


def closure_possible(boxes) -> bool:
    """Whether ``sum e_k = 0`` admits ``e_k`` in each box: ``0`` lies in their Minkowski sum.

    Equivalent to ``sum_{k<=p} B_k`` meeting ``-sum_{k>p} B_k`` for any split ``p``.
    """
    total = minkowski_sum(boxes)
    return bool(np.all(np.abs(total.center) <= total.size / 2))


def detect_cycle_conflicts(cycle, bundles, combination) -> list:
    """Type 3 or 4 conflict for one combination tuple on ``cycle``.

    Fixed regions enter through their inscribed boxes; parametric conjuncts
    must carry solved values, otherwise nothing is reported.
    """
    conjs = _cycle_conjuncts(cycle, bundles, combination)
    prem = cycle_premise(conjs)
    if prem is None:
        return []
    boxes = [c.box() for c in conjs]
    if any(b is None for b in boxes):
        return []
    if closure_possible(boxes):
        return []
    kind, q = prem
    return [
        ConflictRecord(
            kind, tuple(cycle), tuple(c.uid for c in conjs), tuple(c.interval for c in conjs),
            split=1, f_count=q or None,
        )
    ]


def combination_tuples(cycle, bundles, cap: int = DEFAULT_COMBINATION_CAP):
    """Lazy Cartesian product of conjunct indices along the cycle edges."""
    sizes = []
    for r, s in edge_sequence(cycle):
        key = (min(r, s), max(r, s))
        if key not in bundles or not bundles[key].conjuncts:
            raise ValueError(f"cycle {cycle} edge {key} carries no conjunct")
        sizes.append(len(bundles[key].conjuncts))
    total = math.prod(sizes)
    if total > cap:
        raise ValueError(f"cycle {cycle} has {total} combination tuples (cap {cap})")
    return itertools.product(*(range(n) for n in sizes))


def triggering_tuples(cycle, bundles, cap: int = DEFAULT_COMBINATION_CAP) -> list:
    """Combination tuples meeting the type 3/4 timing premises."""
    return [
        comb for comb in combination_tuples(cycle, bundles, cap)
        if cycle_premise(_cycle_conjuncts(cycle, bundles, comb)) is not None
    ]


def audit(bundles, cycles, x=None, cap: int = DEFAULT_COMBINATION_CAP, inherited_cycles: bool = False) -> list:
    """Run every detector on solved regions (``x`` is the decision vector).

    Cycle tuples made only of inherited conjuncts are skipped unless
    ``inherited_cycles`` is set: the input specification is taken as
    conflict-free, and inscribed boxes would only under-approximate it.
    """
    if x is not None:
        bundles = {k: b.with_values(x) for k, b in bundles.items()}
    out = []
    for key in sorted(bundles):
        out += detect_edge_conflicts(bundles[key])
    for cyc in cycles:
        for comb in combination_tuples(cyc, bundles, cap):
            if not inherited_cycles and not any(c.parametric for c in _cycle_conjuncts(cyc, bundles, comb)):
                continue
            out += detect_cycle_conflicts(cyc, bundles, comb)
    return out


# -------------------------------------------------------------- resolution


def _contain(inner: Conjunct, outer: Conjunct, label, group):
    if outer.parametric:
        return BoxInBox(inner.expr, outer.expr, label, group)
    return VertexInclusion(inner.expr, outer.predicate, label, group)


def _pair_constraint(edge, c1: Conjunct, c2: Conjunct):
    prem = pair_premise(c1, c2)
    if prem is None:
        return None, None
    kind, g, f = prem
    rec = ConflictRecord(kind, edge, (c1.uid, c2.uid), (c1.interval, c2.interval))
    if not c1.parametric and not c2.parametric:
        if regions_disjoint(c1.predicate, c2.predicate):
            raise ConflictError(f"inherited conjuncts {c1.uid} and {c2.uid} on edge {edge} cannot both hold")
        return None, None
    if kind == TYPE1:
        if c1.parametric and c2.parametric:
            # shorter window inside longer; ties put the smaller id inside
            first = (c1.duration, c1.uid) < (c2.duration, c2.uid)
            inner, outer = (c1, c2) if first else (c2, c1)
        else:
            inner, outer = (c1, c2) if c1.parametric else (c2, c1)
    else:
        if f.parametric:
            inner, outer = f, g
        else:
            inner, outer = g, f
    label = f"{kind} {edge}: {inner.uid} in {outer.uid}"
    return _contain(inner, outer, label, kind.lower()), rec


def resolution_constraints(bundles, cycles, n_vars, cap: int = DEFAULT_COMBINATION_CAP):
    """Constraints ruling out conflicts of types 1 to 4 on the rewritten graph.

    Returns ``(constraints, records)``. ``records`` lists every pair or tuple
    whose timing premise triggered a constraint. For cycles, the first
    parametric conjunct in traversal order goes on the left of the split:
    ``B_left`` must lie in ``-(sum of the other boxes)``.
    """
    constraints, records = [], []
    for key in sorted(bundles):
        cs = bundles[key].conjuncts
        for k, l in itertools.combinations(range(len(cs)), 2):
            con, rec = _pair_constraint(key, cs[k], cs[l])
            if con is not None:
                constraints.append(con)
                records.append(rec)
    for cyc in cycles:
        for comb in combination_tuples(cyc, bundles, cap):
            conjs = _cycle_conjuncts(cyc, bundles, comb)
            prem = cycle_premise(conjs)
            if prem is None:
                continue
            param = [k for k, c in enumerate(conjs) if c.parametric]
            if not param:
                # inherited-only cycles are assumed conflict-free
                continue
            left = param[0]
            rest = [c.box_expr(n_vars) for k, c in enumerate(conjs) if k != left]
            outer = -sum(rest[1:], rest[0])
            kind, q = prem
            rec = ConflictRecord(
                kind, tuple(cyc), tuple(c.uid for c in conjs), tuple(c.interval for c in conjs),
                split=left + 1, f_count=q or None,
            )
            label = f"{kind} cycle {'-'.join(map(str, cyc))}: {conjs[left].uid} in -({', '.join(c.uid for k, c in enumerate(conjs) if k != left)})"
            constraints.append(BoxInBox(conjs[left].expr, outer, label, kind.lower()))
            records.append(rec)
    return constraints, records
