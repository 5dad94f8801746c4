"""Decision variables, affine box expressions and constraint rows.

Every parametric box is a pair of affine maps of the decision vector ``x``:
``center = Mp @ x + cp`` and ``size = Mv @ x + cv``. Sums of boxes (Minkowski
sums of hyper-rectangles) and reflections stay affine, so the inclusion
constraints below are either affine rows or concave quadratic rows in ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import DimensionError
from .geometry import HyperRect, sign_patterns
from .stl import Ball, Polytope, Rect

if TYPE_CHECKING:
    from .solver import NumericProblem


@dataclass(frozen=True)
class ParamBlock:
    """Center and size variables of one parametric hyper-rectangle."""

    key: tuple
    p: tuple
    nu: tuple


class ParameterSet:
    """Ordered decision vector made of ``(p, nu)`` blocks."""

    def __init__(self, dim: int):
        self.dim = dim
        self.blocks: list[ParamBlock] = []
        self._by_key: dict = {}

    @property
    def size(self) -> int:
        return 2 * self.dim * len(self.blocks)

    def add(self, key) -> ParamBlock:
        if key in self._by_key:
            raise KeyError(f"duplicate parameter block {key}")
        start = self.size
        n = self.dim
        blk = ParamBlock(key, tuple(range(start, start + n)), tuple(range(start + n, start + 2 * n)))
        self.blocks.append(blk)
        self._by_key[key] = blk
        return blk

    def __getitem__(self, key) -> ParamBlock:
        return self._by_key[key]

    def __contains__(self, key):
        return key in self._by_key

    def __len__(self):
        return len(self.blocks)

    def rect(self, key) -> "RectExpr":
        blk = self._by_key[key] if not isinstance(key, ParamBlock) else key
        return RectExpr.variable(blk, self)

    def nu_indices(self) -> list:
        return [np.array(b.nu) for b in self.blocks]

    def pack(self, values: dict) -> np.ndarray:
        """``values`` maps block keys to ``(center, size)``."""
        x = np.empty(self.size)
        missing = [b.key for b in self.blocks if b.key not in values]
        if missing:
            raise KeyError(f"missing values for {missing}")
        for b in self.blocks:
            c, s = values[b.key]
            x[list(b.p)] = c
            x[list(b.nu)] = s
        return x

    def unpack(self, x) -> dict:
        x = np.asarray(x, dtype=float)
        return {b.key: (x[list(b.p)].copy(), x[list(b.nu)].copy()) for b in self.blocks}


@dataclass(eq=False)
class RectExpr:
    """Box whose center and size are affine in the decision vector."""

    Mp: np.ndarray
    cp: np.ndarray
    Mv: np.ndarray
    cv: np.ndarray
    terms: tuple = ()

    @property
    def dim(self) -> int:
        return self.cp.size

    @property
    def n_vars(self) -> int:
        return self.Mp.shape[1]

    @classmethod
    def variable(cls, blk: ParamBlock, params: ParameterSet) -> "RectExpr":
        n, N = params.dim, params.size
        Mp = np.zeros((n, N))
        Mv = np.zeros((n, N))
        Mp[np.arange(n), list(blk.p)] = 1.0
        Mv[np.arange(n), list(blk.nu)] = 1.0
        return cls(Mp, np.zeros(n), Mv, np.zeros(n), (("+", blk.key),))

    @classmethod
    def constant(cls, rect: HyperRect, n_vars: int, label="const") -> "RectExpr":
        n = rect.dim
        return cls(np.zeros((n, n_vars)), rect.center.copy(), np.zeros((n, n_vars)), rect.size.copy(), (("+", label),))

    def _check(self, other):
        if self.dim != other.dim or self.n_vars != other.n_vars:
            raise DimensionError("box expressions live in different spaces")

    def __add__(self, other: "RectExpr") -> "RectExpr":
        self._check(other)
        return RectExpr(self.Mp + other.Mp, self.cp + other.cp, self.Mv + other.Mv, self.cv + other.cv, self.terms + other.terms)

    def __neg__(self) -> "RectExpr":
        flip = tuple(("-" if s == "+" else "+", k) for s, k in self.terms)
        return RectExpr(-self.Mp, -self.cp, self.Mv.copy(), self.cv.copy(), flip)

    def pad(self, n_vars: int) -> "RectExpr":
        extra = n_vars - self.n_vars
        z = np.zeros((self.dim, extra))
        return RectExpr(np.hstack([self.Mp, z]), self.cp, np.hstack([self.Mv, z]), self.cv, self.terms)

    def center(self, x) -> np.ndarray:
        return self.Mp @ x + self.cp

    def size(self, x) -> np.ndarray:
        return self.Mv @ x + self.cv

    def evaluate(self, x) -> HyperRect:
        return HyperRect(self.center(x), self.size(x))

    def vertex_maps(self):
        """Affine maps ``v_s = V[s] @ x + w[s]`` for every vertex sign pattern ``s``."""
        S = sign_patterns(self.dim)
        V = self.Mp[None, :, :] + 0.5 * S[:, :, None] * self.Mv[None, :, :]
        w = self.cp[None, :] + 0.5 * S * self.cv[None, :]
        return V, w

    def columns(self) -> np.ndarray:
        """Indices of the decision variables this box depends on."""
        return np.flatnonzero(np.any(self.Mp != 0, axis=0) | np.any(self.Mv != 0, axis=0))

    def describe(self) -> str:
        return " ".join(f"{s}{k}" for s, k in self.terms)


# ---------------------------------------------------------------- constraints


@dataclass
class RowBlock:
    """Numeric rows: affine ``G x + h >= 0`` and quadratic ``r2 - ||B x + d||^2 >= 0``."""

    G: np.ndarray
    h: np.ndarray
    B: np.ndarray
    d: np.ndarray
    r2: np.ndarray

    @classmethod
    def empty(cls, n_vars: int, n_dim: int = 1) -> "RowBlock":
        return cls(np.zeros((0, n_vars)), np.zeros(0), np.zeros((0, n_dim, n_vars)), np.zeros((0, n_dim)), np.zeros(0))

    @property
    def n_rows(self) -> int:
        return self.h.size + self.r2.size


def _box_rows(inner: RectExpr, outer: RectExpr):
    """Affine rows of ``inner`` inside ``outer`` (upper faces then lower faces)."""
    G_up = (outer.Mp + 0.5 * outer.Mv) - (inner.Mp + 0.5 * inner.Mv)
    h_up = (outer.cp + 0.5 * outer.cv) - (inner.cp + 0.5 * inner.cv)
    G_lo = (inner.Mp - 0.5 * inner.Mv) - (outer.Mp - 0.5 * outer.Mv)
    h_lo = (inner.cp - 0.5 * inner.cv) - (outer.cp - 0.5 * outer.cv)
    return np.vstack([G_up, G_lo]), np.concatenate([h_up, h_lo])


@dataclass(eq=False)
class VertexInclusion:
    """Box expression inside the superlevel set of a concave predicate.

    Balls give one smooth row per vertex (``r^2 - ||v - c||^2 >= 0``); boxes and
    polytopes give affine rows that are exact on the region where sizes are
    non-negative.
    """

    expr: RectExpr
    predicate: object
    label: str = ""
    group: str = "inclusion"

    def rows(self) -> RowBlock:
        e, pf, N = self.expr, self.predicate, self.expr.n_vars
        if pf.dim != e.dim:
            raise DimensionError(f"predicate dim {pf.dim} vs box dim {e.dim}")
        if isinstance(pf, Ball):
            V, w = e.vertex_maps()
            return RowBlock(np.zeros((0, N)), np.zeros(0), V, w - pf.center, np.full(len(w), pf.radius**2))
        if isinstance(pf, Rect):
            G, h = _box_rows(e, RectExpr.constant(pf.rect, N))
            return RowBlock(G, h, np.zeros((0, e.dim, N)), np.zeros((0, e.dim)), np.zeros(0))
        if isinstance(pf, Polytope):
            A, b = np.asarray(pf.normals), np.asarray(pf.offsets)
            G = -(A @ e.Mp) - 0.5 * (np.abs(A) @ e.Mv)
            h = b - A @ e.cp - 0.5 * np.abs(A) @ e.cv
            return RowBlock(G, h, np.zeros((0, e.dim, N)), np.zeros((0, e.dim)), np.zeros(0))
        raise TypeError(f"unsupported predicate {type(pf).__name__}")

    def columns(self) -> np.ndarray:
        return self.expr.columns()

    def margin(self, x) -> float:
        """Smallest predicate value over the box vertices."""
        c, s = self.expr.center(x), self.expr.size(x)
        verts = c + sign_patterns(c.size) * (s / 2)
        return float(np.min(self.predicate.value(verts)))


@dataclass(eq=False)
class BoxInBox:
    inner: RectExpr
    outer: RectExpr
    label: str = ""
    group: str = "conflict"

    def rows(self) -> RowBlock:
        G, h = _box_rows(self.inner, self.outer)
        N, n = self.inner.n_vars, self.inner.dim
        return RowBlock(G, h, np.zeros((0, n, N)), np.zeros((0, n)), np.zeros(0))

    def columns(self) -> np.ndarray:
        return np.union1d(self.inner.columns(), self.outer.columns())

    def margin(self, x) -> float:
        ci, si = self.inner.center(x), self.inner.size(x)
        co, so = self.outer.center(x), self.outer.size(x)
        return float(np.min(so / 2 - si / 2 - np.abs(ci - co)))


@dataclass(eq=False)
class LowerBound:
    index: int
    bound: float
    n_vars: int
    label: str = ""
    group: str = "bounds"

    def rows(self) -> RowBlock:
        G = np.zeros((1, self.n_vars))
        G[0, self.index] = 1.0
        return RowBlock(G, np.array([-self.bound]), np.zeros((0, 1, self.n_vars)), np.zeros((0, 1)), np.zeros(0))

    def columns(self) -> np.ndarray:
        return np.array([self.index])

    def margin(self, x) -> float:
        return float(x[self.index] - self.bound)


@dataclass(eq=False)
class ConvexProblem:
    """Volume-maximization program over parametric boxes.

    Objective: ``sum over blocks of 1 / prod(nu)``; feasible set: all
    constraint margins non-negative.
    """

    params: ParameterSet
    constraints: list = field(default_factory=list)
    x0: np.ndarray | None = None
    nu_min: float = 1e-3
    tbar: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.params.size

    def count(self, kind=None, group=None) -> int:
        return sum(
            1 for c in self.constraints if (kind is None or isinstance(c, kind)) and (group is None or c.group == group)
        )

    def compile(self) -> "NumericProblem":
        from .solver import NumericProblem

        N = self.n_vars
        n = max(self.params.dim, 1)
        G, h, B, d, r2, owner_a, owner_b = [], [], [], [], [], [], []
        for ci, c in enumerate(self.constraints):
            rb = c.rows()
            if rb.h.size:
                G.append(rb.G)
                h.append(rb.h)
                owner_a += [ci] * rb.h.size
            if rb.r2.size:
                B.append(rb.B)
                d.append(rb.d)
                r2.append(rb.r2)
                owner_b += [ci] * rb.r2.size
        G = np.vstack(G) if G else np.zeros((0, N))
        h = np.concatenate(h) if h else np.zeros(0)
        B = np.concatenate(B) if B else np.zeros((0, n, N))
        d = np.concatenate(d) if d else np.zeros((0, n))
        r2 = np.concatenate(r2) if r2 else np.zeros(0)
        x0 = self.x0 if self.x0 is not None else np.zeros(N)
        return NumericProblem(
            N, self.params.nu_indices(), G, h, B, d, r2, np.asarray(x0, dtype=float),
            np.array(owner_a, dtype=int), np.array(owner_b, dtype=int),
        )
