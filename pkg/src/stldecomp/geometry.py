"""Axis-aligned hyper-rectangle algebra.

A hyper-rectangle is stored by its center ``p`` and its *full* side lengths
``nu``, so that the box is ``prod_k [p_k - nu_k/2, p_k + nu_k/2]``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionError, UnboundedSetError, VertexBudgetError

#: Largest dimension for which vertices are enumerated (2**16 points).
MAX_VERTEX_DIM = 16


@dataclass(frozen=True, eq=False)
class HyperRect:
    center: np.ndarray
    size: np.ndarray

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        s = np.array(self.size, dtype=float).reshape(-1)
        if c.shape != s.shape:
            raise DimensionError(f"center has dim {c.size} but size has dim {s.size}")
        if c.size == 0:
            raise DimensionError("hyper-rectangle needs at least one dimension")
        if not np.all(s > 0):
            raise ValueError(f"hyper-rectangle sizes must be positive, got {s.tolist()}")
        c.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "size", s)

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.size / 2

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.size / 2

    @property
    def volume(self) -> float:
        return float(np.prod(self.size))

    def contains(self, z, tol=0.0) -> np.ndarray:
        """Membership test; ``z`` may be a single point or an ``(m, n)`` stack."""
        z = np.asarray(z, dtype=float)
        inside = (z >= self.lower - tol) & (z <= self.upper + tol)
        return np.all(inside, axis=-1)

    def halfspaces(self):
        """Return ``(A, b)`` with the box equal to ``{z | A z <= b}``."""
        n = self.dim
        A = np.vstack([np.eye(n), -np.eye(n)])
        b = np.concatenate([self.upper, -self.lower])
        return A, b

    def __eq__(self, other):
        if not isinstance(other, HyperRect):
            return NotImplemented
        return np.array_equal(self.center, other.center) and np.array_equal(self.size, other.size)

    def __hash__(self):
        return hash((self.center.tobytes(), self.size.tobytes()))

    def __repr__(self):
        return f"HyperRect(center={self.center.tolist()}, size={self.size.tolist()})"


@lru_cache(maxsize=None)
def _sign_patterns(n: int) -> np.ndarray:
    out = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    out.flags.writeable = False
    return out


def sign_patterns(n: int, max_dim: int = MAX_VERTEX_DIM) -> np.ndarray:
    """All ``2**n`` sign vectors in binary-counting order (first coordinate slowest)."""
    if n > max_dim:
        raise VertexBudgetError(f"dimension {n} exceeds the vertex budget (n <= {max_dim})")
    return _sign_patterns(n)


def vertices(r: HyperRect, max_dim: int = MAX_VERTEX_DIM) -> np.ndarray:
    """Vertices of ``r`` as a ``(2**n, n)`` array."""
    return r.center + sign_patterns(r.dim, max_dim) * (r.size / 2)


def minkowski_sum(rects) -> HyperRect:
    rects = list(rects)
    if not rects:
        raise ValueError("minkowski_sum needs at least one hyper-rectangle")
    n = rects[0].dim
    for r in rects[1:]:
        if r.dim != n:
            raise DimensionError(f"cannot add boxes of dimension {n} and {r.dim}")
    center = np.sum([r.center for r in rects], axis=0)
    size = np.sum([r.size for r in rects], axis=0)
    return HyperRect(center, size)


def negate(r: HyperRect) -> HyperRect:
    return HyperRect(-r.center, r.size)


def superlevel_margin(r: HyperRect, pf, max_dim: int = MAX_VERTEX_DIM) -> float:
    """Smallest predicate value over the vertices of ``r``.

    For a concave predicate a non-negative margin certifies that the whole box
    lies in the superlevel set ``{z | h(z) >= 0}``.
    """
    if pf.dim != r.dim:
        raise DimensionError(f"box has dim {r.dim} but predicate has dim {pf.dim}")
    return float(np.min(pf.value(vertices(r, max_dim))))


def box_in_box_rows(inner: HyperRect, outer: HyperRect) -> np.ndarray:
    """The ``2n`` affine margins whose joint non-negativity means ``inner`` is in ``outer``.

    Rows ``0..n-1`` compare upper faces, rows ``n..2n-1`` lower faces.
    """
    if inner.dim != outer.dim:
        raise DimensionError(f"inner has dim {inner.dim} but outer has dim {outer.dim}")
    return np.concatenate([outer.upper - inner.upper, inner.lower - outer.lower])


def box_in_box_margin(inner: HyperRect, outer: HyperRect) -> float:
    return float(np.min(box_in_box_rows(inner, outer)))


def _polytope_bounds(normals, offsets):
    """Per-coordinate extent of ``{z | normals z <= offsets}`` via LPs."""
    n = normals.shape[1]
    lo, hi = np.empty(n), np.empty(n)
    for k in range(n):
        for sign, out in ((1.0, lo), (-1.0, hi)):
            c = np.zeros(n)
            c[k] = sign
            res = linprog(c, A_ub=normals, b_ub=offsets, bounds=[(None, None)] * n, method="highs")
            if res.status == 3:
                raise UnboundedSetError("polytope superlevel set is unbounded")
            if res.status == 2:
                raise ValueError("polytope superlevel set is empty")
            if res.status != 0:
                raise RuntimeError(f"linprog failed: {res.message}")
            out[k] = sign * res.fun
    return lo, hi


def chebyshev_center(normals, offsets):
    """Center and radius of the largest Euclidean ball inside ``{z | normals z <= offsets}``."""
    m, n = normals.shape
    norms = np.linalg.norm(normals, axis=1)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A = np.hstack([normals, norms[:, None]])
    res = linprog(c, A_ub=A, b_ub=offsets, bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status == 3:
        raise UnboundedSetError("polytope has an unbounded inscribed ball")
    if res.status != 0:
        raise ValueError(f"polytope has no interior point: {res.message}")
    return res.x[:n], res.x[-1]


def inscribe_polytope(normals, offsets) -> HyperRect:
    """Axis-aligned box inside a bounded polytope.

    Starts from the largest cube at the Chebyshev center, then grows each
    half-width in coordinate order while every row keeps non-negative slack.
    """
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    offsets = np.asarray(offsets, dtype=float).reshape(-1)
    _polytope_bounds(normals, offsets)
    center, _ = chebyshev_center(normals, offsets)
    absn = np.abs(normals)
    slack0 = offsets - normals @ center
    half = np.full(center.size, np.min(slack0 / absn.sum(axis=1)))
    for k in range(center.size):
        slack = slack0 - absn @ half
        col = absn[:, k]
        mask = col > 0
        if np.any(mask):
            half[k] += max(0.0, np.min(slack[mask] / col[mask]))
    if not np.all(half > 0):
        raise ValueError("polytope has empty interior")
    return HyperRect(center, 2 * half)


def inscribe_rect(pf) -> HyperRect:
    """Hyper-rectangle contained in the superlevel set of ``pf``."""
    kind = type(pf).__name__
    if kind == "Rect":
        return pf.rect
    if kind == "Ball":
        n = pf.dim
        return HyperRect(pf.center, np.full(n, 2 * pf.radius / np.sqrt(n)))
    if kind == "Polytope":
        return inscribe_polytope(pf.normals, pf.offsets)
    raise TypeError(f"cannot inscribe a box in {kind}")
