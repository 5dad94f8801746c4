"""STL fragment: concave predicates, F/G tasks and sampled robustness.

Only the conjunctive fragment ``F_[a,b] mu | G_[a,b] mu | phi1 & phi2`` is
represented, with predicates over one agent's state ``x_i`` or over a relative
state ``e_ij = x_j - x_i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionError, HorizonError
from .geometry import HyperRect, _polytope_bounds

# relative slack used when snapping interval endpoints onto sample times
_TIME_EPS = 1e-9


class Operator(str, Enum):
    ALWAYS = "always"
    EVENTUALLY = "eventually"

    @property
    def symbol(self) -> str:
        return "G" if self is Operator.ALWAYS else "F"


def _frozen(x) -> np.ndarray:
    a = np.array(x, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Ball:
    """``h(z) = radius - ||z - center||``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(np.reshape(self.center, -1)))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def bounded(self) -> bool:
        return True

    def value(self, z):
        z = np.asarray(z, dtype=float)
        return self.radius - np.linalg.norm(z - self.center, axis=-1)

    def reflect(self) -> "Ball":
        return Ball(-self.center, self.radius)

    def __eq__(self, other):
        return isinstance(other, Ball) and self.radius == other.radius and np.array_equal(self.center, other.center)

    def __hash__(self):
        return hash(("ball", self.center.tobytes(), self.radius))


@dataclass(frozen=True, eq=False)
class Rect:
    """``h(z) = min_k (nu_k/2 - |z_k - p_k|)``; zero on the box boundary."""

    rect: HyperRect

    @classmethod
    def from_arrays(cls, center, size) -> "Rect":
        return cls(HyperRect(center, size))

    @property
    def dim(self) -> int:
        return self.rect.dim

    @property
    def bounded(self) -> bool:
        return True

    @property
    def center(self) -> np.ndarray:
        return self.rect.center

    @property
    def size(self) -> np.ndarray:
        return self.rect.size

    def value(self, z):
        z = np.asarray(z, dtype=float)
        return np.min(self.rect.size / 2 - np.abs(z - self.rect.center), axis=-1)

    def reflect(self) -> "Rect":
        return Rect(HyperRect(-self.rect.center, self.rect.size))

    def __eq__(self, other):
        return isinstance(other, Rect) and self.rect == other.rect

    def __hash__(self):
        return hash(("rect", self.rect))


@dataclass(frozen=True, eq=False)
class Polytope:
    """``h(z) = min_i (offset_i - normal_i . z)``; the set ``{normals z <= offsets}``."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        normals = np.atleast_2d(np.asarray(self.normals, dtype=float))
        offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        if normals.shape[0] < 1:
            raise ValueError("polytope needs at least one row")
        if normals.shape[0] != offsets.size:
            raise DimensionError(f"{normals.shape[0]} normals but {offsets.size} offsets")
        if np.any(np.linalg.norm(normals, axis=1) == 0):
            raise ValueError("polytope rows need non-zero normals")
        object.__setattr__(self, "normals", _frozen(normals))
        object.__setattr__(self, "offsets", _frozen(offsets))

    @classmethod
    def from_rows(cls, rows) -> "Polytope":
        rows = list(rows)
        return cls([r[0] for r in rows], [r[1] for r in rows])

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def bounded(self) -> bool:
        try:
            _polytope_bounds(np.asarray(self.normals), np.asarray(self.offsets))
        except ValueError:
            return False
        return True

    def value(self, z):
        z = np.asarray(z, dtype=float)
        return np.min(self.offsets - z @ self.normals.T, axis=-1)

    def reflect(self) -> "Polytope":
        return Polytope(-self.normals, self.offsets)

    def __eq__(self, other):
        return (
            isinstance(other, Polytope)
            and np.array_equal(self.normals, other.normals)
            and np.array_equal(self.offsets, other.offsets)
        )

    def __hash__(self):
        return hash(("poly", self.normals.tobytes(), self.offsets.tobytes()))


PREDICATE_TYPES = (Ball, Rect, Polytope)


def eval_predicate(pf, z) -> float:
    """Evaluate ``h(z)``; ``h(z) >= 0`` iff ``z`` is in the superlevel set."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != pf.dim:
        raise DimensionError(f"predicate has dim {pf.dim} but point has dim {z.shape[-1]}")
    out = pf.value(z)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class AtomicTask:
    """One temporal operator applied to one predicate.

    ``agents`` is ``(i,)`` for an independent task on ``x_i`` or ``(i, j)`` for
    a collaborative task on ``e_ij = x_j - x_i``.
    """

    operator: Operator
    interval: tuple
    agents: tuple
    predicate: object
    tbar: float | None = None
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        op = Operator(self.operator)
        a, b = (float(v) for v in self.interval)
        agents = tuple(int(v) for v in self.agents)
        if not 0 <= a <= b:
            raise ValueError(f"interval must satisfy 0 <= a <= b, got [{a}, {b}]")
        if len(agents) not in (1, 2):
            raise ValueError("a task concerns one agent or one pair of agents")
        if len(agents) == 2 and agents[0] == agents[1]:
            raise ValueError("collaborative task needs two distinct agents")
        if not isinstance(self.predicate, PREDICATE_TYPES):
            raise TypeError(f"unsupported predicate {type(self.predicate).__name__}")
        if self.tbar is not None and not a <= self.tbar <= b:
            raise ValueError(f"tbar={self.tbar} outside [{a}, {b}]")
        object.__setattr__(self, "operator", op)
        object.__setattr__(self, "interval", (a, b))
        object.__setattr__(self, "agents", agents)

    @property
    def is_pair(self) -> bool:
        return len(self.agents) == 2

    @property
    def a(self) -> float:
        return self.interval[0]

    @property
    def b(self) -> float:
        return self.interval[1]

    def reversed(self) -> "AtomicTask":
        """Same task written on ``(j, i)``: the predicate is reflected through the origin."""
        if not self.is_pair:
            return self
        i, j = self.agents
        return AtomicTask(self.operator, self.interval, (j, i), self.predicate.reflect(), self.tbar, self.name)

    def oriented(self, agents) -> "AtomicTask":
        agents = tuple(agents)
        if agents == self.agents:
            return self
        if agents == self.agents[::-1]:
            return self.reversed()
        raise ValueError(f"task on {self.agents} cannot be written on {agents}")

    def __str__(self):
        subj = "x_%d" % self.agents[0] if not self.is_pair else "e_%d%d" % self.agents
        return f"{self.operator.symbol}[{self.a:g},{self.b:g}] {type(self.predicate).__name__}({subj})"


@dataclass(frozen=True)
class TaskFormula:
    """Conjunction of atomic tasks sharing one subject."""

    conjuncts: tuple

    def __post_init__(self):
        conj = tuple(self.conjuncts)
        if not conj:
            raise ValueError("a task formula needs at least one conjunct")
        subj = conj[0].agents
        for c in conj[1:]:
            if c.agents != subj:
                raise ValueError(f"mixed subjects {subj} and {c.agents} in one formula")
        object.__setattr__(self, "conjuncts", conj)

    @property
    def agents(self) -> tuple:
        return self.conjuncts[0].agents

    def __iter__(self):
        return iter(self.conjuncts)

    def __len__(self):
        return len(self.conjuncts)


def canonical_edge(i, j) -> tuple:
    return (i, j) if i < j else (j, i)


@dataclass
class GlobalSpec:
    """Conjunction of independent formulas (per agent) and collaborative ones (per edge).

    Collaborative keys are canonical ``(i, j)`` with ``i < j``; the formula keeps
    the orientation it was first written in.
    """

    independent: dict = field(default_factory=dict)
    collaborative: dict = field(default_factory=dict)

    @classmethod
    def from_tasks(cls, tasks) -> "GlobalSpec":
        indep, collab = {}, {}
        for t in tasks:
            if t.is_pair:
                key = canonical_edge(*t.agents)
                if key in collab:
                    first = collab[key][0].agents
                    collab[key].append(t.oriented(first))
                else:
                    collab[key] = [t]
            else:
                indep.setdefault(t.agents[0], []).append(t)
        return cls(
            {k: TaskFormula(tuple(v)) for k, v in sorted(indep.items())},
            {k: TaskFormula(tuple(v)) for k, v in sorted(collab.items())},
        )

    def tasks(self):
        for f in self.independent.values():
            yield from f
        for f in self.collaborative.values():
            yield from f

    @property
    def agents(self) -> set:
        out = set(self.independent)
        for i, j in self.collaborative:
            out.update((i, j))
        return out

    @property
    def horizon(self) -> float:
        return max((t.b for t in self.tasks()), default=0.0)

    def __len__(self):
        return sum(1 for _ in self.tasks())


@dataclass(eq=False)
class Trajectory:
    """Sampled multi-agent trajectory on a shared, strictly increasing time grid."""

    times: np.ndarray
    states: dict

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        if self.times.size == 0:
            raise ValueError("trajectory needs at least one sample")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        states = {}
        for k, v in self.states.items():
            arr = np.asarray(v, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            if arr.shape[0] != self.times.size:
                raise ValueError(f"agent {k} has {arr.shape[0]} samples, expected {self.times.size}")
            states[int(k)] = arr
        dims = {a.shape[1] for a in states.values()}
        if len(dims) > 1:
            raise DimensionError(f"agents have different state dimensions {sorted(dims)}")
        self.states = dict(sorted(states.items()))

    @property
    def dim(self) -> int:
        return next(iter(self.states.values())).shape[1]

    @property
    def agents(self) -> list:
        return list(self.states)

    def state(self, i) -> np.ndarray:
        try:
            return self.states[i]
        except KeyError:
            raise KeyError(f"unknown agent {i}") from None


def relative_signal(traj: Trajectory, i, j) -> np.ndarray:
    """``e_ij(t_k) = x_j(t_k) - x_i(t_k)`` for every sample."""
    return traj.state(j) - traj.state(i)


def window(traj: Trajectory, a, b, t0=0.0) -> np.ndarray:
    """Sample indices inside ``[t0 + a, t0 + b]``."""
    lo, hi = t0 + a, t0 + b
    eps = _TIME_EPS * max(1.0, abs(hi))
    if traj.times[-1] < hi - eps:
        raise HorizonError(f"trajectory ends at {traj.times[-1]:g} before {hi:g}")
    if traj.times[0] > lo + eps:
        raise HorizonError(f"trajectory starts at {traj.times[0]:g} after {lo:g}")
    idx = np.flatnonzero((traj.times >= lo - eps) & (traj.times <= hi + eps))
    if idx.size == 0:
        raise HorizonError(f"no samples in [{lo:g}, {hi:g}]")
    return idx


def task_signal(task: AtomicTask, traj: Trajectory) -> np.ndarray:
    if task.is_pair:
        return relative_signal(traj, *task.agents)
    return traj.state(task.agents[0])


def task_robustness(task: AtomicTask, traj: Trajectory, t0=0.0) -> float:
    idx = window(traj, task.a, task.b, t0)
    z = task_signal(task, traj)[idx]
    if z.shape[-1] != task.predicate.dim:
        raise DimensionError(f"predicate has dim {task.predicate.dim} but states have dim {z.shape[-1]}")
    h = task.predicate.value(z)
    return float(np.min(h) if task.operator is Operator.ALWAYS else np.max(h))


def robustness(formula, traj: Trajectory, t0=0.0) -> float:
    """Robustness of a conjunction of atomic tasks on the sample grid.

    Accepts a :class:`TaskFormula`, a single :class:`AtomicTask` or any
    iterable of atomic tasks. Positive values mean satisfaction on the grid.
    """
    if isinstance(formula, AtomicTask):
        return task_robustness(formula, traj, t0)
    values = [task_robustness(t, traj, t0) for t in formula]
    if not values:
        raise ValueError("empty conjunction")
    return min(values)


def spec_robustness(spec: GlobalSpec, traj: Trajectory, t0=0.0):
    """Return ``(rho, breakdown)`` for a global spec; ``breakdown`` lists ``(task, rho_task)``.

    An empty spec has robustness ``+inf``.
    """
    breakdown = [(t, task_robustness(t, traj, t0)) for t in spec.tasks()]
    rho = min((r for _, r in breakdown), default=float("inf"))
    return rho, breakdown
