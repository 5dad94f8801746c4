"""Keyframe trajectory synthesis and the empirical implication check.

Agents are placed at every task-window boundary and every chosen ``F``
instant, then moved linearly between placements. Since each ``G`` window is
bounded by keyframes and every region is convex, a placement that satisfies
all tasks active at the keyframes satisfies them on the whole window.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .decompose import TBAR_POLICIES
from .errors import HorizonError, SynthesisError, UnboundedSetError
from .geometry import chebyshev_center
from .stl import Ball, GlobalSpec, Operator, Polytope, Rect, Trajectory, spec_robustness

#: margin kept from the boundary of unbounded half-space goals
_UNBOUNDED_MARGIN = 1.0


@dataclass(frozen=True)
class SynthesisOptions:
    dt: float = 0.1
    anchor: int | None = None
    vmax: float = math.inf
    tbar_policy: str = "midpoint"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.vmax > 0:
            raise ValueError("vmax must be positive")


def task_instant(task, policy="midpoint") -> float:
    """Instant at which an ``F`` task is realised."""
    if task.tbar is not None:
        return float(task.tbar)
    return float(TBAR_POLICIES[policy](task.a, task.b))


def keyframe_times(spec: GlobalSpec, policy="midpoint") -> list:
    """Window endpoints plus the policy instant of every ``F`` task."""
    times = {0.0}
    for t in spec.tasks():
        times.update((t.a, t.b))
        if t.operator is Operator.EVENTUALLY:
            times.add(task_instant(t, policy))
    return sorted(times)


def _active(tasks, instants, t):
    """Tasks that must hold at time ``t``: ``G`` windows covering it and ``F`` tasks scheduled there."""
    out = []
    for k, task in enumerate(tasks):
        if task.operator is Operator.ALWAYS:
            if task.a <= t <= task.b:
                out.append(task)
        elif instants[k] == t:
            out.append(task)
    return out


def _target(pf, prev):
    """A point deep inside the superlevel set of ``pf``."""
    if isinstance(pf, (Ball, Rect)):
        return np.asarray(pf.center, dtype=float)
    A, b = np.asarray(pf.normals), np.asarray(pf.offsets)
    try:
        return chebyshev_center(A, b)[0]
    except UnboundedSetError:
        pass
    # nearest point to ``prev`` that keeps a fixed margin from every face
    shrunk = b - _UNBOUNDED_MARGIN * np.linalg.norm(A, axis=1)
    res = minimize(
        lambda z: float(np.sum((z - prev) ** 2)), prev, jac=lambda z: 2 * (z - prev),
        constraints=[{"type": "ineq", "fun": lambda z: shrunk - A @ z, "jac": lambda z: -A}],
        method="SLSQP",
    )
    return res.x


def _margin_rows(pf, z):
    """Smooth-ish pieces whose minimum is the predicate value at ``z``."""
    if isinstance(pf, Ball):
        d = z - pf.center
        return np.array([pf.radius - np.sqrt(d @ d + 1e-16)])
    if isinstance(pf, Rect):
        d = z - pf.center
        return np.concatenate([pf.size / 2 - d, pf.size / 2 + d])
    if isinstance(pf, Polytope):
        return pf.offsets - pf.normals @ z
    raise TypeError(type(pf).__name__)


def _subject(task, X, index):
    if task.is_pair:
        i, j = task.agents
        return X[index[j]] - X[index[i]]
    return X[index[task.agents[0]]]


def _place(active, agents, dim, prev, anchor):
    """Least-squares placement pulling every active task toward its region center."""
    index = {a: k for k, a in enumerate(agents)}
    N = len(agents)
    rows, rhs = [], []
    for task in active:
        row = np.zeros(N)
        if task.is_pair:
            i, j = task.agents
            row[index[j]] += 1.0
            row[index[i]] -= 1.0
            ref = prev[index[j]] - prev[index[i]]
        else:
            row[index[task.agents[0]]] = 1.0
            ref = prev[index[task.agents[0]]]
        rows.append(row)
        rhs.append(_target(task.predicate, ref))
    if not rows:
        return prev.copy(), index
    A, b = np.array(rows), np.array(rhs)
    # the anchor stays put unless an absolute task moves the whole team
    free = list(range(N))
    if not any(not t.is_pair for t in active) and anchor in index:
        free.remove(index[anchor])
    # minimum-norm correction: agents without active tasks keep their place
    delta, *_ = np.linalg.lstsq(A[:, free], b - A @ prev, rcond=None)
    X = prev.copy()
    X[free] += delta
    return X, index


def _min_margin(active, X, index):
    vals = [np.min(_margin_rows(t.predicate, _subject(t, X, index))) for t in active]
    return min(vals, default=math.inf)


def _refine(active, X0, index):
    """Maximize the smallest task margin, starting from the least-squares placement."""
    N, n = X0.shape

    def unpack(v):
        return v[:-1].reshape(N, n), v[-1]

    def cons(v):
        X, s = unpack(v)
        return np.concatenate([_margin_rows(t.predicate, _subject(t, X, index)) - s for t in active])

    v0 = np.append(X0.ravel(), _min_margin(active, X0, index))
    res = minimize(
        lambda v: -v[-1] + 1e-6 * float(np.sum((v[:-1] - X0.ravel()) ** 2)),
        v0,
        constraints=[{"type": "ineq", "fun": cons}],
        bounds=[(None, None)] * (N * n) + [(None, 10.0)],
        method="SLSQP",
        options={"maxiter": 500, "ftol": 1e-12},
    )
    return unpack(res.x)[0]


def _feasible_at(active, agents, n, anchor) -> bool:
    X, index = _place(active, agents, n, np.zeros((len(agents), n)), anchor)
    if _min_margin(active, X, index) <= 0:
        X = _refine(active, X, index)
    return _min_margin(active, X, index) > 0


def _schedule(tasks, policy, agents, n, anchor) -> list:
    """Instant for every ``F`` task (``nan`` for ``G`` tasks).

    Degenerate windows and explicit ``tbar`` values are kept. Any other ``F``
    task tries the policy instant first, then the midpoint of every
    elementary segment of its window (between consecutive ``G`` window
    endpoints), then the window ends, and keeps the first instant at which
    everything scheduled there can be placed together.
    """
    instants = [math.nan] * len(tasks)
    flexible = []
    for k, t in enumerate(tasks):
        if t.operator is not Operator.EVENTUALLY:
            continue
        if t.tbar is not None or t.a == t.b:
            instants[k] = task_instant(t, policy)
        else:
            flexible.append(k)
    cuts = sorted({v for t in tasks if t.operator is Operator.ALWAYS for v in t.interval})
    for k in flexible:
        t = tasks[k]
        inner = sorted({t.a, t.b, *[c for c in cuts if t.a < c < t.b]})
        mids = [(lo + hi) / 2 for lo, hi in zip(inner, inner[1:])]
        candidates = [task_instant(t, policy)] + mids + [t.a, t.b]
        instants[k] = candidates[0]
        for c in dict.fromkeys(candidates):
            instants[k] = c
            if _feasible_at(_active(tasks, instants, c), agents, n, anchor):
                break
        else:
            instants[k] = candidates[0]
    return instants


def synthesize_trajectory(result, spec: GlobalSpec | None = None, opts: SynthesisOptions | None = None,
                          n_agents: int | None = None, dim: int | None = None) -> Trajectory:
    """Trajectory meant to satisfy the rewritten specification of ``result``.

    ``result`` may be a decomposition result or a plain :class:`GlobalSpec`
    (then ``n_agents`` is required).
    """
    opts = opts or SynthesisOptions()
    if isinstance(result, GlobalSpec):
        target = result
        if n_agents is None:
            n_agents = max(result.agents, default=1)
    else:
        target = result.spec
        n_agents = n_agents or result.comm_graph.n_nodes
    agents = list(range(1, n_agents + 1))
    dims = {t.predicate.dim for t in target.tasks()}
    if spec is not None:
        dims |= {t.predicate.dim for t in spec.tasks()}
    n = dims.pop() if dims else (dim or 2)
    anchor = opts.anchor if opts.anchor is not None else agents[0]
    if len(target) == 0:
        return Trajectory([0.0, opts.dt], {a: np.zeros((2, n)) for a in agents})

    tasks = list(target.tasks())
    instants = _schedule(tasks, opts.tbar_policy, agents, n, anchor)
    keys = {0.0}
    for task, t in zip(tasks, instants):
        keys.update(task.interval)
        if not math.isnan(t):
            keys.add(t)
    keys = sorted(keys)
    if spec is not None and spec.horizon > keys[-1]:
        # collapsed F windows can end the rewritten spec early; cover the original too
        keys.append(float(spec.horizon))
    prev = np.zeros((len(agents), n))
    frames = []
    for t in keys:
        active = _active(tasks, instants, t)
        X, index = _place(active, agents, n, prev, anchor)
        if active and _min_margin(active, X, index) <= 0:
            X = _refine(active, X, index)
        if active:
            bad = [str(task.name or task) for task in active
                   if np.min(_margin_rows(task.predicate, _subject(task, X, index))) <= 0]
            if bad:
                raise SynthesisError(f"no placement at t={t:g} satisfies {', '.join(bad)}")
        frames.append(X)
        prev = X
    for k in range(1, len(keys)):
        speed = np.linalg.norm(frames[k] - frames[k - 1], axis=1) / (keys[k] - keys[k - 1])
        if np.any(speed > opts.vmax):
            a = agents[int(np.argmax(speed))]
            raise SynthesisError(f"agent {a} cannot reach its keyframe at t={keys[k]:g} (speed {speed.max():.3g})")
    horizon = keys[-1]
    grid = np.round(np.arange(0, int(math.floor(horizon / opts.dt + 1e-9)) + 1) * opts.dt, 12)
    times = np.union1d(grid, keys)
    # drop grid points that duplicate a keyframe up to rounding
    keep = np.ones(times.size, dtype=bool)
    keyset = np.asarray(keys)
    for k, t in enumerate(times):
        near = np.abs(keyset - t) < 1e-9
        if near.any() and t not in keys:
            keep[k] = False
    times = times[keep]
    if times.size == 1:
        times = np.array([0.0, opts.dt])
    stack = np.array(frames)  # (K, N, n)
    states = {}
    for k, a in enumerate(agents):
        states[a] = np.column_stack([np.interp(times, keys, stack[:, k, d]) for d in range(n)])
    return Trajectory(times, states)


@dataclass
class ImplicationReport:
    rho_rewritten: float
    rho_original: float
    breakdown_rewritten: list = field(default_factory=list)
    breakdown_original: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        if self.rho_rewritten > 0:
            return "holds" if self.rho_original > 0 else "violated"
        return "vacuous"

    def failing(self, which="rewritten") -> list:
        rows = self.breakdown_rewritten if which == "rewritten" else self.breakdown_original
        return [name for name, rho in rows if rho <= 0]


def _named(breakdown):
    return [(t.name or str(t), float(r)) for t, r in breakdown]


def verify_implication(traj: Trajectory, rewritten: GlobalSpec, original: GlobalSpec) -> ImplicationReport:
    """Robustness of both specifications on the trajectory's own sample grid."""
    end = traj.times[-1]
    for spec in (rewritten, original):
        if spec.horizon > end + 1e-9 * max(1.0, end):
            raise HorizonError(f"trajectory ends at {end:g} before the horizon {spec.horizon:g}")
    rb, bb = spec_robustness(rewritten, traj)
    ro, bo = spec_robustness(original, traj)
    return ImplicationReport(rb, ro, _named(bb), _named(bo))


# ------------------------------------------------------------------ CSV


def trajectory_to_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = traj.dim
    w.writerow(["t"] + [f"x{a}_{k + 1}" for a in traj.agents for k in range(n)])
    for m, t in enumerate(traj.times):
        row = [repr(float(t))]
        for a in traj.agents:
            row += [repr(float(v)) for v in traj.states[a][m]]
        w.writerow(row)
    return buf.getvalue()


def trajectory_from_csv(text: str) -> Trajectory:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0] or rows[0][0] != "t":
        raise ValueError("trajectory CSV must start with a 't' column")
    cols = {}
    for k, name in enumerate(rows[0][1:], start=1):
        try:
            agent, coord = name[1:].split("_")
            cols.setdefault(int(agent), []).append((int(coord), k))
            if not name.startswith("x"):
                raise ValueError
        except ValueError:
            raise ValueError(f"bad trajectory column {name!r}") from None
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ValueError(f"bad trajectory value: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(rows[0]):
        raise ValueError("trajectory CSV rows have inconsistent lengths")
    states = {a: data[:, [k for _, k in sorted(c)]] for a, c in cols.items()}
    return Trajectory(data[:, 0], states)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(trajectory_to_csv(traj))


def read_trajectory_csv(path) -> Trajectory:
    with open(path, encoding="utf-8") as fh:
        return trajectory_from_csv(fh.read())
