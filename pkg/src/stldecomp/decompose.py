"""Path decomposition of collaborative tasks on non-communicating pairs.

A task on ``e_ij`` whose edge is missing from the communication graph is
replaced by one box-shaped sub-task per edge of a communication path from
``i`` to ``j``. The boxes are decision variables; their Minkowski sum must fit
inside the original predicate's superlevel set, and the sum of reciprocal box
volumes is minimized.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conflicts import DEFAULT_COMBINATION_CAP, Conjunct, EdgeTaskBundle, audit, resolution_constraints
from .errors import DimensionError, GraphError, InfeasibleError, UnboundedSetError
from .geometry import HyperRect, chebyshev_center
from .graphs import UndirectedGraph, edge_sequence, enumerate_cycles, rewrite_task_graph, shortest_path, validate_path
from .problem import ConvexProblem, LowerBound, ParameterSet, VertexInclusion
from .solver import SolverParams, Status, solve
from .stl import Ball, GlobalSpec, Operator, Polytope, Rect, AtomicTask, canonical_edge

TBAR_POLICIES = {
    "midpoint": lambda a, b: (a + b) / 2,
    "start": lambda a, b: a,
    "end": lambda a, b: b,
}


@dataclass(frozen=True)
class DecomposeOptions:
    nu_min: float = 1e-3
    tol: float = 1e-6
    max_cycle_len: int = 6
    tbar_policy: str = "midpoint"
    combination_cap: int = DEFAULT_COMBINATION_CAP
    solver: SolverParams | None = None

    def __post_init__(self):
        if not self.nu_min > 0:
            raise ValueError("nu_min must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.tbar_policy not in TBAR_POLICIES:
            raise ValueError(f"unknown tbar policy {self.tbar_policy!r}")
        if self.max_cycle_len < 3:
            raise ValueError("max_cycle_len must be at least 3")

    def solver_params(self) -> SolverParams:
        if self.solver is not None:
            return self.solver
        return SolverParams(tol=self.tol)


@dataclass(eq=False)
class ParametricTask:
    """Box-shaped sub-task on one directed communication edge."""

    origin: tuple
    conjunct: int
    path: tuple
    edge: tuple
    operator: Operator
    interval: tuple
    center: np.ndarray | None = None
    size: np.ndarray | None = None

    @property
    def key(self) -> tuple:
        return (self.origin, self.conjunct, self.edge)

    @property
    def uid(self) -> str:
        o, (r, s) = self.origin, self.edge
        return f"eta{o[0]}.{o[1]}#{self.conjunct}@{r}.{s}"

    @property
    def solved(self) -> bool:
        return self.center is not None

    def rect(self) -> HyperRect:
        if not self.solved:
            raise ValueError(f"sub-task {self.uid} has no solved parameters")
        return HyperRect(self.center, self.size)

    def as_task(self) -> AtomicTask:
        return AtomicTask(self.operator, self.interval, self.edge, Rect(self.rect()), name=self.uid)


def resolve_tbar(task: AtomicTask, policy: str = "midpoint") -> float:
    if task.tbar is not None:
        return float(task.tbar)
    return float(TBAR_POLICIES[policy](task.a, task.b))


def build_subtasks(task: AtomicTask, path, conjunct: int = 0, tbar_policy: str = "midpoint") -> list:
    """One parametric sub-task per path edge, all sharing one interval.

    ``G`` keeps ``[a, b]``; ``F`` collapses to ``[tbar, tbar]``.
    """
    path = tuple(path)
    if not task.is_pair or (path[0], path[-1]) != task.agents:
        raise GraphError(f"path {path} does not run from {task.agents[0]} to {task.agents[-1]}")
    if task.operator is Operator.ALWAYS:
        interval = (task.a, task.b)
    else:
        t = resolve_tbar(task, tbar_policy)
        interval = (t, t)
    return [ParametricTask(task.agents, conjunct, path, e, task.operator, interval) for e in edge_sequence(path)]


def target_center(pf) -> np.ndarray:
    if isinstance(pf, Ball):
        return np.array(pf.center)
    if isinstance(pf, Rect):
        return np.array(pf.center)
    if isinstance(pf, Polytope):
        return chebyshev_center(np.asarray(pf.normals), np.asarray(pf.offsets))[0]
    raise TypeError(f"unsupported predicate {type(pf).__name__}")


def _spec_dim(spec: GlobalSpec) -> int | None:
    dims = {t.predicate.dim for t in spec.tasks()}
    if len(dims) > 1:
        raise DimensionError(f"tasks use different state dimensions {sorted(dims)}")
    return dims.pop() if dims else None


def task_graph(spec: GlobalSpec, n_agents: int) -> UndirectedGraph:
    return UndirectedGraph(n_agents, frozenset(spec.collaborative), frozenset(spec.independent))


def plan_paths(spec: GlobalSpec, gc: UndirectedGraph, paths=None) -> dict:
    """Communication path for every collaborative edge missing from ``gc``.

    Paths run from the formula's first agent to its second. Explicit ``paths``
    (keyed by canonical edge) override the hop-count shortest path.
    """
    paths = dict(paths or {})
    out = {}
    for key, formula in spec.collaborative.items():
        if gc.has_edge(*key):
            continue
        i, j = formula.agents
        if key in paths:
            p = tuple(paths[key])
            if (p[0], p[-1]) == (j, i):
                p = p[::-1]
            out[key] = validate_path(gc, p)
        else:
            out[key] = shortest_path(gc, i, j)
    return out


@dataclass(eq=False)
class Assembly:
    """Everything produced before solving."""

    problem: ConvexProblem
    subtasks: list
    paths: dict
    bundles: dict
    cycles: list
    records: list
    inclusions: list


def _bundles(spec: GlobalSpec, gc: UndirectedGraph, subtasks, params: ParameterSet) -> dict:
    bundles = {}
    for key, formula in spec.collaborative.items():
        if not gc.has_edge(*key):
            continue
        for k, t in enumerate(formula):
            t = t.oriented(key)
            c = Conjunct(f"psi{key[0]}.{key[1]}#{k}", t.operator, t.interval, predicate=t.predicate)
            bundles.setdefault(key, []).append(c)
    for st in subtasks:
        r, s = st.edge
        expr = params.rect(st.key)
        if r > s:
            expr = -expr
        bundles.setdefault(canonical_edge(r, s), []).append(Conjunct(st.uid, st.operator, st.interval, expr=expr))
    return {k: EdgeTaskBundle(k, v) for k, v in sorted(bundles.items())}


def assemble_problem(spec: GlobalSpec, gc: UndirectedGraph, paths: dict, options: DecomposeOptions | None = None,
                     conflicts: bool = True) -> Assembly:
    """Parametric sub-tasks, inclusion rows, size bounds and conflict-resolution rows."""
    options = options or DecomposeOptions()
    missing = [k for k in spec.collaborative if not gc.has_edge(*k) and k not in paths]
    if missing:
        raise GraphError(f"no path given for task edges {missing}")
    n = _spec_dim(spec) or 1
    params = ParameterSet(n)
    subtasks, inclusions = [], []
    decomposed = [(k, spec.collaborative[k]) for k in sorted(paths)]
    for key, formula in decomposed:
        for c, task in enumerate(formula):
            if not task.predicate.bounded:
                raise UnboundedSetError(f"task {task} on a mismatched edge needs a bounded predicate")
            sts = build_subtasks(task, paths[key], c, options.tbar_policy)
            for st in sts:
                params.add(st.key)
            subtasks += sts
    N = params.size
    x0 = np.zeros(N)
    constraints = []
    for key, formula in decomposed:
        for c, task in enumerate(formula):
            sts = [st for st in subtasks if st.origin == task.agents and st.conjunct == c]
            agg = sum((params.rect(st.key) for st in sts[1:]), params.rect(sts[0].key))
            label = f"inclusion {task.agents[0]}->{task.agents[1]}#{c}"
            inc = VertexInclusion(agg, task.predicate, label, "inclusion")
            constraints.append(inc)
            inclusions.append(inc)
            center = target_center(task.predicate) / len(sts)
            for st in sts:
                blk = params[st.key]
                x0[list(blk.p)] = center
                x0[list(blk.nu)] = 2 * options.nu_min
    for blk in params.blocks:
        for k, idx in enumerate(blk.nu):
            constraints.append(LowerBound(idx, options.nu_min, N, f"nu_min {blk.key} [{k}]"))
    bundles = _bundles(spec, gc, subtasks, params)
    gpsi_bar = rewrite_task_graph(task_graph(spec, gc.n_nodes), gc, paths)
    cycles = enumerate_cycles(gpsi_bar, options.max_cycle_len) if gpsi_bar.n_nodes >= 3 else []
    records = []
    if conflicts:
        extra, records = resolution_constraints(bundles, cycles, N, options.combination_cap)
        constraints += extra
    tbar = {st.key: st.interval[0] for st in subtasks if st.operator is Operator.EVENTUALLY}
    problem = ConvexProblem(params, constraints, x0, options.nu_min, tbar)
    return Assembly(problem, subtasks, paths, bundles, cycles, records, inclusions)


@dataclass(eq=False)
class DecompositionResult:
    original: GlobalSpec
    spec: GlobalSpec
    comm_graph: UndirectedGraph
    task_graph: UndirectedGraph
    graph: UndirectedGraph
    paths: dict
    subtasks: list
    assembly: Assembly
    solution: object
    audit: list = field(default_factory=list)

    @property
    def status(self) -> Status:
        return self.solution.status

    @property
    def problem(self) -> ConvexProblem:
        return self.assembly.problem

    @property
    def decomposed_tasks(self) -> list:
        """``(origin agents, conjunct index)`` of every decomposed conjunct."""
        return sorted({(st.origin, st.conjunct) for st in self.subtasks})

    def parameter_table(self) -> dict:
        """``{(origin, conjunct): [(edge, center, size), ...]}`` in path order."""
        out = {}
        for st in self.subtasks:
            out.setdefault((st.origin, st.conjunct), []).append((st.edge, st.center, st.size))
        return out

    def diagnostics(self) -> dict:
        sol = self.solution
        return {
            "status": sol.status.value,
            "iterations": sol.iterations,
            "outer_iterations": sol.outer_iterations,
            "objective": sol.objective,
            "max_violation": sol.max_violation,
            "variables": self.problem.n_vars,
            "constraints": len(self.problem.constraints),
        }

    def neighbors_respected(self) -> bool:
        """Every rewritten-graph edge is a communication edge."""
        return self.graph.edges <= self.comm_graph.edges


def materialize(spec: GlobalSpec, subtasks) -> GlobalSpec:
    """Rewritten specification: inherited tasks plus solved box sub-tasks."""
    decomposed = {canonical_edge(*st.origin) for st in subtasks}
    tasks = [t for t in spec.tasks() if not (t.is_pair and canonical_edge(*t.agents) in decomposed)]
    tasks += [st.as_task() for st in subtasks]
    return GlobalSpec.from_tasks(tasks)


def decompose(spec: GlobalSpec, gc: UndirectedGraph, options: DecomposeOptions | None = None,
              paths=None) -> DecompositionResult:
    """Rewrite ``spec`` so every collaborative task sits on a communication edge."""
    options = options or DecomposeOptions()
    if not gc.is_connected():
        raise GraphError("communication graph is not connected")
    for a in spec.agents:
        if a not in gc.nodes:
            raise GraphError(f"agent {a} is not a node of the communication graph")
    plan = plan_paths(spec, gc, paths)
    asm = assemble_problem(spec, gc, plan, options)
    prob = asm.problem
    sol = solve(prob.compile(), options.solver_params())
    if sol.status not in (Status.OPTIMAL, Status.FEASIBLE):
        raise InfeasibleError(f"solver stopped with status {sol.status.value}")
    values = prob.params.unpack(sol.x)
    for st in asm.subtasks:
        st.center, st.size = values[st.key]
    rewritten = materialize(spec, asm.subtasks)
    tg = task_graph(spec, gc.n_nodes)
    found = audit(asm.bundles, asm.cycles, sol.x, options.combination_cap) if prob.n_vars else []
    return DecompositionResult(
        spec, rewritten, gc, tg, rewrite_task_graph(tg, gc, plan), plan, asm.subtasks, asm, sol, found
    )
