"""Scenario files, parameter files and decomposition reports (YAML).

Scenario schema (``schema_version: 1``)::

    agents: 3                  # agents are numbered 1..agents
    dimension: 2
    communication: [[1, 2], [2, 3]]
    tasks:
      - subject: [1, 3]        # e_13 = x_3 - x_1; use ``agent: i`` for x_i
        operator: always       # or eventually
        interval: [0, 5]
        predicate: {type: ball, center: [2, 0], radius: 1}
        tbar: 2.5              # optional, eventually tasks only
        name: reach            # optional
    options: {nu_min: 1.0e-3, tol: 1.0e-6, max_cycle_len: 6, tbar_policy: midpoint}

Predicates: ``{type: ball, center, radius}``, ``{type: rect, center, size}``
and ``{type: halfspaces, rows: [{normal, offset}, ...]}`` (the set
``normal . z <= offset`` for every row).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import ScenarioError
from .geometry import HyperRect
from .graphs import UndirectedGraph
from .stl import AtomicTask, Ball, GlobalSpec, Operator, Polytope, Rect

SCHEMA_VERSION = 1
OPTION_KEYS = ("nu_min", "tol", "max_cycle_len", "tbar_policy")


@dataclass(eq=False)
class Scenario:
    n_agents: int
    dim: int
    communication: list
    tasks: list
    options: dict = field(default_factory=dict)

    def spec(self) -> GlobalSpec:
        return GlobalSpec.from_tasks(self.tasks)

    def comm_graph(self) -> UndirectedGraph:
        return UndirectedGraph(self.n_agents, frozenset(map(tuple, self.communication)))

    def decompose_options(self, **overrides):
        from .decompose import DecomposeOptions

        opts = {k: v for k, v in self.options.items() if k in OPTION_KEYS}
        opts.update({k: v for k, v in overrides.items() if v is not None})
        return DecomposeOptions(**opts)

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "agents": self.n_agents,
            "dimension": self.dim,
            "communication": [list(e) for e in self.communication],
            "tasks": [task_to_dict(t) for t in self.tasks],
        }
        if self.options:
            out["options"] = dict(self.options)
        return out

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.to_dict() == other.to_dict()


# ------------------------------------------------------------ predicates


def predicate_to_dict(pf) -> dict:
    if isinstance(pf, Ball):
        return {"type": "ball", "center": _floats(pf.center), "radius": float(pf.radius)}
    if isinstance(pf, Rect):
        return {"type": "rect", "center": _floats(pf.center), "size": _floats(pf.size)}
    if isinstance(pf, Polytope):
        rows = [{"normal": _floats(n), "offset": float(b)} for n, b in zip(pf.normals, pf.offsets)]
        return {"type": "halfspaces", "rows": rows}
    raise TypeError(f"unsupported predicate {type(pf).__name__}")


def task_to_dict(t: AtomicTask) -> dict:
    out = {}
    if t.name is not None:
        out["name"] = t.name
    if t.is_pair:
        out["subject"] = list(t.agents)
    else:
        out["agent"] = t.agents[0]
    out["operator"] = t.operator.value
    out["interval"] = [float(t.a), float(t.b)]
    out["predicate"] = predicate_to_dict(t.predicate)
    if t.tbar is not None:
        out["tbar"] = float(t.tbar)
    return out


def _floats(v) -> list:
    return [float(x) for x in np.asarray(v).reshape(-1)]


# --------------------------------------------------------------- parsing


class _Fields:
    """Typed accessors that report the offending field path."""

    def __init__(self, data, path):
        if not isinstance(data, dict):
            raise ScenarioError(f"expected a mapping at {path or 'top level'}")
        self.data, self.path = data, path

    def at(self, key):
        return f"{self.path}.{key}" if self.path else key

    def has(self, key):
        return key in self.data

    def get(self, key, default=None):
        return self.data.get(key, default)

    def require(self, key):
        if key not in self.data:
            raise ScenarioError(f"missing field {self.at(key)}")
        return self.data[key]

    def number(self, key, default=None):
        v = self.data.get(key, default) if default is not None else self.require(key)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ScenarioError(f"expected a finite number at {self.at(key)}")
        return float(v)

    def integer(self, key):
        v = self.require(key)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ScenarioError(f"expected an integer at {self.at(key)}")
        return v

    def vector(self, key, dim=None):
        v = self.require(key)
        if not isinstance(v, list) or not v:
            raise ScenarioError(f"expected a non-empty list at {self.at(key)}")
        for k, x in enumerate(v):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                raise ScenarioError(f"expected a finite number at {self.at(key)}[{k}]")
        if dim is not None and len(v) != dim:
            raise ScenarioError(f"expected {dim} entries at {self.at(key)}, got {len(v)}")
        return [float(x) for x in v]


def _load_yaml(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ScenarioError(f"syntax error{where}: {exc.problem or exc}") from None
    except yaml.YAMLError as exc:
        raise ScenarioError(f"syntax error: {exc}") from None


def _check_version(f: _Fields):
    v = f.get("schema_version")
    if v != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema_version {v!r} (expected {SCHEMA_VERSION})")


def parse_predicate(data, path, dim):
    f = _Fields(data, path)
    kind = f.require("type")
    if kind == "ball":
        r = f.number("radius")
        if not r > 0:
            raise ScenarioError(f"radius must be positive at {f.at('radius')}")
        return Ball(f.vector("center", dim), r)
    if kind == "rect":
        c, s = f.vector("center", dim), f.vector("size", dim)
        if not all(x > 0 for x in s):
            raise ScenarioError(f"sizes must be positive at {f.at('size')}")
        return Rect(HyperRect(c, s))
    if kind == "halfspaces":
        rows = f.require("rows")
        if not isinstance(rows, list) or not rows:
            raise ScenarioError(f"expected a non-empty list at {f.at('rows')}")
        normals, offsets = [], []
        for k, row in enumerate(rows):
            rf = _Fields(row, f"{f.at('rows')}[{k}]")
            n = rf.vector("normal", dim)
            if not any(n):
                raise ScenarioError(f"normal must be non-zero at {rf.at('normal')}")
            normals.append(n)
            offsets.append(rf.number("offset"))
        return Polytope(normals, offsets)
    raise ScenarioError(f"unknown predicate type {kind!r} at {f.at('type')}")


def parse_task(data, path, n_agents, dim) -> AtomicTask:
    f = _Fields(data, path)
    if f.has("subject") == f.has("agent"):
        raise ScenarioError(f"give exactly one of subject or agent at {path}")
    if f.has("subject"):
        agents = f.require("subject")
        if not (isinstance(agents, list) and len(agents) == 2 and all(isinstance(a, int) for a in agents)):
            raise ScenarioError(f"subject must be two agent ids at {f.at('subject')}")
        if agents[0] == agents[1]:
            raise ScenarioError(f"subject agents must differ at {f.at('subject')}")
        key = "subject"
    else:
        agents = [f.integer("agent")]
        key = "agent"
    for a in agents:
        if not 1 <= a <= n_agents:
            raise ScenarioError(f"unknown agent {a} at {f.at(key)}")
    op = f.require("operator")
    if op not in ("always", "eventually"):
        raise ScenarioError(f"operator must be always or eventually at {f.at('operator')}")
    a, b = f.vector("interval", 2)
    if b < a:
        raise ScenarioError(f"interval end before start at {f.at('interval')}")
    if a < 0:
        raise ScenarioError(f"interval start must be non-negative at {f.at('interval')}")
    tbar = None
    if f.has("tbar"):
        if op != "eventually":
            raise ScenarioError(f"tbar only applies to eventually tasks at {f.at('tbar')}")
        tbar = f.number("tbar")
        if not a <= tbar <= b:
            raise ScenarioError(f"tbar outside the interval at {f.at('tbar')}")
    name = f.get("name")
    if name is not None and not isinstance(name, str):
        raise ScenarioError(f"name must be a string at {f.at('name')}")
    pred = parse_predicate(f.require("predicate"), f.at("predicate"), dim)
    return AtomicTask(Operator(op), (a, b), tuple(agents), pred, tbar, name)


def parse_scenario(text: str) -> Scenario:
    f = _Fields(_load_yaml(text), "")
    _check_version(f)
    n_agents = f.integer("agents")
    dim = f.integer("dimension")
    if n_agents < 1:
        raise ScenarioError("agents must be at least 1")
    if dim < 1:
        raise ScenarioError("dimension must be at least 1")
    comm = f.get("communication", [])
    if not isinstance(comm, list):
        raise ScenarioError("expected a list at communication")
    edges = []
    for k, e in enumerate(comm):
        where = f"communication[{k}]"
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) and not isinstance(v, bool) for v in e)):
            raise ScenarioError(f"expected a pair of agent ids at {where}")
        if e[0] == e[1]:
            raise ScenarioError(f"self-loop at {where}")
        for v in e:
            if not 1 <= v <= n_agents:
                raise ScenarioError(f"unknown agent {v} at {where}")
        edges.append((int(e[0]), int(e[1])))
    tasks_raw = f.get("tasks", []) or []
    if not isinstance(tasks_raw, list):
        raise ScenarioError("expected a list at tasks")
    tasks = [parse_task(t, f"tasks[{k}]", n_agents, dim) for k, t in enumerate(tasks_raw)]
    options = f.get("options", {}) or {}
    of = _Fields(options, "options")
    for key in options:
        if key not in OPTION_KEYS:
            raise ScenarioError(f"unknown option {of.at(key)}")
    opts = {}
    for key in ("nu_min", "tol"):
        if of.has(key):
            opts[key] = of.number(key)
            if not opts[key] > 0:
                raise ScenarioError(f"{of.at(key)} must be positive")
    if of.has("max_cycle_len"):
        opts["max_cycle_len"] = of.integer("max_cycle_len")
        if opts["max_cycle_len"] < 3:
            raise ScenarioError("options.max_cycle_len must be at least 3")
    if of.has("tbar_policy"):
        if options["tbar_policy"] not in ("midpoint", "start", "end"):
            raise ScenarioError("options.tbar_policy must be midpoint, start or end")
        opts["tbar_policy"] = options["tbar_policy"]
    scn = Scenario(n_agents, dim, edges, tasks, opts)
    if n_agents > 1 and not scn.comm_graph().is_connected():
        raise ScenarioError("communication graph is not connected at communication")
    return scn


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("stldecomp") / "data" / name))


def load_scenario(path) -> Scenario:
    """Read a scenario file; a bare name falls back to the bundled data directory."""
    p = Path(path)
    if not p.exists() and bundled_path(str(path)).exists():
        p = bundled_path(str(path))
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario(text)


# ----------------------------------------------------------- YAML output


class _Dumper(yaml.SafeDumper):
    pass


def _repr_float(dumper, value):
    if math.isnan(value):
        text = ".nan"
    elif math.isinf(value):
        text = ".inf" if value > 0 else "-.inf"
    else:
        text = format(value, ".17g")
        if not any(ch in text for ch in ".en"):
            text += ".0"
        elif "e" in text and "." not in text:
            mant, exp = text.split("e")
            text = f"{mant}.0e{exp}"
    return dumper.represent_scalar("tag:yaml.org,2002:float", text)


def _repr_list(dumper, value):
    flow = all(not isinstance(v, (dict, list)) for v in value) or all(
        isinstance(v, list) and all(not isinstance(x, (dict, list)) for x in v) for v in value
    )
    return dumper.represent_sequence("tag:yaml.org,2002:seq", value, flow_style=flow)


_Dumper.add_representer(float, _repr_float)
_Dumper.add_representer(list, _repr_list)


def dump_yaml(data) -> str:
    return yaml.dump(data, Dumper=_Dumper, sort_keys=False, allow_unicode=False, width=1000)


def render_scenario(scn: Scenario) -> str:
    return dump_yaml(scn.to_dict())


# ---------------------------------------------------------- parameters


@dataclass
class ParamEntry:
    task: tuple
    conjunct: int
    path: tuple
    edges: list  # [(edge, center, size)]


def parse_params(text: str, dim: int | None = None) -> list:
    """Sub-task parameters as written by ``decompose`` reports (``decomposed`` list)."""
    f = _Fields(_load_yaml(text), "")
    _check_version(f)
    items = f.require("decomposed")
    if not isinstance(items, list):
        raise ScenarioError("expected a list at decomposed")
    out = []
    for k, item in enumerate(items):
        it = _Fields(item, f"decomposed[{k}]")
        task = it.require("task")
        path = it.require("path")
        if not (isinstance(task, list) and len(task) == 2):
            raise ScenarioError(f"task must be an agent pair at {it.at('task')}")
        if not (isinstance(path, list) and len(path) >= 2):
            raise ScenarioError(f"path must list at least two agents at {it.at('path')}")
        conj = it.get("conjunct", 0)
        edges = it.require("edges")
        if not isinstance(edges, list):
            raise ScenarioError(f"expected a list at {it.at('edges')}")
        rows = []
        for m, e in enumerate(edges):
            ef = _Fields(e, f"{it.at('edges')}[{m}]")
            edge = ef.require("edge")
            if not (isinstance(edge, list) and len(edge) == 2):
                raise ScenarioError(f"edge must be an agent pair at {ef.at('edge')}")
            rows.append((tuple(edge), np.array(ef.vector("center", dim)), np.array(ef.vector("size", dim))))
        expected = [tuple(path[m:m + 2]) for m in range(len(path) - 1)]
        if [r[0] for r in rows] != expected:
            raise ScenarioError(f"edges do not follow the path at {it.at('edges')}")
        out.append(ParamEntry(tuple(task), int(conj), tuple(path), rows))
    return out


def load_params(path, dim=None) -> list:
    p = Path(path)
    if not p.exists() and bundled_path(str(path)).exists():
        p = bundled_path(str(path))
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    return parse_params(text, dim)


# --------------------------------------------------------------- reports


def build_report(result, scenario_name: str = "") -> dict:
    """Machine-readable report of a decomposition."""
    from .solver import check_point

    decomposed = []
    for st0 in result.subtasks:
        key = (st0.origin, st0.conjunct)
        if any(d["_key"] == key for d in decomposed):
            continue
        rows = [st for st in result.subtasks if (st.origin, st.conjunct) == key]
        decomposed.append({
            "_key": key,
            "task": list(st0.origin),
            "conjunct": st0.conjunct,
            "operator": st0.operator.value,
            "interval": [float(v) for v in rows[0].interval],
            "path": list(st0.path),
            "edges": [
                {"edge": list(st.edge), "center": _floats(st.center), "size": _floats(st.size)} for st in rows
            ],
        })
    for d in decomposed:
        d.pop("_key")
    census = {"type1": 0, "type2": 0, "type3": 0, "type4": 0}
    for rec in result.assembly.records:
        census[rec.kind.lower()] += 1
    rep = check_point(result.problem, result.solution.x) if result.problem.n_vars else None

    def group_min(names):
        if rep is None:
            return None
        vals = [m for g, m in zip(rep.groups, rep.margins) if g in names]
        return float(min(vals)) if vals else None

    diag = result.diagnostics()
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario_name,
        "status": diag["status"],
        "diagnostics": {
            "objective": float(diag["objective"]),
            "iterations": int(diag["iterations"]),
            "outer_iterations": int(diag["outer_iterations"]),
            "max_violation": float(diag["max_violation"]),
            "variables": int(diag["variables"]),
            "constraints": int(diag["constraints"]),
            "min_inclusion_margin": group_min({"inclusion"}),
            "min_conflict_margin": group_min({"type1", "type2", "type3", "type4"}),
        },
        "conflict_constraints": census,
        "audit_conflicts": len(result.audit),
        "decomposed": decomposed,
        "rewritten_graph": [list(e) for e in result.graph.sorted_edges()],
    }


def render_report(report: dict) -> str:
    return dump_yaml(report)


def _fmt(v) -> str:
    return "[" + ", ".join(f"{x:.2f}" for x in v) + "]"


def render_table(report: dict) -> str:
    """Human-readable table with two decimals per entry."""
    lines = []
    d = report["diagnostics"]
    lines.append(f"status: {report['status']}  objective: {d['objective']:.4f}  "
                 f"iterations: {d['iterations']}  max violation: {d['max_violation']:.2e}")
    c = report["conflict_constraints"]
    lines.append("conflict constraints: " + ", ".join(f"{k} {v}" for k, v in c.items())
                 + f"  audit conflicts: {report['audit_conflicts']}")
    header = f"{'task':<8} {'#':>2} {'op':<3} {'interval':<16} {'path':<14} {'edge':<8} {'center':<18} {'size':<14}"
    lines.append(header)
    lines.append("-" * len(header))
    for item in report["decomposed"]:
        task = f"({item['task'][0]},{item['task'][1]})"
        op = "G" if item["operator"] == "always" else "F"
        iv = _fmt(item["interval"])
        path = "-".join(map(str, item["path"]))
        for k, e in enumerate(item["edges"]):
            edge = f"({e['edge'][0]},{e['edge'][1]})"
            head = (task, str(item["conjunct"]), op, iv, path) if k == 0 else ("", "", "", "", "")
            lines.append(f"{head[0]:<8} {head[1]:>2} {head[2]:<3} {head[3]:<16} {head[4]:<14} "
                         f"{edge:<8} {_fmt(e['center']):<18} {_fmt(e['size']):<14}")
    lines.append("rewritten graph: " + " ".join(f"({i},{j})" for i, j in report["rewritten_graph"]))
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> list:
    """Rows ``(task, conjunct, edge, center, size)`` read back from :func:`render_table`."""
    import re

    rows, task, conj = [], None, None
    pat = re.compile(
        r"^(\(\d+,\d+\))?\s*(\d+)?\s*(?:[GF]\s+\[[^\]]*\]\s+[\d-]+\s+)?(\(\d+,\d+\))\s+(\[[^\]]*\])\s+(\[[^\]]*\])\s*$"
    )
    for line in text.splitlines():
        m = pat.match(line)
        if not m:
            continue
        if m.group(1):
            task, conj = tuple(int(v) for v in m.group(1)[1:-1].split(",")), int(m.group(2))
        edge = tuple(int(v) for v in m.group(3)[1:-1].split(","))
        center = [float(v) for v in m.group(4)[1:-1].split(",")]
        size = [float(v) for v in m.group(5)[1:-1].split(",")]
        rows.append((task, conj, edge, center, size))
    return rows
