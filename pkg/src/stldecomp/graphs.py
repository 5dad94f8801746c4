"""Communication/task graphs, hop-count shortest paths and cycle enumeration.

Paths and cycles are plain tuples of node ids. A cycle repeats its first node
at the end, e.g. ``(1, 2, 3, 1)``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import GraphError


def _canon(i, j):
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class UndirectedGraph:
    """Undirected graph on nodes ``1..n_nodes`` with optional self-loops."""

    n_nodes: int
    edges: frozenset = field(default_factory=frozenset)
    self_loops: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        edges = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise GraphError(f"edge ({i},{j}) is a self-loop; use self_loops")
            for v in (i, j):
                if not 1 <= v <= self.n_nodes:
                    raise GraphError(f"node {v} outside 1..{self.n_nodes}")
            edges.add(_canon(i, j))
        loops = frozenset(int(v) for v in self.self_loops)
        for v in loops:
            if not 1 <= v <= self.n_nodes:
                raise GraphError(f"node {v} outside 1..{self.n_nodes}")
        object.__setattr__(self, "edges", frozenset(edges))
        object.__setattr__(self, "self_loops", loops)
        adj = {v: [] for v in range(1, self.n_nodes + 1)}
        for i, j in edges:
            adj[i].append(j)
            adj[j].append(i)
        object.__setattr__(self, "_adj", {k: tuple(sorted(v)) for k, v in adj.items()})

    @property
    def nodes(self) -> range:
        return range(1, self.n_nodes + 1)

    def neighbors(self, i) -> tuple:
        try:
            return self._adj[i]
        except KeyError:
            raise GraphError(f"unknown node {i}") from None

    def has_edge(self, i, j) -> bool:
        return _canon(i, j) in self.edges

    def sorted_edges(self) -> list:
        return sorted(self.edges)

    def is_connected(self) -> bool:
        if self.n_nodes == 0:
            return True
        return len(hop_distances(self, 1)) == self.n_nodes

    def with_edges(self, add=(), remove=()) -> "UndirectedGraph":
        remove = {_canon(*e) for e in remove}
        edges = (set(self.edges) - remove) | {_canon(*e) for e in add}
        return UndirectedGraph(self.n_nodes, frozenset(edges), self.self_loops)


def hop_distances(g: UndirectedGraph, source) -> dict:
    """Breadth-first hop counts from ``source`` to every reachable node."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in g.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def shortest_path(g: UndirectedGraph, i, j) -> tuple:
    """Minimum-hop path from ``i`` to ``j``.

    Unit edge weights make Dijkstra a breadth-first search. Among equally short
    paths the lexicographically smallest node sequence is returned.
    """
    if i == j:
        raise GraphError("path endpoints must differ")
    g.neighbors(i)
    dist = hop_distances(g, j)
    if i not in dist:
        raise GraphError(f"nodes {i} and {j} are not connected")
    path = [i]
    u = i
    while u != j:
        u = min(v for v in g.neighbors(u) if dist.get(v) == dist[u] - 1)
        path.append(u)
    return tuple(path)


def edge_sequence(nodes) -> list:
    """Directed edges ``(nodes[k], nodes[k+1])`` in path order."""
    nodes = list(nodes)
    return [(nodes[k], nodes[k + 1]) for k in range(len(nodes) - 1)]


def validate_path(g: UndirectedGraph, nodes) -> tuple:
    nodes = tuple(nodes)
    if len(nodes) < 2:
        raise GraphError("a path needs at least two nodes")
    if len(set(nodes)) != len(nodes):
        raise GraphError(f"path {nodes} repeats a node")
    for r, s in edge_sequence(nodes):
        if not g.has_edge(r, s):
            raise GraphError(f"path edge ({r},{s}) is not in the graph")
    return nodes


def validate_cycle(g: UndirectedGraph, nodes) -> tuple:
    nodes = tuple(nodes)
    if len(nodes) < 4 or nodes[0] != nodes[-1]:
        raise GraphError(f"{nodes} is not a closed cycle with at least three nodes")
    inner = nodes[:-1]
    if len(set(inner)) != len(inner):
        raise GraphError(f"cycle {nodes} repeats an interior node")
    for r, s in edge_sequence(nodes):
        if not g.has_edge(r, s):
            raise GraphError(f"cycle edge ({r},{s}) is not in the graph")
    return nodes


def rewrite_task_graph(task_graph: UndirectedGraph, comm_graph: UndirectedGraph, paths) -> UndirectedGraph:
    """Delete task edges missing from the communication graph and add the path edges replacing them.

    ``paths`` maps each mismatched task edge to its communication path.
    """
    mismatched = {e for e in task_graph.edges if e not in comm_graph.edges}
    given = {_canon(*e) for e in paths}
    if given != mismatched:
        missing = sorted(mismatched - given)
        extra = sorted(given - mismatched)
        raise GraphError(f"paths must cover exactly the mismatched edges (missing {missing}, extra {extra})")
    added = set()
    for (i, j), path in paths.items():
        path = validate_path(comm_graph, path)
        if {path[0], path[-1]} != {i, j}:
            raise GraphError(f"path {path} does not connect {i} and {j}")
        added.update(_canon(r, s) for r, s in edge_sequence(path))
    return task_graph.with_edges(add=added, remove=mismatched)


def enumerate_cycles(g: UndirectedGraph, max_len: int = 6) -> list:
    """Every simple cycle with at most ``max_len`` distinct nodes, reported once.

    Canonical orientation: the smallest node comes first and its successor is
    smaller than its predecessor on the cycle.
    """
    if max_len < 3:
        raise ValueError("max_len must be at least 3")
    out = []
    for start in g.nodes:
        stack = [(start, (start,))]
        while stack:
            u, path = stack.pop()
            for v in reversed(g.neighbors(u)):
                if v == start and len(path) >= 3 and path[1] < path[-1]:
                    out.append(path + (start,))
                elif v > start and v not in path and len(path) < max_len:
                    stack.append((v, path + (v,)))
    return sorted(out, key=lambda c: (len(c), c))
