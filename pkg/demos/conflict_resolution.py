"""Why conflict constraints are needed.

Agents 1 and 2 already share a task: their offset stays near [-5, 0]. A new
task asks the offset from 1 to 3 to sit near [12, 0], routed through agent 2.
Left alone, the optimiser spreads that offset evenly over both edges and
the new (1, 2) box no longer meets the old region, so the two tasks cannot
hold together. The conflict constraints keep the new box inside the old
region instead.
"""
from stldecomp import (AtomicTask, Ball, GlobalSpec, Operator, UndirectedGraph, assemble_problem, audit,
                       solve)
from stldecomp.decompose import plan_paths

G = Operator.ALWAYS
spec = GlobalSpec.from_tasks([
    AtomicTask(G, (0, 10), (1, 2), Ball([-5, 0], 1)),
    AtomicTask(G, (2, 8), (1, 3), Ball([12, 0], 5)),
])
gc = UndirectedGraph(3, frozenset({(1, 2), (2, 3)}))
paths = plan_paths(spec, gc)

for with_conflicts in (False, True):
    asm = assemble_problem(spec, gc, paths, conflicts=with_conflicts)
    sol = solve(asm.problem.compile())
    values = asm.problem.params.unpack(sol.x)
    print(f"conflict constraints {'on' if with_conflicts else 'off'}: status {sol.status.value}, "
          f"objective {sol.objective:.4f}")
    for c in asm.problem.constraints:
        if c.group.startswith("type"):
            print(f"  constraint: {c.label}")
    for key, (center, size) in values.items():
        print(f"  box on edge {key[2]}: center {center.round(3)}, size {size.round(3)}")
    found = audit(asm.bundles, asm.cycles, sol.x)
    print("  audit: " + ("; ".join(map(str, found)) if found else "no conflicts") + "\n")
