"""One circular task split over two edges.

Agents 1 and 3 must keep their offset inside a disc of radius 3 but can
only talk through agent 2. The offset is the sum of two edge offsets, each
confined to a box. Maximising the box volumes splits the largest square that
fits in the disc evenly: each box gets side 3 / sqrt(2).
"""
import numpy as np

from stldecomp import AtomicTask, Ball, GlobalSpec, Operator, UndirectedGraph, decompose

spec = GlobalSpec.from_tasks([AtomicTask(Operator.ALWAYS, (0, 10), (1, 3), Ball([15, 15], 3))])
gc = UndirectedGraph(3, frozenset({(1, 2), (2, 3)}))
result = decompose(spec, gc)

print(f"status {result.status.value} after {result.solution.iterations} Newton steps")
for edge, center, size in result.parameter_table()[((1, 3), 0)]:
    print(f"edge {edge}: center {center.round(4)}, size {size.round(4)}")
print(f"closed form side length: {3 / np.sqrt(2):.4f}")
print(f"objective {result.solution.objective:.5f} (closed form {2 / 4.5:.5f})")

# The aggregate square touches the disc at its corners.
sizes = sum(s for _, _, s in result.parameter_table()[((1, 3), 0)])
print(f"aggregate half-diagonal {np.linalg.norm(sizes / 2):.5f} vs radius 3")
