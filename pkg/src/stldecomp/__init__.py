"""Decomposition of multi-agent signal temporal logic tasks over a communication graph."""

from .conflicts import (ConflictRecord, Conjunct, EdgeTaskBundle, audit, combination_tuples, detect_cycle_conflicts,
                        detect_edge_conflicts, regions_disjoint, resolution_constraints)
from .decompose import (DecomposeOptions, DecompositionResult, ParametricTask, assemble_problem, build_subtasks,
                        decompose, materialize)
from .errors import (ConflictError, DimensionError, GraphError, HorizonError, InfeasibleError, ScenarioError,
                     SynthesisError, UnboundedSetError, VertexBudgetError)
from .geometry import (HyperRect, box_in_box_margin, box_in_box_rows, inscribe_rect, minkowski_sum, negate,
                       superlevel_margin, vertices)
from .graphs import UndirectedGraph, enumerate_cycles, rewrite_task_graph, shortest_path
from .problem import BoxInBox, ConvexProblem, LowerBound, ParameterSet, RectExpr, VertexInclusion
from .scenario import Scenario, load_scenario, parse_scenario, render_scenario
from .solver import FeasibilityReport, Solution, SolverParams, Status, check_point, phase_one, solve
from .stl import (AtomicTask, Ball, GlobalSpec, Operator, Polytope, Rect, TaskFormula, Trajectory, eval_predicate,
                  robustness, spec_robustness)
from .synthesis import ImplicationReport, SynthesisOptions, synthesize_trajectory, verify_implication

__version__ = "0.1.0"

__all__ = [
    "AtomicTask",
    "Ball",
    "BoxInBox",
    "ConflictError",
    "ConflictRecord",
    "Conjunct",
    "ConvexProblem",
    "DecomposeOptions",
    "DecompositionResult",
    "DimensionError",
    "EdgeTaskBundle",
    "FeasibilityReport",
    "GlobalSpec",
    "GraphError",
    "HorizonError",
    "HyperRect",
    "ImplicationReport",
    "InfeasibleError",
    "LowerBound",
    "Operator",
    "ParameterSet",
    "ParametricTask",
    "Polytope",
    "Rect",
    "RectExpr",
    "Scenario",
    "ScenarioError",
    "Solution",
    "SolverParams",
    "Status",
    "SynthesisError",
    "SynthesisOptions",
    "TaskFormula",
    "Trajectory",
    "UnboundedSetError",
    "UndirectedGraph",
    "VertexBudgetError",
    "VertexInclusion",
    "assemble_problem",
    "audit",
    "box_in_box_margin",
    "box_in_box_rows",
    "build_subtasks",
    "check_point",
    "combination_tuples",
    "decompose",
    "detect_cycle_conflicts",
    "detect_edge_conflicts",
    "enumerate_cycles",
    "eval_predicate",
    "inscribe_rect",
    "load_scenario",
    "materialize",
    "minkowski_sum",
    "negate",
    "parse_scenario",
    "phase_one",
    "regions_disjoint",
    "render_scenario",
    "resolution_constraints",
    "rewrite_task_graph",
    "robustness",
    "shortest_path",
    "solve",
    "spec_robustness",
    "superlevel_margin",
    "synthesize_trajectory",
    "verify_implication",
    "vertices",
]
