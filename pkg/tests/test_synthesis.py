import numpy as np
import pytest

from stldecomp.decompose import decompose
from stldecomp.errors import HorizonError, SynthesisError
from stldecomp.geometry import HyperRect
from stldecomp.graphs import UndirectedGraph, edge_sequence
from stldecomp.stl import AtomicTask, Ball, GlobalSpec, Operator, Rect, Trajectory, relative_signal
from stldecomp.synthesis import (SynthesisOptions, keyframe_times, synthesize_trajectory, trajectory_from_csv,
                                 trajectory_to_csv, verify_implication)

G, F = Operator.ALWAYS, Operator.EVENTUALLY


def test_two_agent_rect_placement():
    spec = GlobalSpec.from_tasks([AtomicTask(G, (0, 1), (1, 2), Rect(HyperRect([1, 0], [1, 1])))])
    traj = synthesize_trajectory(spec, n_agents=2)
    assert np.all(traj.state(1) == 0)
    assert np.allclose(traj.state(2), [1, 0])
    rep = verify_implication(traj, spec, spec)
    assert rep.rho_rewritten == pytest.approx(0.5)
    assert rep.verdict == "holds"


def test_empty_spec_is_constant_at_origin():
    traj = synthesize_trajectory(GlobalSpec(), n_agents=3, dim=2)
    assert traj.times.tolist() == [0.0, 0.1]
    assert all(np.all(traj.state(a) == 0) for a in (1, 2, 3))


def test_formation_trajectory_holds(formation, formation_result):
    traj = synthesize_trajectory(formation_result, formation.spec())
    assert traj.times[-1] == pytest.approx(28)
    rep = verify_implication(traj, formation_result.spec, formation.spec())
    assert rep.verdict == "holds"
    assert rep.rho_rewritten > 0 and rep.rho_original > 0
    # every cycle of the rewritten graph closes exactly at every sample
    from stldecomp.graphs import enumerate_cycles
    for cyc in enumerate_cycles(formation_result.graph):
        total = sum(relative_signal(traj, r, s) for r, s in edge_sequence(cyc))
        assert np.max(np.abs(total)) <= 1e-12


def test_perturbed_agent_makes_verdict_vacuous(formation, formation_result):
    traj = synthesize_trajectory(formation_result, formation.spec())
    states = {a: v.copy() for a, v in traj.states.items()}
    states[7] += 100.0
    bad = Trajectory(traj.times, states)
    rep = verify_implication(bad, formation_result.spec, formation.spec())
    assert rep.verdict == "vacuous"
    assert any("@6.7" in name for name in rep.failing("rewritten"))


def test_identity_rewrite_gives_equal_robustness():
    spec = GlobalSpec.from_tasks([
        AtomicTask(G, (0, 4), (1, 2), Ball([2, 0], 1)),
        AtomicTask(F, (2, 6), (2, 3), Rect(HyperRect([0, 3], [2, 2]))),
    ])
    gc = UndirectedGraph(3, frozenset({(1, 2), (2, 3)}))
    res = decompose(spec, gc)
    traj = synthesize_trajectory(res, spec)
    rep = verify_implication(traj, res.spec, spec)
    assert rep.rho_rewritten == rep.rho_original > 0


def test_absolute_task_moves_anchor():
    spec = GlobalSpec.from_tasks([AtomicTask(G, (1, 2), (1,), Ball([5, 5], 1))])
    traj = synthesize_trajectory(spec, n_agents=2)
    k = np.searchsorted(traj.times, 1.5)
    assert np.allclose(traj.state(1)[k], [5, 5])


def test_keyframes_include_instants():
    spec = GlobalSpec.from_tasks([AtomicTask(F, (2, 6), (1, 2), Ball([0, 0], 1))])
    assert keyframe_times(spec) == [0.0, 2.0, 4.0, 6.0]
    assert keyframe_times(spec, "start") == [0.0, 2.0, 6.0]


def test_velocity_bound_and_horizon():
    spec = GlobalSpec.from_tasks([AtomicTask(G, (1, 2), (1, 2), Ball([50, 0], 1))])
    with pytest.raises(SynthesisError):
        synthesize_trajectory(spec, opts=SynthesisOptions(vmax=1.0), n_agents=2)
    traj = synthesize_trajectory(spec, n_agents=2)
    short = Trajectory(traj.times[:5], {a: v[:5] for a, v in traj.states.items()})
    with pytest.raises(HorizonError):
        verify_implication(short, spec, spec)


def test_conflicting_placement_is_reported():
    spec = GlobalSpec.from_tasks([
        AtomicTask(G, (0, 2), (1, 2), Ball([0, 0], 1)),
        AtomicTask(G, (0, 2), (1, 2), Ball([10, 0], 1)),
    ])
    with pytest.raises(SynthesisError, match="t=0"):
        synthesize_trajectory(spec, n_agents=2)


def test_csv_round_trip(formation, formation_result):
    traj = synthesize_trajectory(formation_result, formation.spec(), SynthesisOptions(dt=0.5))
    text = trajectory_to_csv(traj)
    assert text.splitlines()[0].startswith("t,x1_1,x1_2,x2_1")
    back = trajectory_from_csv(text)
    assert np.array_equal(back.times, traj.times)
    assert all(np.array_equal(back.state(a), traj.state(a)) for a in traj.agents)
    with pytest.raises(ValueError):
        trajectory_from_csv("time,x1_1\n0,0\n")
    with pytest.raises(ValueError):
        trajectory_from_csv("t,x1_1\n0,abc\n")


def test_eventually_instant_avoids_conflicting_always_window():
    # the midpoint of F[0, 10] falls inside G[3, 10], whose region is disjoint from the F region
    spec = GlobalSpec.from_tasks([
        AtomicTask(F, (0, 10), (1, 2), Ball([0, 0], 1)),
        AtomicTask(G, (3, 10), (1, 2), Ball([5, 0], 1)),
    ])
    traj = synthesize_trajectory(spec, n_agents=2)
    rep = verify_implication(traj, spec, spec)
    assert rep.verdict == "holds"
    assert rep.rho_original == pytest.approx(1.0)


def test_trajectory_covers_original_horizon(formation, formation_result):
    traj = synthesize_trajectory(formation_result, formation.spec())
    assert traj.times[-1] >= formation.spec().horizon
