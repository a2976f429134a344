import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcosync import metrics as m
from pcosync.engine import Firing, HybridState, SimulationParams, Trajectory, fire, simulate
from pcosync.prf import TWO_PI, BuiltinPrfId, builtin_prf
from pcosync.topology import TopologyKind, build_topology

PI = math.pi
A, B, C, D = (builtin_prf(p) for p in BuiltinPrfId)
PRFS6 = [A, B, C, D, A, B]
L6 = [0.4, 0.5, 0.6, 0.6, 0.5, 0.4]
phases = st.lists(st.floats(0.0, TWO_PI), min_size=1, max_size=8)


def chain6():
    return build_topology(TopologyKind.UNDIRECTED_CHAIN, 6, L6)


def test_delta_examples():
    assert m.delta(0.0, TWO_PI) == 0.0
    assert m.delta(PI / 2, 1.5 * PI) == pytest.approx(PI)
    assert m.delta(0.5, TWO_PI - 0.5) == pytest.approx(1.0)
    with pytest.raises(m.MetricsError):
        m.delta(-0.1, 1.0)


def test_l_examples():
    assert m.lyapunov_l([1.3] * 5) == 0.0
    assert m.lyapunov_l([0.0, PI]) == pytest.approx(TWO_PI)
    assert m.lyapunov_l([0.0, PI / 2, PI, 1.5 * PI]) == pytest.approx(TWO_PI)
    assert m.lyapunov_l([2.0]) == 0.0


def test_containing_arc_examples():
    assert m.containing_arc([2.0, 2.0, 2.0]) == 0.0
    assert m.containing_arc([0.0, PI / 2, PI]) == pytest.approx(PI)
    assert m.containing_arc([0.0, PI / 2, PI, 1.5 * PI]) == pytest.approx(1.5 * PI)
    assert m.containing_arc([0.1, TWO_PI - 0.1]) == pytest.approx(0.2)
    assert m.containing_arc([0.0, TWO_PI]) == 0.0


def _brute_sync_distance(x, grid=20000):
    x = np.asarray(x)
    c = np.linspace(0.0, TWO_PI, grid, endpoint=False)[:, None]
    d = np.abs(x[None, :] - c) % TWO_PI
    d = np.minimum(d, TWO_PI - d)
    return float(np.sqrt((d * d).sum(axis=1)).min())


@settings(max_examples=200, deadline=None)
@given(x=phases)
def test_sync_distance_matches_brute_force(x):
    assert m.sync_distance(x) == pytest.approx(_brute_sync_distance(x), abs=2e-3 * math.sqrt(len(x)))
    assert m.sync_distance(x) <= _brute_sync_distance(x) + 1e-9


@settings(max_examples=200, deadline=None)
@given(x=phases)
def test_measure_ranges(x):
    d = m.deltas(x)
    assert all(0.0 <= v <= PI for v in d)
    assert 0.0 <= m.lyapunov_l(x) <= len(x) * PI + 1e-12
    assert 0.0 <= m.containing_arc(x) < TWO_PI
    # the chain measure dominates the containing arc
    assert m.containing_arc(x) <= m.lyapunov_l(x) + 1e-9


# -- L monotonicity harness ----------------------------------------------------

def test_monotone_on_chain6_run():
    rng = np.random.default_rng(7)
    traj = simulate(rng.uniform(0, TWO_PI, 6), chain6(), PRFS6, SimulationParams(t_end=30.0))
    report = m.check_l_monotone(traj, 1e-9)
    assert report.ok and report.jumps_checked == len(traj.firings)


def test_monotone_harness_flags_inserted_increase():
    samples = (
        HybridState(0.0, 0, (1.0, 1.5)),
        HybridState(0.5, 0, (4.14159, 4.64159)),
        HybridState(0.5, 1, (0.0, 2.0)),      # L grows from 1.0 to 4.0 across this jump
        HybridState(0.6, 1, (0.6, 2.6)),
    )
    traj = Trajectory(samples, (Firing(0.5, 0, 1),), TWO_PI, 0.6)
    report = m.check_l_monotone(traj, 1e-9)
    assert len(report.violations) == 1
    v = report.violations[0]
    assert v.kind == "jump" and v.j == 1 and v.change == pytest.approx(3.0)


def test_monotone_harness_flags_flow_drift():
    samples = (HybridState(0.0, 0, (1.0, 1.5)), HybridState(0.1, 0, (1.1, 1.7)))
    traj = Trajectory(samples, (), TWO_PI, 0.1)
    assert [v.kind for v in m.check_l_monotone(traj).violations] == ["flow"]


def test_monotone_single_oscillator():
    topo = build_topology(TopologyKind.DIRECTED_CHAIN, 1, [0.5])
    traj = simulate([0.2], topo, [A], SimulationParams(t_end=5.0))
    assert m.check_l_monotone(traj).ok
    assert np.all(m.l_trace(traj) == 0.0)


# -- jump cases ------------------------------------------------------------------

def _case(y, z):
    """Node 1 fires onto node 2 (phase y); node 3 (phase z) is the far neighbour."""
    topo = build_topology(TopologyKind.UNDIRECTED_CHAIN, 3, [0.5, 0.5, 0.5])
    pre = HybridState(0.0, 0, (TWO_PI, y, z))
    post = fire(pre, 1, topo, [A, A, A])
    (rec,) = m.check_jump_cases(pre, post, 1, topo, [A, A, A])
    return rec


@pytest.mark.parametrize("z, case", [(0.5, 1), (0.9, 2), (2.0, 3), (4.0, 4)])
def test_case_examples(z, case):
    rec = _case(1.0, z)
    assert rec.ok, rec.detail
    assert rec.case == case
    assert rec.jump == pytest.approx(0.3)
    if case == 3:
        assert rec.sum_change == pytest.approx(0.0, abs=1e-12)
    if case == 4:
        assert rec.sum_change < 0.0


def test_case_zero_jump():
    rec = _case(0.0, 2.0)
    assert rec.ok and rec.jump == 0.0 and rec.sum_change == 0.0


def test_case_records_for_chain6_run():
    rng = np.random.default_rng(3)
    traj = simulate(rng.uniform(0, TWO_PI, 6), chain6(), PRFS6, SimulationParams(t_end=20.0))
    recs = m.trajectory_jump_cases(traj, chain6(), PRFS6)
    assert recs and all(r.ok for r in recs)
    assert {r.firer for r in recs} == set(range(1, 7))


def test_case_analysis_needs_chain():
    tree = build_topology(TopologyKind.DIRECTED_TREE, 3, [0.5] * 3, [None, 1, 1])
    s = HybridState(0.0, 0, (TWO_PI, 1.0, 1.0))
    with pytest.raises(m.MetricsError):
        m.check_jump_cases(s, fire(s, 1, tree, [A] * 3), 1, tree, [A] * 3)


# -- closeness ---------------------------------------------------------------------

def _dense_run(pert=None, t_end=10.0):
    from pcosync.engine import constant_perturbation
    params = SimulationParams(t_end=t_end, dense_dt=0.01, perturbation=pert)
    return simulate([0.3, 2.0, 4.1, 5.0, 1.2, 3.3], chain6(), PRFS6, params)


def test_closeness_reflexive():
    traj = _dense_run()
    res = m.tau_eps_close(traj, traj, 12.0, 1e-12)
    assert res.close and res.epsilon == 0.0


def test_closeness_zero_perturbation():
    from pcosync.engine import constant_perturbation
    a = _dense_run()
    b = _dense_run(constant_perturbation([0.0] * 6))
    assert m.tau_eps_close(a, b, 50.0, 1e-6).close


def test_closeness_small_perturbation_is_close():
    from pcosync.engine import sinusoid_perturbation
    a = _dense_run()
    b = _dense_run(sinusoid_perturbation(0.01, 6))
    res = m.closeness_epsilon(a, b, 10.0)
    assert res.epsilon < 0.05
    assert not m.tau_eps_close(a, b, 10.0, res.epsilon / 2).close


def test_closeness_needs_dense():
    traj = simulate([1.0, 2.0], build_topology(TopologyKind.DIRECTED_CHAIN, 2, [0.5, 0.5]),
                    [A, A], SimulationParams(t_end=2.0))
    with pytest.raises(m.MetricsError):
        m.closeness_epsilon(traj, traj, 1.0)


# -- firing order ------------------------------------------------------------------

def _log(nodes, n):
    samples = (HybridState(0.0, 0, (0.0,) * n),)
    firings = tuple(Firing(float(k), k, v) for k, v in enumerate(nodes))
    return Trajectory(samples, firings, TWO_PI, float(len(nodes)))


def test_firing_rounds_and_changes():
    assert m.firing_rounds(_log([1, 2, 3, 2, 3, 1, 1, 3, 2], 3)) == [[1, 2, 3], [2, 3, 1], [1, 3, 2]]
    assert m.firing_order_changes(_log([1, 2, 3, 2, 3, 1, 1, 3, 2], 3)) == 1
    assert m.firing_order_changes(_log([1, 2, 1, 2, 1, 2], 2)) == 0


def test_firing_order_synchronized_start():
    traj = simulate([1.0] * 6, chain6(), PRFS6, SimulationParams(t_end=5.0))
    assert m.firing_order_changes(traj) == 0


def test_firing_order_usage_errors():
    topo = build_topology(TopologyKind.DIRECTED_CHAIN, 1, [0.5])
    traj = simulate([0.0], topo, [A], SimulationParams(t_end=5.0))
    with pytest.raises(m.MetricsError):
        m.firing_order_changes(traj)
    with pytest.raises(m.MetricsError):
        m.firing_order_changes(_log([1, 2], 2))


# -- liveness helpers --------------------------------------------------------------

def test_liveness_helpers():
    traj = _log([1, 1, 2, 2, 2], 2)
    assert m.jumps_at_same_time(traj) == 1
    same_t = Trajectory(traj.samples, (Firing(1.0, 0, 1), Firing(1.0, 1, 2), Firing(2.0, 2, 1)),
                        TWO_PI, 3.0)
    assert m.jumps_at_same_time(same_t) == 2
    assert m.max_interfiring_interval(same_t, 2) == pytest.approx(1.0)
    assert m.max_interfiring_interval(same_t, 1) == pytest.approx(1.0)


def test_sync_time_semantics():
    samples = tuple(HybridState(float(t), 0, x) for t, x in
                    enumerate([(0.0, 1.0), (0.0, 0.0), (0.0, 0.5), (0.0, 0.0), (0.0, 0.0)]))
    traj = Trajectory(samples, (), TWO_PI, 4.0)
    assert m.sync_time(traj) == 3.0
    never = Trajectory(samples[:3], (), TWO_PI, 2.0)
    assert m.sync_time(never) is None
