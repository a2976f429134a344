"""Acceptance criteria, one test per criterion.

Each test prints a single ``CRITERION <k>: PASS|FAIL ...`` line. Run with
``pytest tests/test_acceptance.py -v`` or directly as a script.
"""
from __future__ import annotations

import filecmp
import itertools
import math
import sys
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import pytest

from pcosync import metrics as m
from pcosync.config import preset_config, preset_names
from pcosync.engine import (
    SimulationParams, Trajectory, apply_firing_order, simulate, sinusoid_perturbation,
)
from pcosync.prf import TWO_PI, BuiltinPrfId, PiSelection, builtin_prf
from pcosync.runner import run
from pcosync.sampling import random_phases, random_prf
from pcosync.topology import NetworkTopology, TopologyKind, build_topology, chains_of

pytestmark = pytest.mark.acceptance

PERIODS = 200
RANDOM_CHAIN_SEED = 20240601
SELECTIONS = (PiSelection.DELAY, PiSelection.ADVANCE)


# lines are echoed live and repeated in the terminal summary (see conftest.py)
RESULT_LINES: dict[int, str] = {}


def report(k: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULT_LINES[k] = line
    print(line)


@dataclass
class Case:
    group: str            # "chain6" or "random"
    index: int
    x0: list[float]
    topo: NetworkTopology
    prfs: tuple


@dataclass
class Run:
    case: Case
    selection: PiSelection
    traj: Trajectory
    prfs: tuple


@lru_cache(maxsize=None)
def criterion1_cases() -> tuple[Case, ...]:
    cases = []
    cfg = preset_config("chain6")
    for k in range(100):
        cases.append(Case("chain6", k, cfg.initial_state(k), cfg.topology, cfg.prfs))
    rng = np.random.default_rng(RANDOM_CHAIN_SEED)
    for k in range(100):
        n = int(rng.integers(2, 9))
        prfs = tuple(random_prf(rng) for _ in range(n))
        coupling = rng.uniform(0.0, 1.0, n)
        coupling = [float(np.clip(c, 1e-12, 1 - 1e-12)) for c in coupling]
        topo = build_topology(TopologyKind.UNDIRECTED_CHAIN, n, coupling)
        cases.append(Case("random", k, random_phases(rng, n), topo, prfs))
    return tuple(cases)


@lru_cache(maxsize=None)
def criterion1_runs() -> tuple[Run, ...]:
    runs = []
    for case in criterion1_cases():
        for sel in SELECTIONS:
            prfs = tuple(f.with_pi_selection(sel) for f in case.prfs)
            params = SimulationParams(t_end=PERIODS * 1.0)
            runs.append(Run(case, sel, simulate(case.x0, case.topo, prfs, params), prfs))
    return tuple(runs)


def test_criterion_1_l_monotone():
    runs = criterion1_runs()
    bad = []
    worst = 0.0
    for r in runs:
        rep = m.check_l_monotone(r.traj, 1e-9)
        worst = max(worst, rep.max_increase)
        if not rep.ok:
            bad.append((r.case.group, r.case.index, r.selection.value, len(rep.violations)))
    ok = not bad
    report(1, ok, f"{len(runs)} runs (100 chain6 + 100 random chains, both pi selections), "
                  f"runs with L violations: {len(bad)}, largest L change {worst:.2e}")
    assert ok, bad[:5]


def test_criterion_2_global_sync():
    counts = {}
    failures = []
    for r in criterion1_runs():
        key = (r.case.group, r.selection.value)
        synced = m.sync_time(r.traj) is not None
        counts[key] = counts.get(key, 0) + synced
        if not synced:
            failures.append((r.case.group, r.case.index, r.selection.value,
                             m.lyapunov_l(r.traj.final.x)))
    ok = all(v == 100 for v in counts.values())
    detail = ", ".join(f"{g}/{s}: {v}/100" for (g, s), v in sorted(counts.items()))
    if failures:
        worst = max(f[3] for f in failures)
        detail += f"; largest final L among failures {worst:.2e}"
    report(2, ok, f"L < 1e-6 sustained within {PERIODS} periods: {detail}")
    assert ok, failures[:5]


def test_criterion_3_directed_chain_and_tree():
    results = {}
    worst_time = {}
    for name in ("dchain6", "tree10"):
        cfg = preset_config(name).with_overrides(t_end=float(PERIODS))
        chains = chains_of(cfg.topology)
        good = 0
        for seed in range(100):
            traj = simulate(cfg.initial_state(seed), cfg.topology, cfg.prfs, cfg.params())
            times = [m.sync_time(traj, c) for c in chains]
            if all(t is not None for t in times):
                good += 1
                worst_time[name] = max(worst_time.get(name, 0.0), max(times))
        results[name] = good
    ok = all(v == 100 for v in results.values())
    report(3, ok, ", ".join(f"{k}: {v}/100 with every chain L < 1e-6 "
                            f"(latest sync {worst_time.get(k, math.nan):.1f} s)" for k, v in results.items()))
    assert ok


def test_criterion_4_case_classifier():
    total = 0
    by_case = {c: 0 for c in m.JumpCase}
    bad = []
    case4_not_strict = 0
    for r in criterion1_runs():
        for rec in m.trajectory_jump_cases(r.traj, r.case.topo, r.prfs, tol=1e-9):
            total += 1
            by_case[rec.case] += 1
            if rec.case is m.JumpCase.AWAY_WRAP and not rec.sum_change < 0.0:
                case4_not_strict += 1
            if not rec.ok:
                bad.append((r.case.group, r.case.index, rec.detail))
    ok = total >= 10_000 and not bad and case4_not_strict == 0
    counts = ", ".join(f"case {int(c)}: {v}" for c, v in by_case.items())
    report(4, ok, f"{total} neighbour responses classified ({counts}); "
                  f"mismatches {len(bad)}, non-strict case 4: {case4_not_strict}")
    assert ok, bad[:5]


def test_criterion_5_non_zeno():
    runs = criterion1_runs()
    too_many, early, outside = 0, 0, 0
    most = 0
    for r in runs:
        k = m.jumps_at_same_time(r.traj)
        most = max(most, k)
        too_many += k > r.traj.n
        early += r.traj.final.t != r.traj.t_end
        ph = r.traj.phases
        outside += bool(ph.min() < 0.0 or ph.max() > TWO_PI)
    ok = not (too_many or early or outside)
    report(5, ok, f"{len(runs)} runs: most jumps at one instant {most}, runs over N: {too_many}, "
                  f"ended early: {early}, phases outside [0, 2pi]: {outside}")
    assert ok


def test_criterion_6_liveness():
    worst = 0.0
    over = []
    for r in criterion1_runs():
        n = r.traj.n
        period = TWO_PI / r.traj.omega
        for node in sorted({2, n - 1}):
            gap = m.max_interfiring_interval(r.traj, node) / period
            worst = max(worst, gap)
            if gap > 3.0:
                over.append((r.case.group, r.case.index, node, gap))
    ok = not over
    report(6, ok, f"longest inter-firing interval of nodes 2 and N-1: {worst:.3f} periods (limit 3)")
    assert ok, over[:5]


def _order_independence_cases():
    prf_cycle = [builtin_prf(p) for p in BuiltinPrfId]
    grid = [TWO_PI * k / 20 for k in range(20)]
    coupling = [0.45, 0.7, 0.3, 0.85]
    for n in range(1, 5):
        for kind in (TopologyKind.UNDIRECTED_CHAIN, TopologyKind.DIRECTED_CHAIN):
            topo = build_topology(kind, n, coupling[:n])
            for sel in SELECTIONS:
                prfs = [prf_cycle[k % 4].with_pi_selection(sel) for k in range(n)]
                for size in range(1, min(3, n) + 1):
                    for firers in itertools.combinations(range(1, n + 1), size):
                        free = [k for k in range(1, n + 1) if k not in firers]
                        for values in itertools.product(grid, repeat=len(free)):
                            x = [TWO_PI] * n
                            for k, v in zip(free, values):
                                x[k - 1] = v
                            yield topo, prfs, tuple(x), firers


def test_criterion_7_order_independence():
    states, orders, worst = 0, 0, 0.0
    for topo, prfs, x, firers in _order_independence_cases():
        states += 1
        ref = np.array(apply_firing_order(x, firers, topo, prfs))
        for order in itertools.permutations(firers):
            orders += 1
            out = np.array(apply_firing_order(x, order, topo, prfs))
            worst = max(worst, float(np.abs(out - ref).max()))
    ok = worst <= 1e-12
    report(7, ok, f"{states} states, {orders} processing orders; largest post-jump difference {worst:.1e}")
    assert ok


def test_criterion_8_qualitative_phenomena():
    cfg = preset_config("chain6")
    order_runs, vc_runs = [], []
    for seed in range(20):
        traj = simulate(cfg.initial_state(seed), cfg.topology, cfg.prfs, cfg.params())
        if m.firing_order_changes(traj) > 0:
            order_runs.append(seed)
        if m.containing_arc_increases(traj) > 0:
            vc_runs.append(seed)
    ok = bool(order_runs) and bool(vc_runs)
    report(8, ok, f"of 20 chain6 runs, {len(order_runs)} change firing order and "
                  f"{len(vc_runs)} show a V_c increase across a jump")
    assert ok


def test_criterion_9_robustness():
    cfg = preset_config("chain6")
    x0 = cfg.initial_state(cfg.seed)
    t_end, tau, dense = 50.0, 30.0, 1e-3
    refs = [simulate(x0, cfg.topology, cfg.prfs,
                     SimulationParams(t_end=t_end, dense_dt=dense, pi_selection_override=s))
            for s in SELECTIONS]
    tails, eps = {}, {}
    for sigma in (1.0, 0.5, 0.1):
        params = SimulationParams(t_end=t_end, dense_dt=dense,
                                  perturbation=sinusoid_perturbation(0.5 * sigma, 6))
        traj = simulate(x0, cfg.topology, cfg.prfs, params)
        trace = m.l_trace(traj)
        tails[sigma] = float(trace[traj.times >= 0.8 * t_end].max())
        eps[sigma] = min(m.closeness_epsilon(traj, ref, tau).epsilon for ref in refs)
    bound_ok = all(v < 0.5 for v in tails.values())
    eps_seq = [eps[s] for s in (1.0, 0.5, 0.1)]
    monotone = all(a >= b for a, b in zip(eps_seq, eps_seq[1:]))
    ok = bound_ok and monotone
    detail = "; ".join(f"sigma={s:g}: max L over last 20% {tails[s]:.3f}, eps {eps[s]:.4f}" for s in tails)
    report(9, ok, f"{detail}; L bound {'met' if bound_ok else 'missed'}, "
                  f"eps {'nonincreasing' if monotone else 'not monotone'}")
    assert ok


def test_criterion_10_determinism(tmp_path):
    mismatched = []
    for name in preset_names():
        cfg = preset_config(name)
        seed = None if cfg.initial_phases is not None else 42
        run(cfg, tmp_path / name / "a", seed)
        run(cfg, tmp_path / name / "b", seed)
        for fname in ("trajectory.csv", "firings.csv", "summary.csv"):
            if not filecmp.cmp(tmp_path / name / "a" / fname, tmp_path / name / "b" / fname, shallow=False):
                mismatched.append(f"{name}/{fname}")
    ok = not mismatched
    report(10, ok, f"{len(preset_names())} presets run twice; differing artifacts: {mismatched or 'none'}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
