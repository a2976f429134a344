"""Synchronization measures and trajectory-level property checks."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .engine import HybridState, Trajectory
from .prf import TWO_PI, PhaseResponseFunction, PiSelection
from .topology import NetworkTopology, chains_of

SYNC_THRESHOLD = 1e-6


class MetricsError(ValueError):
    pass


def _check_phase(v: float) -> None:
    if not 0.0 <= v <= TWO_PI:
        raise MetricsError(f"phase {v!r} outside [0, 2pi]")


def delta(xa: float, xb: float) -> float:
    """Length of the shorter arc between two phases."""
    _check_phase(xa)
    _check_phase(xb)
    d = abs(xa - xb)
    return min(d, TWO_PI - d)


def deltas(x: Sequence[float]) -> list[float]:
    """Arc lengths between chain-adjacent phases; the last entry wraps to x[0]."""
    n = len(x)
    return [delta(x[k], x[(k + 1) % n]) for k in range(n)]


def lyapunov_l(x: Sequence[float]) -> float:
    return math.fsum(deltas(x))


def containing_arc(x: Sequence[float]) -> float:
    """Length of the shortest arc of the circle holding every phase."""
    for v in x:
        _check_phase(v)
    pts = sorted(v % TWO_PI for v in x)
    if len(pts) < 2:
        return 0.0
    gaps = [b - a for a, b in zip(pts, pts[1:])]
    gaps.append(pts[0] + TWO_PI - pts[-1])
    return max(0.0, TWO_PI - max(gaps))


def sync_distance(x: Sequence[float]) -> float:
    """Euclidean distance to the set of synchronized states, on the circle.

    The nearest common phase is the mean of one of the ``n`` unwrappings of
    the sorted phases; every unwrapping is tried.
    """
    for v in x:
        _check_phase(v)
    pts = np.sort(np.mod(np.asarray(x, dtype=float), TWO_PI))
    n = len(pts)
    best = math.inf
    for k in range(n):
        unwrapped = np.concatenate([pts[k:], pts[:k] + TWO_PI])
        c = unwrapped.mean()
        d = np.abs(pts - c) % TWO_PI
        d = np.minimum(d, TWO_PI - d)
        best = min(best, float(np.sqrt(np.sum(d * d))))
    return best


@dataclass(frozen=True)
class SyncMetrics:
    deltas: tuple[float, ...]
    lyapunov_l: float
    containing_arc: float
    sync_distance: float


def sync_metrics(x: Sequence[float]) -> SyncMetrics:
    d = deltas(x)
    return SyncMetrics(tuple(d), math.fsum(d), containing_arc(x), sync_distance(x))


def chain_l(x: Sequence[float], chain: Sequence[int]) -> float:
    """L restricted to the nodes of ``chain`` (1-based ids, in chain order)."""
    return lyapunov_l([x[k - 1] for k in chain])


def l_trace(traj: Trajectory, chain: Sequence[int] | None = None) -> np.ndarray:
    if chain is None:
        return np.array([lyapunov_l(s.x) for s in traj.samples])
    return np.array([chain_l(s.x, chain) for s in traj.samples])


def sync_time(traj: Trajectory, chain: Sequence[int] | None = None,
              threshold: float = SYNC_THRESHOLD) -> float | None:
    """First time after which L stays below ``threshold`` for the rest of the run."""
    trace = l_trace(traj, chain)
    above = np.nonzero(trace >= threshold)[0]
    if len(above) == 0:
        return traj.samples[0].t
    last = above[-1]
    if last == len(trace) - 1:
        return None
    return traj.samples[last + 1].t


def is_synchronized(traj: Trajectory, topo: NetworkTopology,
                    threshold: float = SYNC_THRESHOLD) -> bool:
    return all(sync_time(traj, chain, threshold) is not None for chain in chains_of(topo))


# ---------------------------------------------------------------------------
# L monotonicity

@dataclass(frozen=True)
class LViolation:
    t: float
    j: int
    kind: str  # "flow" or "jump"
    change: float


@dataclass
class MonotoneReport:
    violations: list[LViolation] = field(default_factory=list)
    max_increase: float = 0.0
    jumps_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def check_l_monotone(traj: Trajectory, tol: float = 1e-9,
                     chain: Sequence[int] | None = None) -> MonotoneReport:
    """L must be constant within a flow interval and must not grow across jumps."""
    report = MonotoneReport()
    trace = l_trace(traj, chain)
    samples = traj.samples
    for k in range(1, len(samples)):
        prev, cur = samples[k - 1], samples[k]
        change = float(trace[k] - trace[k - 1])
        if cur.j == prev.j:
            if abs(change) > tol:
                report.violations.append(LViolation(cur.t, cur.j, "flow", change))
            report.max_increase = max(report.max_increase, abs(change))
        else:
            report.jumps_checked += 1
            report.max_increase = max(report.max_increase, change)
            if change > tol:
                report.violations.append(LViolation(cur.t, cur.j, "jump", change))
    return report


# ---------------------------------------------------------------------------
# four-case analysis of a single firing

class JumpCase(enum.IntEnum):
    TOWARD_WITHIN = 1    # moves toward far neighbour, delta <= gap
    TOWARD_PAST = 2      # moves toward far neighbour, delta > gap
    AWAY_WITHIN = 3      # moves away, gap + delta <= pi
    AWAY_WRAP = 4        # moves away, gap + delta > pi


@dataclass(frozen=True)
class CaseRecord:
    firer: int
    neighbor: int
    far_node: int
    case: JumpCase
    jump: float            # nonnegative jump magnitude of the neighbour
    near_before: float     # arc neighbour <-> firer
    near_after: float
    far_before: float      # arc neighbour <-> far node
    far_after: float
    ok: bool
    detail: str = ""

    @property
    def sum_change(self) -> float:
        return (self.near_after + self.far_after) - (self.near_before + self.far_before)


def _signed_offset(src: float, dst: float) -> float:
    """Signed shortest displacement from ``src`` to ``dst`` in ``[-pi, pi)``."""
    return (dst - src + math.pi) % TWO_PI - math.pi


def _selected_branch_is_delay(x: float, prf: PhaseResponseFunction) -> bool:
    if x < math.pi:
        return True
    if x > math.pi:
        return False
    return prf.pi_selection is PiSelection.DELAY


def check_jump_cases(pre: HybridState, post: HybridState, firer: int,
                     topo: NetworkTopology, prfs: Sequence[PhaseResponseFunction],
                     tol: float = 1e-9) -> list[CaseRecord]:
    """Classify the response of each chain neighbour of ``firer``.

    Left and right neighbours are handled in sequence (left first), each
    against the phases left by the previous stage, so that overlapping arcs
    on short chains are accounted for exactly once. For each neighbour the
    observed arcs are compared with the arcs predicted by its case, and the
    pair sum must be preserved (cases 1-3 with zero jump, case 3 always) or
    decrease (case 4 strictly).
    """
    if not topo.is_chain:
        raise MetricsError("jump-case analysis needs a chain topology")
    n = topo.n
    stage = list(pre.x)
    stage[firer - 1] = 0.0
    records: list[CaseRecord] = []
    receivers = topo.out_neighbors(firer)
    for nb, far in ((firer - 1, firer - 2), (firer + 1, firer + 2)):
        if nb not in receivers:
            continue
        far = (far - 1) % n + 1
        y, y_new = stage[nb - 1], post.x[nb - 1]
        z = stage[far - 1]
        jump = abs(y_new - y)
        moving_down = _selected_branch_is_delay(y, prfs[nb - 1])
        near_before = delta(y, 0.0)
        far_before = delta(y, z)
        s = _signed_offset(y, z)
        toward = ((s < 0.0) == moving_down and s != 0.0) or s == -math.pi
        if toward:
            case = JumpCase.TOWARD_WITHIN if jump <= far_before else JumpCase.TOWARD_PAST
        else:
            case = JumpCase.AWAY_WITHIN if far_before + jump <= math.pi else JumpCase.AWAY_WRAP
        stage[nb - 1] = y_new
        near_after = delta(y_new, 0.0)
        far_after = delta(y_new, stage[far - 1])

        expected_far = {
            JumpCase.TOWARD_WITHIN: far_before - jump,
            JumpCase.TOWARD_PAST: jump - far_before,
            JumpCase.AWAY_WITHIN: far_before + jump,
            JumpCase.AWAY_WRAP: TWO_PI - far_before - jump,
        }[case]
        problems = []
        if abs(near_after - (near_before - jump)) > tol:
            problems.append("near arc did not shrink by the jump")
        if abs(far_after - expected_far) > tol:
            problems.append(f"far arc {far_after:.12g} != predicted {expected_far:.12g}")
        change = (near_after + far_after) - (near_before + far_before)
        if change > tol:
            problems.append(f"arc sum increased by {change:.3g}")
        if case is JumpCase.AWAY_WITHIN and abs(change) > tol:
            problems.append("arc sum not preserved in case 3")
        if case is JumpCase.AWAY_WRAP and not change < 0.0:
            problems.append("arc sum not strictly decreased in case 4")
        # equality holds exactly when the far arc grows by the full jump
        grows_fully = abs(far_after - (far_before + jump)) <= tol
        if grows_fully != (abs(change) <= tol):
            problems.append("equality condition mismatch")
        records.append(CaseRecord(firer, nb, far, case, jump, near_before, near_after,
                                  far_before, far_after, not problems, "; ".join(problems)))
    # untouched nodes may differ only by the engine's snap to exactly 2pi
    mismatch = [k + 1 for k, (a, b) in enumerate(zip(stage, post.x)) if abs(a - b) > tol]
    if mismatch:
        raise MetricsError(f"post state changed nodes outside the firer's chain neighbours: {mismatch}")
    return records


def trajectory_jump_cases(traj: Trajectory, topo: NetworkTopology,
                          prfs: Sequence[PhaseResponseFunction],
                          tol: float = 1e-9) -> list[CaseRecord]:
    """Run :func:`check_jump_cases` on every recorded jump of ``traj``."""
    out: list[CaseRecord] = []
    fire_iter = iter(traj.firings)
    samples = traj.samples
    for k in range(1, len(samples)):
        if samples[k].j != samples[k - 1].j:
            firing = next(fire_iter)
            out.extend(check_jump_cases(samples[k - 1], samples[k], firing.node, topo, prfs, tol))
    return out


# ---------------------------------------------------------------------------
# (tau, eps)-closeness of hybrid arcs

@dataclass(frozen=True)
class CloseResult:
    close: bool
    epsilon: float                        # smallest eps that would make the arcs close
    witness: tuple[int, float, int] | None  # (which arc, t, j) of the worst point


def _by_jump(traj: Trajectory) -> dict[int, tuple[list[float], np.ndarray]]:
    groups: dict[int, list[HybridState]] = {}
    for s in traj.samples:
        groups.setdefault(s.j, []).append(s)
    return {j: ([s.t for s in ss], np.array([s.x for s in ss])) for j, ss in groups.items()}


def _one_way(a: Trajectory, b_groups, tau: float) -> tuple[float, tuple[float, int] | None]:
    worst, where = 0.0, None
    for s in a.samples:
        if s.t + s.j > tau:
            continue
        group = b_groups.get(s.j)
        if group is None:
            return math.inf, (s.t, s.j)
        ts, xs = group
        gap = np.maximum(np.abs(np.asarray(ts) - s.t),
                         np.linalg.norm(xs - np.asarray(s.x), axis=1))
        need = float(gap.min())
        if need > worst:
            worst, where = need, (s.t, s.j)
    return worst, where


def closeness_epsilon(traj1: Trajectory, traj2: Trajectory, tau: float) -> CloseResult:
    """Smallest eps for which the recorded samples of both arcs are (tau, eps)-close."""
    if not (traj1.is_dense and traj2.is_dense):
        raise MetricsError("closeness needs densely recorded trajectories")
    e1, w1 = _one_way(traj1, _by_jump(traj2), tau)
    e2, w2 = _one_way(traj2, _by_jump(traj1), tau)
    if e1 >= e2:
        witness = None if w1 is None else (1, *w1)
        return CloseResult(True, e1, witness)
    return CloseResult(True, e2, None if w2 is None else (2, *w2))


def tau_eps_close(traj1: Trajectory, traj2: Trajectory, tau: float, eps: float) -> CloseResult:
    res = closeness_epsilon(traj1, traj2, tau)
    return CloseResult(res.epsilon < eps, res.epsilon, None if res.epsilon < eps else res.witness)


# ---------------------------------------------------------------------------
# firing order

def firing_rounds(traj: Trajectory) -> list[list[int]]:
    """Split the firing log into rounds.

    A round closes once every node has fired in it, or early when a node
    fires a second time. The trailing, possibly truncated round is dropped.
    """
    n = traj.n
    rounds: list[list[int]] = []
    current: list[int] = []
    for f in traj.firings:
        if f.node in current:
            rounds.append(current)
            current = []
        current.append(f.node)
        if len(current) == n:
            rounds.append(current)
            current = []
    return rounds


def _same_cycle(a: list[int], b: list[int]) -> bool:
    if len(a) != len(b) or set(a) != set(b):
        return False
    if not a:
        return True
    k = b.index(a[0])
    return b[k:] + b[:k] == a


def firing_order_changes(traj: Trajectory) -> int:
    """Number of rounds whose cyclic firing order differs from the round before."""
    if traj.n < 2:
        raise MetricsError("firing order needs at least two oscillators")
    rounds = firing_rounds(traj)
    if len(rounds) < 2:
        raise MetricsError("need at least two complete firing rounds")
    return sum(not _same_cycle(a, b) for a, b in zip(rounds, rounds[1:]))


# ---------------------------------------------------------------------------
# liveness and stall diagnostics

def max_interfiring_interval(traj: Trajectory, node: int) -> float:
    """Longest wait between successive firings of ``node``, including the wait
    from t = 0 to its first firing and from its last firing to the end."""
    times = [0.0] + traj.firing_times(node) + [traj.final.t]
    return max(b - a for a, b in zip(times, times[1:]))


def jumps_at_same_time(traj: Trajectory) -> int:
    """Largest number of jumps sharing one continuous time instant."""
    best, run, last = 0, 0, None
    for f in traj.firings:
        run = run + 1 if f.t == last else 1
        last = f.t
        best = max(best, run)
    return best


def longest_l_plateau(traj: Trajectory, tol: float = 1e-9,
                      threshold: float = SYNC_THRESHOLD,
                      chain: Sequence[int] | None = None) -> float:
    """Longest stretch of continuous time over which L stays put at a nonzero value."""
    trace = l_trace(traj, chain)
    times = traj.times
    best, start = 0.0, 0
    for k in range(1, len(trace)):
        if abs(trace[k] - trace[start]) > tol:
            if trace[start] >= threshold:
                best = max(best, float(times[k] - times[start]))
            start = k
    if trace[start] >= threshold:
        best = max(best, float(times[-1] - times[start]))
    return best


def containing_arc_increases(traj: Trajectory, tol: float = 1e-9) -> int:
    """Count jumps across which the shortest containing arc grows."""
    count = 0
    samples = traj.samples
    for k in range(1, len(samples)):
        if samples[k].j != samples[k - 1].j:
            if containing_arc(samples[k].x) > containing_arc(samples[k - 1].x) + tol:
                count += 1
    return count
