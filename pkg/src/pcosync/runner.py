"""Single runs and batch sweeps with CSV artifacts."""
from __future__ import annotations

import csv
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import metrics
from .config import RunConfig
from .engine import EngineError, Trajectory, simulate
from .topology import TopologyKind, chains_of

TRAJECTORY_FILE = "trajectory.csv"
FIRINGS_FILE = "firings.csv"
SUMMARY_FILE = "summary.csv"


def fmt(value: float) -> str:
    return format(value, ".17g")


def _open(path: Path):
    return path.open("w", newline="", encoding="utf-8")


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def trajectory_header(n: int, n_chains: int = 0) -> list[str]:
    head = ["t", "j"] + [f"x{k}" for k in range(1, n + 1)] + [f"d{k}" for k in range(1, n + 1)]
    head += ["L", "Vc"]
    head += [f"L_chain{k}" for k in range(1, n_chains + 1)]
    return head


def network_l(x: Sequence[float], chains: list[list[int]] | None) -> float:
    """L over node order for chains; sum of per-chain L for trees."""
    if chains is None:
        return metrics.lyapunov_l(x)
    return math.fsum(metrics.chain_l(x, c) for c in chains)


def write_trajectory(path: Path, traj: Trajectory, chains: list[list[int]] | None) -> None:
    n = traj.n
    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(trajectory_header(n, len(chains) if chains else 0))
        for s in traj.samples:
            d = metrics.deltas(s.x)
            row = [fmt(s.t), str(s.j)] + [fmt(v) for v in s.x] + [fmt(v) for v in d]
            row += [fmt(network_l(s.x, chains)), fmt(metrics.containing_arc(s.x))]
            if chains:
                row += [fmt(metrics.chain_l(s.x, c)) for c in chains]
            w.writerow(row)


def write_firings(path: Path, traj: Trajectory) -> None:
    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(["t", "j", "node"])
        for f in traj.firings:
            w.writerow([fmt(f.t), str(f.j), str(f.node)])


def read_trajectory(path: Path) -> tuple[list[str], list[list[float]]]:
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(v) for v in row] for row in rows[1:]]


def _opt(value: float | None) -> str:
    return "none" if value is None else fmt(value)


def summarize(config: RunConfig, traj: Trajectory, seed: int | None) -> dict[str, str]:
    """Key/value summary of one run; every value is a deterministic string."""
    topo = config.topology
    chains = chains_of(topo)
    tree = topo.kind is TopologyKind.DIRECTED_TREE
    sync_times = [metrics.sync_time(traj, c) for c in chains]
    if config.perturbation is None:
        violations = str(sum(len(metrics.check_l_monotone(traj, 1e-9, c).violations) for c in chains))
    else:
        violations = "n/a"  # L is only invariant along unperturbed flows
    try:
        order_changes = str(metrics.firing_order_changes(traj))
    except metrics.MetricsError:
        order_changes = "n/a"
    overall = None if any(s is None for s in sync_times) else max(sync_times)
    out = {
        "name": config.name,
        "n": str(topo.n),
        "topology": topo.kind.value,
        "seed": "explicit" if seed is None else str(seed),
        "pi_selection": config.pi_selection.value,
        "perturbed": str(config.perturbation is not None).lower(),
        "t_end": fmt(config.t_end),
        "jumps": str(len(traj.firings)),
        "final_L": fmt(network_l(traj.final.x, chains if tree else None)),
        "sync_time": _opt(overall),
        "synchronized": str(overall is not None).lower(),
        "l_monotone_violations": violations,
        "max_jumps_same_t": str(metrics.jumps_at_same_time(traj)),
        "firing_order_changes": order_changes,
    }
    if tree:
        for k, (chain, st) in enumerate(zip(chains, sync_times), start=1):
            out[f"chain{k}"] = "-".join(map(str, chain))
            out[f"final_L_chain{k}"] = fmt(metrics.chain_l(traj.final.x, chain))
            out[f"sync_time_chain{k}"] = _opt(st)
    return out


def write_summary(path: Path, summary: dict[str, str]) -> None:
    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(["key", "value"])
        for key, value in summary.items():
            w.writerow([key, value])


@dataclass
class RunResult:
    trajectory: Trajectory
    summary: dict[str, str]
    paths: dict[str, Path] = field(default_factory=dict)

    @property
    def invariants_ok(self) -> bool:
        return self.summary["l_monotone_violations"] in ("0", "n/a")


def run(config: RunConfig, out_dir: str | Path | None = None, seed: int | None = None) -> RunResult:
    """Simulate one configuration and, if ``out_dir`` is given, write the artifacts.

    ``seed`` selects uniform random initial phases; ``None`` uses the
    config's own initial condition.
    """
    if seed is None and config.initial_phases is None:
        seed = config.seed
    x0 = config.initial_state(seed)
    traj = simulate(x0, config.topology, config.prfs, config.params())
    summary = summarize(config, traj, seed)
    result = RunResult(traj, summary)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        chains = chains_of(config.topology) if config.topology.kind is TopologyKind.DIRECTED_TREE else None
        result.paths = {
            "trajectory": out / TRAJECTORY_FILE,
            "firings": out / FIRINGS_FILE,
            "summary": out / SUMMARY_FILE,
        }
        write_trajectory(result.paths["trajectory"], traj, chains)
        write_firings(result.paths["firings"], traj)
        write_summary(result.paths["summary"], summary)
    return result


# ---------------------------------------------------------------------------
# batch

@dataclass(frozen=True)
class BatchRow:
    seed: int
    synchronized: bool
    sync_time: float | None
    final_l: float
    violations: int
    order_changes: int | None
    jumps: int
    error: str = ""


@dataclass
class BatchReport:
    rows: list[BatchRow]

    @property
    def count(self) -> int:
        return len(self.rows)

    @property
    def success_rate(self) -> float:
        return sum(r.synchronized for r in self.rows) / len(self.rows)

    @property
    def violation_count(self) -> int:
        return sum(r.violations for r in self.rows)

    @property
    def errors(self) -> list[BatchRow]:
        return [r for r in self.rows if r.error]

    @property
    def order_change_incidence(self) -> float:
        known = [r for r in self.rows if r.order_changes is not None]
        return sum(r.order_changes > 0 for r in known) / len(known) if known else 0.0

    def sync_time_stats(self) -> tuple[float, float, float] | None:
        times = [r.sync_time for r in self.rows if r.sync_time is not None]
        if not times:
            return None
        return min(times), statistics.median(times), max(times)

    @property
    def passed(self) -> bool:
        return self.success_rate == 1.0 and self.violation_count == 0 and not self.errors

    def aggregate(self) -> dict[str, str]:
        stats = self.sync_time_stats()
        return {
            "runs": str(self.count),
            "success_rate": fmt(self.success_rate),
            "sync_time_min": _opt(stats and stats[0]),
            "sync_time_median": _opt(stats and stats[1]),
            "sync_time_max": _opt(stats and stats[2]),
            "l_monotone_violations": str(self.violation_count),
            "firing_order_change_incidence": fmt(self.order_change_incidence),
            "aborted_runs": str(len(self.errors)),
            "passed": str(self.passed).lower(),
        }


def _batch_one(config: RunConfig, seed: int) -> BatchRow:
    try:
        result = run(config, None, seed)
    except (EngineError, ValueError) as exc:
        return BatchRow(seed, False, None, math.nan, 0, None, 0, f"{type(exc).__name__}: {exc}")
    s = result.summary
    changes = None if s["firing_order_changes"] == "n/a" else int(s["firing_order_changes"])
    sync = None if s["sync_time"] == "none" else float(s["sync_time"])
    violations = 0 if s["l_monotone_violations"] == "n/a" else int(s["l_monotone_violations"])
    return BatchRow(seed, s["synchronized"] == "true", sync, float(s["final_L"]),
                    violations, changes, int(s["jumps"]))


def batch(config: RunConfig, out_dir: str | Path | None = None, workers: int = 1) -> BatchReport:
    """Run ``config.batch_count`` repetitions with seeds ``base_seed + k``."""
    seeds = [config.base_seed + k for k in range(config.batch_count)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_batch_one, [config] * len(seeds), seeds))
    else:
        rows = [_batch_one(config, s) for s in seeds]
    report = BatchReport(rows)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with _open(out / "batch_runs.csv") as fh:
            w = _writer(fh)
            w.writerow(["seed", "synchronized", "sync_time", "final_L", "l_monotone_violations",
                        "firing_order_changes", "jumps", "error"])
            for r in rows:
                w.writerow([r.seed, str(r.synchronized).lower(), _opt(r.sync_time), fmt(r.final_l),
                            r.violations, "n/a" if r.order_changes is None else r.order_changes,
                            r.jumps, r.error])
        write_summary(out / "batch_summary.csv", report.aggregate())
    return report
