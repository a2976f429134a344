"""Run configuration: YAML loading, validation and built-in presets.

Numbers may be written as plain decimals or as multiples of pi, e.g.
``pi``, ``2pi``, ``0.35pi``, ``-0.6*pi``, ``pi/2``, ``3pi/2``.
"""
from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from .engine import (Perturbation, SimulationParams, SineSumPerturbation, SineTerm,
                     sinusoid_perturbation)
from .prf import (TWO_PI, BuiltinPrfId, Piece, PhaseResponseFunction, PiSelection,
                  builtin_prf, piecewise_prf, validate_prf)
from .prf import SineTerm as PrfSineTerm
from .topology import (TREE10_PARENTS, NetworkTopology, TopologyError, TopologyKind,
                       build_topology)


class ConfigError(ValueError):
    def __init__(self, errors: Sequence[tuple[str, str]]):
        self.errors = list(errors)
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in self.errors))


_PI_RE = re.compile(
    r"^\s*(?P<coef>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*pi\s*(?:/\s*(?P<den>\d+\.?\d*))?\s*$"
)
_SIGN_PI_RE = re.compile(r"^\s*(?P<sign>[-+])\s*pi\s*(?:/\s*(?P<den>\d+\.?\d*))?\s*$")


def parse_number(value: Any) -> float:
    """Parse a decimal or a pi multiple; raises ``ValueError`` otherwise."""
    if isinstance(value, bool):
        raise ValueError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"expected a number, got {value!r}")
    text = value.strip()
    m = _SIGN_PI_RE.match(text)
    if m:
        coef = -1.0 if m["sign"] == "-" else 1.0
        den = float(m["den"]) if m["den"] else 1.0
        return coef * math.pi / den
    m = _PI_RE.match(text)
    if m:
        coef = float(m["coef"]) if m["coef"] else 1.0
        den = float(m["den"]) if m["den"] else 1.0
        if den == 0.0:
            raise ValueError(f"division by zero in {value!r}")
        return coef * math.pi / den
    return float(text)


@dataclass(frozen=True)
class RunConfig:
    name: str
    topology: NetworkTopology
    prfs: tuple[PhaseResponseFunction, ...]
    pi_selection: PiSelection
    omega: float = TWO_PI
    t_end: float = 50.0
    dense_dt: float | None = None
    event_tolerance: float = 1e-12
    initial_phases: tuple[float, ...] | None = None
    seed: int = 0
    perturbation: Perturbation | None = None
    batch_count: int = 1
    base_seed: int = 0
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.topology.n

    def params(self) -> SimulationParams:
        return SimulationParams(
            omega=self.omega,
            t_end=self.t_end,
            perturbation=self.perturbation,
            event_tolerance=self.event_tolerance,
            dense_dt=self.dense_dt,
        )

    def initial_state(self, seed: int | None = None) -> list[float]:
        """Explicit phases if given, else uniform on [0, 2pi] from ``seed``."""
        if self.initial_phases is not None and seed is None:
            return list(self.initial_phases)
        rng = np.random.default_rng(self.seed if seed is None else seed)
        return [float(v) for v in rng.uniform(0.0, TWO_PI, self.n)]

    def with_overrides(self, **changes: Any) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        sim = raw.setdefault("simulation", {})
        if changes.get("seed") is not None:
            raw.setdefault("initial", {})
            raw["initial"] = {"mode": "random", "seed": int(changes["seed"])}
        if changes.get("t_end") is not None:
            sim["t_end"] = changes["t_end"]
        if changes.get("dense") is not None:
            sim["record"] = {"dense": changes["dense"]}
        if changes.get("pi_selection") is not None:
            raw.setdefault("prf", {})["pi_selection"] = changes["pi_selection"]
        if changes.get("count") is not None:
            raw.setdefault("batch", {})["count"] = changes["count"]
        if changes.get("base_seed") is not None:
            raw.setdefault("batch", {})["base_seed"] = changes["base_seed"]
        if changes.get("perturbation_scale") is not None:
            pert = raw.get("perturbation") or {}
            if pert.get("kind") == "sinusoid":
                pert["amplitude"] = parse_number(pert["amplitude"]) * changes["perturbation_scale"]
        return parse_config(raw)


# ---------------------------------------------------------------------------
# parsing helpers; each appends (path, message) pairs to ``errors``

class _Errors(list):
    def add(self, path: str, msg: str) -> None:
        self.append((path, msg))


def _num(data: Any, path: str, errors: _Errors, default: float | None = None) -> float | None:
    if data is None:
        if default is None:
            errors.add(path, "missing value")
        return default
    try:
        value = parse_number(data)
    except ValueError as exc:
        errors.add(path, str(exc))
        return default
    if not math.isfinite(value):
        errors.add(path, "value must be finite")
        return default
    return value


def _num_list(data: Any, path: str, errors: _Errors) -> list[float] | None:
    if not isinstance(data, list):
        errors.add(path, "expected a list")
        return None
    out = []
    for k, item in enumerate(data):
        v = _num(item, f"{path}[{k}]", errors)
        if v is None:
            return None
        out.append(v)
    return out


def _parse_piece(data: Any, path: str, errors: _Errors) -> Piece | None:
    if not isinstance(data, dict):
        errors.add(path, "piece must be a mapping")
        return None
    lo = _num(data.get("from"), f"{path}.from", errors)
    hi = _num(data.get("to"), f"{path}.to", errors)
    poly = _num_list(data.get("poly", []), f"{path}.poly", errors) or []
    sines = []
    for k, term in enumerate(data.get("sin", []) or []):
        tpath = f"{path}.sin[{k}]"
        if not isinstance(term, dict):
            errors.add(tpath, "sine term must be a mapping")
            continue
        amp = _num(term.get("amp"), f"{tpath}.amp", errors)
        freq = _num(term.get("freq", 1.0), f"{tpath}.freq", errors)
        phase = _num(term.get("phase", 0.0), f"{tpath}.phase", errors)
        if None not in (amp, freq, phase):
            sines.append(PrfSineTerm(amp, freq, phase))
    if lo is None or hi is None:
        return None
    if not lo < hi:
        errors.add(path, f"empty interval [{lo}, {hi}]")
        return None
    return Piece(lo, hi, tuple(poly), tuple(sines))


def _parse_prf(data: Any, path: str, selection: PiSelection,
               errors: _Errors) -> PhaseResponseFunction | None:
    if isinstance(data, dict) and "builtin" in data:
        data = data["builtin"]
    if isinstance(data, str):
        try:
            return builtin_prf(BuiltinPrfId(data.strip().upper()), selection)
        except ValueError:
            errors.add(path, f"unknown built-in PRF {data!r} (use A, B, C or D)")
            return None
    if not isinstance(data, dict) or "delay" not in data or "advance" not in data:
        errors.add(path, "PRF must be a built-in id or a mapping with 'delay' and 'advance' pieces")
        return None
    before = len(errors)
    delay = [_parse_piece(p, f"{path}.delay[{k}]", errors) for k, p in enumerate(data["delay"] or [])]
    advance = [_parse_piece(p, f"{path}.advance[{k}]", errors)
               for k, p in enumerate(data["advance"] or [])]
    if len(errors) > before or not delay or not advance:
        if not delay or not advance:
            errors.add(path, "both branches need at least one piece")
        return None
    try:
        prf = piecewise_prf(delay, advance, selection, name=str(data.get("name", "custom")))
    except ValueError as exc:
        errors.add(path, str(exc))
        return None
    report = validate_prf(prf, 1000)
    for v in report[:5]:
        errors.add(path, f"{v.branch} branch at x={v.x:.6g}: {v.reason}")
    if len(report) > 5:
        errors.add(path, f"... {len(report) - 5} more PRF violations")
    return None if report else prf


def _parse_perturbation(data: Any, n: int, omega: float, errors: _Errors) -> Perturbation | None:
    if data is None:
        return None
    if not isinstance(data, dict):
        errors.add("perturbation", "expected a mapping")
        return None
    kind = data.get("kind", "none")
    if kind == "none":
        return None
    if kind == "sinusoid":
        amp = _num(data.get("amplitude"), "perturbation.amplitude", errors)
        if amp is None:
            return None
        pert: Perturbation = sinusoid_perturbation(amp, n)
    elif kind == "custom":
        nodes = data.get("nodes")
        if not isinstance(nodes, list) or len(nodes) != n:
            errors.add("perturbation.nodes", f"expected a list of {n} node entries")
            return None
        terms, offsets = [], []
        for k, node in enumerate(nodes):
            npath = f"perturbation.nodes[{k}]"
            node = node or {}
            offsets.append(_num(node.get("offset", 0.0), f"{npath}.offset", errors) or 0.0)
            node_terms = []
            for m, term in enumerate(node.get("terms", []) or []):
                tpath = f"{npath}.terms[{m}]"
                amp = _num(term.get("amp"), f"{tpath}.amp", errors)
                freq = _num(term.get("freq", 1.0), f"{tpath}.freq", errors)
                phase = _num(term.get("phase", 0.0), f"{tpath}.phase", errors)
                if None not in (amp, freq, phase):
                    node_terms.append(SineTerm(amp, freq, phase))
            terms.append(tuple(node_terms))
        pert = SineSumPerturbation(tuple(terms), tuple(offsets))
    else:
        errors.add("perturbation.kind", f"unknown kind {kind!r} (none, sinusoid, custom)")
        return None
    if not pert.max_bound() < omega:
        errors.add("perturbation", f"sup |p_i| = {pert.max_bound():.6g} must stay below omega = {omega:.6g}")
        return None
    return pert


def parse_config(data: Any) -> RunConfig:
    """Validate a config mapping; raises :class:`ConfigError` listing every problem."""
    errors = _Errors()
    if not isinstance(data, dict):
        raise ConfigError([("", "config must be a mapping")])
    raw = copy.deepcopy(data)

    topo_data = data.get("topology") or {}
    kind_text = topo_data.get("kind")
    try:
        kind = TopologyKind(kind_text)
    except ValueError:
        errors.add("topology.kind", f"unknown kind {kind_text!r}")
        kind = None
    n = topo_data.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        errors.add("topology.n", "must be a positive integer")
        n = None
    coupling = _num_list(topo_data.get("coupling"), "topology.coupling", errors)
    if coupling is not None and n is not None:
        if len(coupling) != n:
            errors.add("topology.coupling", f"expected {n} values, got {len(coupling)}")
        for k, c in enumerate(coupling):
            if not 0.0 < c < 1.0:
                errors.add(f"topology.coupling[{k}]", f"{c} outside the open interval (0, 1)")
    topo = None
    if kind is not None and n is not None and coupling is not None and not errors:
        try:
            topo = build_topology(kind, n, coupling, topo_data.get("parents"))
        except TopologyError as exc:
            errors.add("topology", str(exc))

    prf_data = data.get("prf") or {}
    sel_text = str(prf_data.get("pi_selection", "delay")).lower()
    try:
        selection = PiSelection(sel_text)
    except ValueError:
        errors.add("prf.pi_selection", f"must be 'delay' or 'advance', got {sel_text!r}")
        selection = PiSelection.DELAY
    nodes = prf_data.get("nodes")
    prfs: list[PhaseResponseFunction] = []
    if not isinstance(nodes, list):
        errors.add("prf.nodes", "expected a list with one PRF per node")
    else:
        if n is not None and len(nodes) != n:
            errors.add("prf.nodes", f"expected {n} PRFs, got {len(nodes)}")
        for k, item in enumerate(nodes):
            prf = _parse_prf(item, f"prf.nodes[{k}]", selection, errors)
            if prf is not None:
                prfs.append(prf)

    sim = data.get("simulation") or {}
    omega = _num(sim.get("omega", TWO_PI), "simulation.omega", errors, TWO_PI)
    if not omega > 0.0:
        errors.add("simulation.omega", "must be positive")
        omega = TWO_PI
    if "t_end" in sim:
        t_end = _num(sim["t_end"], "simulation.t_end", errors, 0.0)
    else:
        periods = _num(sim.get("periods", 50), "simulation.periods", errors, 50.0)
        t_end = periods * TWO_PI / omega
    if t_end < 0.0:
        errors.add("simulation.t_end", "must be nonnegative")
    tol = _num(sim.get("event_tolerance", 1e-12), "simulation.event_tolerance", errors, 1e-12)
    if not tol > 0.0:
        errors.add("simulation.event_tolerance", "must be positive")
    record = sim.get("record", "events")
    dense_dt = None
    if isinstance(record, dict) and "dense" in record:
        dense_dt = _num(record["dense"], "simulation.record.dense", errors)
        if dense_dt is not None and not dense_dt > 0.0:
            errors.add("simulation.record.dense", "sample interval must be positive")
    elif record != "events":
        errors.add("simulation.record", "use 'events' or {dense: <dt>}")

    init = data.get("initial") or {"mode": "random", "seed": 0}
    mode = init.get("mode", "random")
    phases, seed = None, 0
    if mode == "explicit":
        phases = _num_list(init.get("phases"), "initial.phases", errors)
        if phases is not None:
            if n is not None and len(phases) != n:
                errors.add("initial.phases", f"expected {n} phases, got {len(phases)}")
            for k, v in enumerate(phases):
                if not 0.0 <= v <= TWO_PI:
                    errors.add(f"initial.phases[{k}]", "phase outside [0, 2pi]")
    elif mode == "random":
        seed = init.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            errors.add("initial.seed", "must be a nonnegative integer")
            seed = 0
    else:
        errors.add("initial.mode", f"unknown mode {mode!r} (random or explicit)")

    pert = _parse_perturbation(data.get("perturbation"), n or 0, omega, errors) if n else None

    batch = data.get("batch") or {}
    count = batch.get("count", 1)
    base_seed = batch.get("base_seed", 0)
    if not isinstance(count, int) or isinstance(count, bool) or count < 1:
        errors.add("batch.count", "must be an integer >= 1")
        count = 1
    if not isinstance(base_seed, int) or isinstance(base_seed, bool) or base_seed < 0:
        errors.add("batch.base_seed", "must be a nonnegative integer")
        base_seed = 0

    if errors:
        raise ConfigError(errors)
    assert topo is not None
    return RunConfig(
        name=str(data.get("name", "run")),
        topology=topo,
        prfs=tuple(prfs),
        pi_selection=selection,
        omega=omega,
        t_end=t_end,
        dense_dt=dense_dt,
        event_tolerance=tol,
        initial_phases=None if phases is None else tuple(phases),
        seed=seed,
        perturbation=pert,
        batch_count=count,
        base_seed=base_seed,
        raw=raw,
    )


def load_config(path: str | Path) -> RunConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([("", f"YAML parse error: {exc}")]) from exc
    return parse_config(data)


# ---------------------------------------------------------------------------
# presets

_CHAIN6 = {
    "name": "chain6",
    "topology": {"kind": "undirected_chain", "n": 6,
                 "coupling": [0.4, 0.5, 0.6, 0.6, 0.5, 0.4]},
    "prf": {"nodes": ["A", "B", "C", "D", "A", "B"], "pi_selection": "delay"},
    "simulation": {"omega": "2pi", "periods": 200, "record": "events"},
    "initial": {"mode": "random", "seed": 42},
    "batch": {"count": 100, "base_seed": 0},
}

PRESETS: dict[str, dict] = {
    "chain6": _CHAIN6,
    "dchain6": {**copy.deepcopy(_CHAIN6), "name": "dchain6",
                "topology": {**_CHAIN6["topology"], "kind": "directed_chain"}},
    "chain6-perturbed": {**copy.deepcopy(_CHAIN6), "name": "chain6-perturbed",
                         "simulation": {"omega": "2pi", "periods": 50, "record": "events"},
                         "perturbation": {"kind": "sinusoid", "amplitude": 0.5}},
    "tree10": {
        "name": "tree10",
        "topology": {"kind": "directed_tree", "n": 10,
                     "coupling": [0.6, 0.5, 0.4, 0.6, 0.5, 0.4, 0.6, 0.5, 0.4, 0.6],
                     "parents": list(TREE10_PARENTS)},
        "prf": {"nodes": ["A", "B", "C", "D", "A", "B", "C", "D", "A", "B"],
                "pi_selection": "delay"},
        "simulation": {"omega": "2pi", "periods": 200, "record": "events"},
        "initial": {"mode": "random", "seed": 42},
        "batch": {"count": 100, "base_seed": 0},
    },
    "single": {
        "name": "single",
        "topology": {"kind": "directed_chain", "n": 1, "coupling": [0.5]},
        "prf": {"nodes": ["A"]},
        "simulation": {"omega": "2pi", "t_end": 10, "record": "events"},
        "initial": {"mode": "explicit", "phases": [0.0]},
    },
}


def preset_names() -> list[str]:
    return sorted(PRESETS)


def preset_config(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError([("preset", f"unknown preset {name!r}; available: {', '.join(preset_names())}")])
    return parse_config(copy.deepcopy(PRESETS[name]))


def preset_yaml(name: str) -> str:
    return yaml.safe_dump(PRESETS[name], sort_keys=False)
