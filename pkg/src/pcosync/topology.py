"""Interaction graphs: undirected chain, directed chain and directed tree.

Nodes are numbered 1..n. An edge ``(i, j)`` means node ``j`` hears the
pulses of node ``i``; the receiving node scales its response by its own
coupling strength ``coupling[j - 1]``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence


class TopologyKind(enum.Enum):
    UNDIRECTED_CHAIN = "undirected_chain"
    DIRECTED_CHAIN = "directed_chain"
    DIRECTED_TREE = "directed_tree"


class TopologyError(ValueError):
    pass


class CouplingRangeError(TopologyError):
    pass


class TreeStructureError(TopologyError):
    pass


@dataclass(frozen=True)
class NetworkTopology:
    n: int
    kind: TopologyKind
    edges: frozenset[tuple[int, int]]
    coupling: tuple[float, ...]
    parent: tuple[int | None, ...] | None = None

    def __post_init__(self) -> None:
        # adjacency cache; the dataclass itself stays immutable
        out: list[list[int]] = [[] for _ in range(self.n + 1)]
        for i, j in sorted(self.edges):
            out[i].append(j)
        object.__setattr__(self, "_out", tuple(tuple(v) for v in out))

    def out_neighbors(self, i: int) -> tuple[int, ...]:
        if not 1 <= i <= self.n:
            raise TopologyError(f"node id {i} outside 1..{self.n}")
        return self._out[i]  # type: ignore[attr-defined]

    def weight(self, i: int, j: int) -> float:
        """Entry ``w_ij`` of the weighted adjacency matrix."""
        return self.coupling[j - 1] if (i, j) in self.edges else 0.0

    @property
    def is_chain(self) -> bool:
        return self.kind is not TopologyKind.DIRECTED_TREE


def out_neighbors(topo: NetworkTopology, i: int) -> list[int]:
    return list(topo.out_neighbors(i))


def _check_coupling(n: int, coupling: Sequence[float]) -> tuple[float, ...]:
    if len(coupling) != n:
        raise TopologyError(f"expected {n} coupling strengths, got {len(coupling)}")
    values = tuple(float(c) for c in coupling)
    for k, c in enumerate(values, start=1):
        if not 0.0 < c < 1.0:
            raise CouplingRangeError(f"coupling of node {k} is {c}, must lie in (0, 1)")
    return values


def build_topology(
    kind: TopologyKind | str,
    n: int,
    coupling: Sequence[float],
    parents: Sequence[int | None] | None = None,
) -> NetworkTopology:
    """Construct and validate a topology.

    For trees, ``parents[k]`` is the parent of node ``k + 1``; exactly one
    entry (the root) is ``None``.
    """
    kind = TopologyKind(kind)
    if n < 1:
        raise TopologyError("n must be >= 1")
    values = _check_coupling(n, coupling)

    if kind is TopologyKind.UNDIRECTED_CHAIN:
        edges = {(i, i + 1) for i in range(1, n)} | {(i + 1, i) for i in range(1, n)}
        return NetworkTopology(n, kind, frozenset(edges), values)
    if kind is TopologyKind.DIRECTED_CHAIN:
        edges = {(i, i + 1) for i in range(1, n)}
        return NetworkTopology(n, kind, frozenset(edges), values)

    if parents is None or len(parents) != n:
        raise TreeStructureError(f"tree needs a parent list of length {n}")
    parent = tuple(None if p is None else int(p) for p in parents)
    roots = [k for k, p in enumerate(parent, start=1) if p is None]
    if len(roots) != 1:
        raise TreeStructureError(f"tree needs exactly one root, found {len(roots)}")
    for k, p in enumerate(parent, start=1):
        if p is None:
            continue
        if not 1 <= p <= n:
            raise TreeStructureError(f"parent of node {k} is {p}, outside 1..{n}")
        if p == k:
            raise TreeStructureError(f"node {k} is its own parent")
    # every node must reach the root by walking parents, else there is a cycle
    for k in range(1, n + 1):
        seen = set()
        node: int | None = k
        while node is not None:
            if node in seen:
                raise TreeStructureError(f"cycle through node {node}")
            seen.add(node)
            node = parent[node - 1]
    edges = {(p, k) for k, p in enumerate(parent, start=1) if p is not None}
    return NetworkTopology(n, kind, frozenset(edges), values, parent)


def root_of(topo: NetworkTopology) -> int:
    if topo.parent is None:
        return 1
    return next(k for k, p in enumerate(topo.parent, start=1) if p is None)


def decompose_tree(topo: NetworkTopology) -> list[list[int]]:
    """Split a directed tree into its root-to-leaf chains, sorted by leaf id.

    A directed chain is accepted as the one-leaf tree.
    """
    if topo.kind is TopologyKind.DIRECTED_CHAIN:
        return [list(range(1, topo.n + 1))]
    if topo.kind is not TopologyKind.DIRECTED_TREE or topo.parent is None:
        raise TopologyError(f"cannot decompose a {topo.kind.value} into directed chains")
    chains = []
    for leaf in range(1, topo.n + 1):
        if topo.out_neighbors(leaf):
            continue
        path = [leaf]
        while (p := topo.parent[path[-1] - 1]) is not None:
            path.append(p)
        chains.append(path[::-1])
    return chains


def chains_of(topo: NetworkTopology) -> list[list[int]]:
    """Node orderings over which the synchronization measure is computed."""
    if topo.kind is TopologyKind.DIRECTED_TREE:
        return decompose_tree(topo)
    return [list(range(1, topo.n + 1))]


# ten-node example tree; chains 1-2-5, 1-2-4-8, 1-3-6-9, 1-2-4-7-10
TREE10_PARENTS: tuple[int | None, ...] = (None, 1, 1, 2, 2, 3, 4, 4, 6, 7)
