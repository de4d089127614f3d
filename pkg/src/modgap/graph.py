"""Simple undirected graphs, partitions and exact modularity.

Modularity values are exact :class:`fractions.Fraction` objects.  Internally
everything is expressed as an integer numerator over ``4 m^2 q`` where the
resolution parameter is ``gamma = p / q``; see :func:`weight_matrix`.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Sequence, TextIO

import numpy as np

logger = logging.getLogger(__name__)


class GraphError(ValueError):
    """Raised for malformed graph input or invalid graph/partition pairs."""


class EdgeListParseError(GraphError):
    def __init__(self, lineno: int, line: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {line!r}")
        self.lineno = lineno


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        # go through repr so 0.5 and "0.5" agree, and 0.1 is 1/10 not a binary float
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class ModularityParams:
    """Resolution parameter for the null-model term; ``gamma = 1`` is standard modularity."""

    gamma: Fraction = Fraction(1)

    def __post_init__(self):
        g = _as_fraction(self.gamma)
        if g <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "gamma", g)


@dataclass(frozen=True)
class Graph:
    """Immutable simple graph on nodes ``0..n-1``.

    ``labels[i]`` is the original token of node ``i`` when the graph came from
    a file; otherwise it is ``str(i)``.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    labels: tuple[str, ...] = ()
    dropped_self_loops: int = 0
    dropped_duplicates: int = 0
    _adj: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("a graph needs at least one node")
        norm = set()
        for u, v in self.edges:
            if u == v:
                raise GraphError(f"self-loop on node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u}, {v}) out of range for n={self.n}")
            e = (u, v) if u < v else (v, u)
            if e in norm:
                raise GraphError(f"duplicate edge {e}")
            norm.add(e)
        object.__setattr__(self, "edges", tuple(sorted(norm)))
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(self.n)))
        elif len(self.labels) != self.n:
            raise GraphError("labels must have one entry per node")
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        """Build a graph, silently dropping self-loops and repeated edges."""
        seen = set()
        loops = dups = 0
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                loops += 1
                continue
            e = (min(u, v), max(u, v))
            if e in seen:
                dups += 1
                continue
            seen.add(e)
        return cls(n, tuple(seen), dropped_self_loops=loops, dropped_duplicates=dups)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def degree(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self._adj)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._adj[i]

    def has_edge(self, i: int, j: int) -> bool:
        a, b = (i, j) if len(self._adj[i]) <= len(self._adj[j]) else (j, i)
        return b in self._adj[a]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int64)
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1
        return a

    def subgraph(self, nodes: Sequence[int]) -> tuple["Graph", dict[int, int]]:
        """Induced subgraph on ``nodes`` (kept in the given order), plus old->new ids."""
        mapping = {old: new for new, old in enumerate(nodes)}
        edges = [(mapping[u], mapping[v]) for u, v in self.edges if u in mapping and v in mapping]
        labels = tuple(self.labels[old] for old in nodes)
        return Graph(len(nodes), tuple(edges), labels), mapping


@dataclass(frozen=True, order=True)
class Partition:
    """Complete, non-overlapping assignment of nodes to community labels."""

    assignment: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(int(c) for c in self.assignment))

    @classmethod
    def from_communities(cls, communities: Iterable[Iterable[int]], n: int | None = None) -> "Partition":
        groups = [list(c) for c in communities]
        size = n if n is not None else sum(len(c) for c in groups)
        labels = [-1] * size
        for k, members in enumerate(groups):
            for v in members:
                if not 0 <= v < size:
                    raise GraphError(f"node {v} out of range for n={size}")
                if labels[v] != -1:
                    raise GraphError(f"node {v} assigned twice")
                labels[v] = k
        if -1 in labels:
            raise GraphError(f"node {labels.index(-1)} has no community")
        return canonicalize(cls(tuple(labels)))

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(tuple(range(n)))

    @classmethod
    def whole(cls, n: int) -> "Partition":
        return cls((0,) * n)

    @property
    def n(self) -> int:
        return len(self.assignment)

    @property
    def k(self) -> int:
        return len(set(self.assignment))

    def same_community(self, i: int, j: int) -> bool:
        return self.assignment[i] == self.assignment[j]

    def communities(self) -> list[list[int]]:
        """Member lists, in order of first occurrence."""
        groups: dict[int, list[int]] = {}
        for v, c in enumerate(self.assignment):
            groups.setdefault(c, []).append(v)
        return list(groups.values())

    def __len__(self) -> int:
        return len(self.assignment)


def canonicalize(x: Partition) -> Partition:
    """Relabel communities ``0..k-1`` in order of first occurrence."""
    relabel: dict[int, int] = {}
    out = []
    for c in x.assignment:
        if c not in relabel:
            relabel[c] = len(relabel)
        out.append(relabel[c])
    return Partition(tuple(out))


def load_edge_list(text: str | TextIO) -> Graph:
    """Parse a whitespace-separated edge list.

    Node tokens are arbitrary strings, relabelled ``0..n-1`` in order of first
    appearance.  Self-loops and repeated edges are dropped (and counted on the
    returned graph); a warning is logged when that happens.
    """
    if not isinstance(text, str):
        text = text.read()
    ids: dict[str, int] = {}
    raw: list[tuple[int, int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        if len(tokens) != 2:
            raise EdgeListParseError(lineno, line, f"expected 2 tokens, found {len(tokens)}")
        pair = []
        for tok in tokens:
            if tok not in ids:
                ids[tok] = len(ids)
            pair.append(ids[tok])
        raw.append((pair[0], pair[1]))
    if not ids:
        raise GraphError("edge list is empty")
    g = Graph.from_edges(len(ids), raw)
    if g.dropped_self_loops or g.dropped_duplicates:
        logger.warning(
            "dropped %d self-loop(s) and %d duplicate edge(s)", g.dropped_self_loops, g.dropped_duplicates
        )
    return Graph(g.n, g.edges, tuple(ids), g.dropped_self_loops, g.dropped_duplicates)


def serialize_edge_list(g: Graph) -> str:
    """Canonical form: one ``u v`` line per edge with ``u < v``, sorted."""
    return "".join(f"{u} {v}\n" for u, v in g.edges)


def _check_nodes(g: Graph, *nodes: int) -> None:
    for i in nodes:
        if not 0 <= i < g.n:
            raise GraphError(f"node {i} out of range for n={g.n}")


def _check_partition(g: Graph, x: Partition) -> None:
    if x.n != g.n:
        raise GraphError(f"partition covers {x.n} nodes but graph has {g.n}")


def _require_edges(g: Graph) -> None:
    if g.m == 0:
        raise GraphError("modularity is undefined for a graph without edges")


def modularity_denominator(g: Graph, p: ModularityParams = ModularityParams()) -> int:
    return 4 * g.m * g.m * p.gamma.denominator


def weight_matrix(g: Graph, p: ModularityParams = ModularityParams()) -> np.ndarray:
    """Integer matrix ``W`` with ``b_ij = W_ij / (2 m q)``.

    Modularity of a partition is ``sum_{i,j same} W_ij / (4 m^2 q)``.
    """
    _require_edges(g)
    num, den = p.gamma.numerator, p.gamma.denominator
    d = np.asarray(g.degree, dtype=np.int64)
    return 2 * g.m * den * g.adjacency() - num * np.outer(d, d)


def modularity_entry(g: Graph, p: ModularityParams, i: int, j: int) -> Fraction:
    """``b_ij = a_ij - gamma d_i d_j / 2m`` as an exact fraction."""
    _require_edges(g)
    _check_nodes(g, i, j)
    a = 1 if i != j and g.has_edge(i, j) else 0
    d = g.degree
    return a - p.gamma * d[i] * d[j] / (2 * g.m)


def modularity_numerator(g: Graph, x: Partition, p: ModularityParams = ModularityParams()) -> int:
    """Numerator of :func:`modularity` over :func:`modularity_denominator`."""
    _require_edges(g)
    _check_partition(g, x)
    num, den = p.gamma.numerator, p.gamma.denominator
    d = g.degree
    internal2: dict[int, int] = {}
    volume: dict[int, int] = {}
    for u, v in g.edges:
        if x.assignment[u] == x.assignment[v]:
            c = x.assignment[u]
            internal2[c] = internal2.get(c, 0) + 2
    for v, c in enumerate(x.assignment):
        volume[c] = volume.get(c, 0) + d[v]
    return sum(2 * g.m * den * internal2.get(c, 0) - num * vol * vol for c, vol in volume.items())


def modularity(g: Graph, x: Partition, p: ModularityParams = ModularityParams()) -> Fraction:
    """Exact modularity ``Q`` of partition ``x``; lies in ``[-1/2, 1]``."""
    return Fraction(modularity_numerator(g, x, p), modularity_denominator(g, p))


def connected_components(g: Graph) -> list[list[int]]:
    """Components as sorted node lists, ordered by smallest member."""
    seen = [False] * g.n
    comps = []
    for s in range(g.n):
        if seen[s]:
            continue
        seen[s] = True
        queue = deque([s])
        comp = []
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in g.neighbors(u):
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def giant_component(g: Graph) -> tuple[Graph, dict[int, int]]:
    """Largest connected component, relabelled; ties go to the one holding the smallest id."""
    comps = connected_components(g)
    best = max(comps, key=lambda c: (len(c), -c[0]))
    return g.subgraph(best)


def relabel_partition(labels: Sequence[Hashable]) -> Partition:
    """Partition from arbitrary hashable per-node labels."""
    ids: dict[Hashable, int] = {}
    return Partition(tuple(ids.setdefault(lab, len(ids)) for lab in labels))
