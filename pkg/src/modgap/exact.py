"""Exact and gap-bounded modularity maximization.

The search works on must-link classes of nodes.  A node of the search tree is
a set of classes (nodes forced into the same community), a cannot-link
relation between classes, and the class-aggregated weight matrix.  Branching
picks an undecided class pair and either merges it or forbids it; transitivity
of the same-community relation is therefore maintained by construction rather
than by explicit triangle constraints.

Bounds are computed in integer numerator units (see
:func:`modgap.graph.weight_matrix`), so all pruning decisions are exact.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .graph import (
    Graph,
    GraphError,
    ModularityParams,
    Partition,
    canonicalize,
    modularity_denominator,
    modularity_numerator,
    weight_matrix,
)

logger = logging.getLogger(__name__)

GAP_FLOOR = 1e-12
DEFAULT_BRUTE_FORCE_LIMIT = 13


class InconsistentStateError(ValueError):
    """A must-link/cannot-link update contradicts earlier decisions."""


class SolverLimitError(ValueError):
    """The brute-force oracle refuses instances above its size guard."""


@dataclass(frozen=True)
class SolveConfig:
    tolerance: float = 0.0
    time_limit: float | None = None
    node_limit: int | None = None
    enumerate_all: bool = False
    seed: int = 0
    warm_start: bool = True

    def __post_init__(self):
        if not 0 <= self.tolerance < 1:
            raise ValueError(f"tolerance must lie in [0, 1), got {self.tolerance}")
        if self.enumerate_all and self.tolerance != 0:
            raise ValueError("enumerating all optima requires tolerance 0")


@dataclass
class SolveResult:
    optima: list[Partition]
    q_lb: Fraction
    q_ub: Fraction
    proven_optimal: bool
    nodes_explored: int = 0
    elapsed: float = 0.0
    complete: bool = True

    @property
    def gap(self) -> float:
        return gap(self.q_lb, self.q_ub)

    @property
    def q_star(self) -> Fraction:
        return self.q_lb

    def to_json(self) -> dict:
        return {
            "schema_version": "1",
            "q_lb": float(self.q_lb),
            "q_ub": float(self.q_ub),
            "q_lb_exact": str(self.q_lb),
            "q_ub_exact": str(self.q_ub),
            "gap": self.gap,
            "proven_optimal": self.proven_optimal,
            "complete": self.complete,
            "nodes_explored": self.nodes_explored,
            "elapsed_seconds": self.elapsed,
            "optima": [list(x.assignment) for x in self.optima],
        }


def gap(q_lb, q_ub) -> float:
    """Relative gap when the incumbent is positive, absolute otherwise."""
    diff = float(q_ub - q_lb)
    if q_lb > 0:
        return diff / max(float(q_lb), GAP_FLOOR)
    return diff


class Optima(list):
    """List of optimal partitions that also says whether enumeration finished."""

    def __init__(self, items=(), complete: bool = True, q_star: Fraction | None = None):
        super().__init__(items)
        self.complete = complete
        self.q_star = q_star


class PairDecisionState:
    """Must-link classes (union-find) plus a cannot-link relation between classes."""

    def __init__(self, n: int):
        self.n = n
        self._parent = list(range(n))
        self._cannot: set[tuple[int, int]] = set()

    def copy(self) -> "PairDecisionState":
        other = PairDecisionState.__new__(PairDecisionState)
        other.n = self.n
        other._parent = list(self._parent)
        other._cannot = set(self._cannot)
        return other

    def find(self, i: int) -> int:
        root = i
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[i] != root:
            self._parent[i], i = root, self._parent[i]
        return root

    def _key(self, a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    def status(self, i: int, j: int) -> str:
        a, b = self.find(i), self.find(j)
        if a == b:
            return "same"
        if self._key(a, b) in self._cannot:
            return "different"
        return "undecided"

    def merge(self, i: int, j: int) -> None:
        a, b = self.find(i), self.find(j)
        if a == b:
            return
        if self._key(a, b) in self._cannot:
            raise InconsistentStateError(f"nodes {i} and {j} are cannot-linked")
        # smallest id stays the representative so class order is canonical
        keep, gone = (a, b) if a < b else (b, a)
        self._parent[gone] = keep
        moved = {pair for pair in self._cannot if gone in pair}
        self._cannot -= moved
        for x, y in moved:
            other = y if x == gone else x
            self._cannot.add(self._key(keep, other))

    def separate(self, i: int, j: int) -> None:
        a, b = self.find(i), self.find(j)
        if a == b:
            raise InconsistentStateError(f"nodes {i} and {j} are already must-linked")
        self._cannot.add(self._key(a, b))

    def classes(self) -> list[list[int]]:
        groups: dict[int, list[int]] = {}
        for v in range(self.n):
            groups.setdefault(self.find(v), []).append(v)
        return sorted(groups.values(), key=lambda c: c[0])

    def cannot_pairs(self) -> set[tuple[int, int]]:
        return {self._key(self.find(a), self.find(b)) for a, b in self._cannot}

    def is_consistent(self) -> bool:
        return all(self.find(a) != self.find(b) for a, b in self._cannot)

    def as_partition(self) -> Partition:
        return canonicalize(Partition(tuple(self.find(v) for v in range(self.n))))


@dataclass
class _Node:
    """Search-tree node over must-link classes, ordered by smallest member."""

    members: list[list[int]]
    cross: np.ndarray  # k x k aggregated weights, zero diagonal
    cannot: np.ndarray  # k x k bool
    fixed: int  # numerator contributed by the classes themselves
    bound: int  # best known bound for this subtree (parent's, until evaluated)
    depth: int = 0

    @classmethod
    def root(cls, w: np.ndarray) -> "_Node":
        n = len(w)
        cross = w.copy()
        np.fill_diagonal(cross, 0)
        node = cls([[v] for v in range(n)], cross, np.zeros((n, n), dtype=bool), int(np.trace(w)), 0)
        node.bound = node.simple_bound()
        return node

    @classmethod
    def from_state(cls, w: np.ndarray, s: PairDecisionState) -> "_Node":
        members = s.classes()
        k = len(members)
        index = np.empty(len(w), dtype=np.int64)
        for c, mem in enumerate(members):
            index[mem] = c
        onehot = np.zeros((len(w), k), dtype=np.int64)
        onehot[np.arange(len(w)), index] = 1
        agg = onehot.T @ w @ onehot
        fixed = int(np.trace(agg))
        np.fill_diagonal(agg, 0)
        cannot = np.zeros((k, k), dtype=bool)
        for a, b in s.cannot_pairs():
            ca, cb = index[a], index[b]
            cannot[ca, cb] = cannot[cb, ca] = True
        node = cls(members, agg, cannot, fixed, 0)
        node.bound = node.simple_bound()
        return node

    @property
    def k(self) -> int:
        return len(self.members)

    def undecided(self) -> np.ndarray:
        mask = ~self.cannot
        np.fill_diagonal(mask, False)
        return mask

    def simple_bound(self) -> int:
        open_pairs = np.triu(np.where(self.undecided(), self.cross, 0), 1)
        return self.fixed + 2 * int(np.maximum(open_pairs, 0).sum())

    def conflict_loss(self) -> int:
        """Lower bound on the positive weight any completion must give up.

        Packs conflict triangles (two positive undecided pairs whose third pair
        is negative or cannot-linked) with residual capacities, so every unit
        of weight is charged at most once.
        """
        k = self.k
        cross = self.cross.tolist()
        cannot = self.cannot.tolist()
        inf = float("inf")
        resid = [[0] * k for _ in range(k)]
        positive: list[list[int]] = [[] for _ in range(k)]
        for a in range(k):
            row, crow, rrow = cross[a], cannot[a], resid[a]
            for b in range(k):
                if a == b:
                    continue
                if crow[b]:
                    rrow[b] = inf
                else:
                    wab = row[b]
                    rrow[b] = wab if wab > 0 else -wab
                    if wab > 0:
                        positive[a].append(b)
        loss = 0
        for b in range(k):
            pos = positive[b]
            rb = resid[b]
            for x in range(len(pos)):
                a = pos[x]
                ra = resid[a]
                for c in pos[x + 1:]:
                    if cannot[a][c] or cross[a][c] < 0:
                        delta = min(ra[b], rb[c], ra[c])
                        if delta > 0:
                            ra[b] -= delta
                            rb[a] -= delta
                            rb[c] -= delta
                            resid[c][b] -= delta
                            if ra[c] != inf:
                                ra[c] -= delta
                                resid[c][a] -= delta
                            loss += 2 * delta
        return int(loss)

    def candidates(self, allow_zero: bool) -> np.ndarray:
        upper = np.triu(self.undecided(), 1)
        keep = upper & (self.cross >= 0 if allow_zero else self.cross > 0)
        return np.where(keep, self.cross, -1)

    def merged(self, a: int, b: int) -> "_Node":
        keep = [i for i in range(self.k) if i != b]
        cross = self.cross.copy()
        cross[a, :] += self.cross[b, :]
        cross[:, a] += self.cross[:, b]
        fixed = self.fixed + 2 * int(self.cross[a, b])
        cross[a, a] = 0
        cannot = self.cannot.copy()
        cannot[a, :] |= self.cannot[b, :]
        cannot[:, a] |= self.cannot[:, b]
        cannot[a, a] = False
        members = [list(m) for m in self.members]
        members[a] = sorted(members[a] + members[b])
        del members[b]
        idx = np.ix_(keep, keep)
        return _Node(members, cross[idx], cannot[idx], fixed, self.bound, self.depth + 1)

    def separated(self, a: int, b: int) -> "_Node":
        cannot = self.cannot.copy()
        cannot[a, b] = cannot[b, a] = True
        return _Node(self.members, self.cross, cannot, self.fixed, self.bound, self.depth + 1)

    def partition(self, n: int) -> Partition:
        labels = [0] * n
        for c, mem in enumerate(self.members):
            for v in mem:
                labels[v] = c
        return canonicalize(Partition(tuple(labels)))

    def state(self, n: int) -> PairDecisionState:
        s = PairDecisionState(n)
        for mem in self.members:
            for v in mem[1:]:
                s.merge(mem[0], v)
        for a, b in zip(*np.nonzero(np.triu(self.cannot, 1))):
            s.separate(self.members[a][0], self.members[b][0])
        return s


def upper_bound(
    g: Graph,
    p: ModularityParams,
    s: PairDecisionState,
    fixed_contribution: Fraction | None = None,
) -> Fraction:
    """Admissible bound on the modularity of any completion of ``s``.

    Sums the diagonal terms and decided same-community pairs exactly, and each
    undecided pair of classes at ``max(aggregated b, 0)``.  ``fixed_contribution``
    replaces the exactly-known part when the caller already tracks it.
    """
    if not s.is_consistent():
        raise InconsistentStateError("decision state has a must-link inside a cannot-link")
    if s.n != g.n:
        raise GraphError("decision state and graph disagree on node count")
    node = _Node.from_state(weight_matrix(g, p), s)
    den = modularity_denominator(g, p)
    if fixed_contribution is None:
        return Fraction(node.simple_bound(), den)
    return Fraction(fixed_contribution) + Fraction(node.simple_bound() - node.fixed, den)


def brute_force_max(
    g: Graph, p: ModularityParams = ModularityParams(), max_nodes: int = DEFAULT_BRUTE_FORCE_LIMIT
) -> SolveResult:
    """Maximum modularity by enumerating every set partition.

    Partitions are generated as restricted-growth strings and scored
    incrementally from edge counts and community volumes.
    """
    if g.n > max_nodes:
        raise SolverLimitError(
            f"brute force refuses n={g.n} > {max_nodes}; use branch_and_bound_max instead"
        )
    if g.m == 0:
        raise GraphError("modularity is undefined for a graph without edges")
    t0 = time.perf_counter()
    n, m = g.n, g.m
    pn, pd = p.gamma.numerator, p.gamma.denominator
    deg = g.degree
    earlier = [[u for u in g.neighbors(v) if u < v] for v in range(n)]
    labels = [0] * n
    volume = [0] * n
    best = [None]
    optima: list[tuple[int, ...]] = []
    count = [0]

    def extend(v: int, blocks: int, score: int) -> None:
        if v == n:
            count[0] += 1
            if best[0] is None or score > best[0]:
                best[0] = score
                optima.clear()
            if score == best[0]:
                optima.append(tuple(labels))
            return
        dv = deg[v]
        inside = [0] * (blocks + 1)
        for u in earlier[v]:
            inside[labels[u]] += 1
        for b in range(blocks + 1):
            delta = 4 * m * pd * inside[b] - pn * (2 * volume[b] * dv + dv * dv)
            labels[v] = b
            volume[b] += dv
            extend(v + 1, max(blocks, b + 1), score + delta)
            volume[b] -= dv

    extend(0, 0, 0)
    q = Fraction(best[0], modularity_denominator(g, p))
    parts = sorted(Partition(x) for x in optima)
    return SolveResult(parts, q, q, True, count[0], time.perf_counter() - t0)


def _heuristic_incumbent(g: Graph, p: ModularityParams, seed: int) -> Partition:
    from .heuristics import HeuristicConfig, combo, louvain

    cfg = HeuristicConfig(seed=seed, gamma=p.gamma)
    found = [louvain(g, cfg), combo(g, cfg)]
    return max(found, key=lambda x: (modularity_numerator(g, x, p), [-c for c in x.assignment]))


def _search(
    g: Graph,
    p: ModularityParams,
    cfg: SolveConfig,
    trace: Callable[[dict], None] | None = None,
) -> tuple[SolveResult, bool]:
    if g.m == 0:
        raise GraphError("the solver needs at least one edge")
    t0 = time.perf_counter()
    w = weight_matrix(g, p)
    den = modularity_denominator(g, p)
    eps = Fraction(repr(cfg.tolerance)) if cfg.tolerance else Fraction(0)
    enumerate_all = cfg.enumerate_all

    if cfg.warm_start:
        incumbent = _heuristic_incumbent(g, p, cfg.seed)
    else:
        incumbent = Partition.singletons(g.n)
    best = modularity_numerator(g, incumbent, p)
    found: dict[tuple[int, ...], None] = {}
    if not enumerate_all:
        found[incumbent.assignment] = None

    def closes(ub: int) -> bool:
        if enumerate_all:
            return ub < best
        if best > 0:
            return ub - best <= eps * best
        return ub - best <= eps * den

    def record(value: int, part: Partition) -> None:
        nonlocal best
        if value > best:
            best = value
            found.clear()
        if value == best and (enumerate_all or not found):
            found[part.assignment] = None

    root = _Node.root(w)
    stack = [root]
    nodes = 0
    pruned_ub: int | None = None  # highest bound discarded by the tolerance rule
    limited = False
    while stack:
        if (cfg.node_limit is not None and nodes >= cfg.node_limit) or (
            cfg.time_limit is not None and time.perf_counter() - t0 >= cfg.time_limit
        ):
            limited = True
            break
        node = stack.pop()
        nodes += 1
        inherited = node.bound
        if closes(node.bound):
            continue
        ub = min(node.bound, node.simple_bound())
        if not closes(ub):
            ub = min(ub, node.simple_bound() - node.conflict_loss())
        node.bound = ub
        if trace is not None:
            trace({
                "node": nodes,
                "depth": node.depth,
                "bound": Fraction(ub, den),
                "parent_bound": None if inherited is None else Fraction(inherited, den),
                "incumbent": Fraction(best, den),
                "state": node.state(g.n),
            })
        if closes(ub):
            if ub > best and (pruned_ub is None or ub > pruned_ub):
                pruned_ub = ub
            continue
        cand = node.candidates(allow_zero=enumerate_all)
        if cand.size == 0 or cand.max() < 0:
            # no pair can still raise the score: the classes themselves are the best completion
            record(node.fixed, node.partition(g.n))
            continue
        a, b = np.unravel_index(int(np.argmax(cand)), cand.shape)
        # pushed in reverse so the merge branch is explored first
        stack.append(node.separated(int(a), int(b)))
        stack.append(node.merged(int(a), int(b)))

    open_ub = max((nd.bound for nd in stack), default=None)
    ub = max(x for x in (best, pruned_ub, open_ub) if x is not None)
    if enumerate_all:
        optima = sorted(Partition(x) for x in found)
    else:
        optima = [Partition(next(iter(found)))]
    q_lb, q_ub = Fraction(best, den), Fraction(ub, den)
    result = SolveResult(
        optima,
        q_lb,
        q_ub,
        proven_optimal=q_lb == q_ub,
        nodes_explored=nodes,
        elapsed=time.perf_counter() - t0,
        complete=not limited,
    )
    if limited:
        logger.info("search stopped by limit after %d nodes, gap %.3g", nodes, result.gap)
    return result, limited


def branch_and_bound_max(
    g: Graph,
    p: ModularityParams = ModularityParams(),
    cfg: SolveConfig = SolveConfig(),
    trace: Callable[[dict], None] | None = None,
) -> SolveResult:
    """Maximize modularity to within relative tolerance ``cfg.tolerance``.

    With tolerance 0 and no limits hit the result is proven optimal.  When a
    time or node limit stops the search the best partition found is still
    returned, together with the bound on how far it may be from optimal.
    """
    result, _ = _search(g, p, cfg, trace)
    return result


def enumerate_optima(
    g: Graph,
    p: ModularityParams = ModularityParams(),
    cfg: SolveConfig = SolveConfig(enumerate_all=True),
) -> Optima:
    """Every partition attaining the maximum modularity.

    Ties are never pruned, so the search visits every optimal leaf.  If a limit
    interrupts the search the returned list has ``complete == False``.
    """
    if cfg.tolerance != 0:
        raise ValueError("enumerating all optima requires tolerance 0")
    if not cfg.enumerate_all:
        cfg = SolveConfig(0.0, cfg.time_limit, cfg.node_limit, True, cfg.seed, cfg.warm_start)
    result, limited = _search(g, p, cfg)
    return Optima(result.optima, complete=not limited, q_star=result.q_lb)


def solve_all_optima(
    g: Graph, p: ModularityParams = ModularityParams(), cfg: SolveConfig = SolveConfig(enumerate_all=True)
) -> SolveResult:
    """Like :func:`enumerate_optima` but returns the full :class:`SolveResult`."""
    if not cfg.enumerate_all:
        cfg = SolveConfig(0.0, cfg.time_limit, cfg.node_limit, True, cfg.seed, cfg.warm_start)
    result, _ = _search(g, p, cfg)
    return result
