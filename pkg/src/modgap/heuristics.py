"""Inexact modularity maximization: CNM, Louvain, Leiden and Combo.

All gains are integers in the same numerator units as
:func:`modgap.graph.modularity_numerator`, so comparisons never depend on
floating-point ties.  With ``W_uv = 2mq A_uv - p s_u s_v`` (``gamma = p/q``,
``A`` the aggregated adjacency, ``s`` the strengths), moving a node ``v`` from
community ``a`` into ``c`` changes the numerator by
``2 * (gain(v, c) - gain(v, a minus v))`` where
``gain(v, c) = 2mq A_vc - p s_v S_c``.
"""

from __future__ import annotations

import heapq
import math
import random
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .graph import (
    Graph,
    GraphError,
    ModularityParams,
    Partition,
    canonicalize,
    connected_components,
    modularity_numerator,
    weight_matrix,
)


@dataclass(frozen=True)
class HeuristicConfig:
    seed: int = 0
    gamma: Fraction = Fraction(1)
    max_passes: int = 100
    theta: float = 0.01
    combo_max_communities: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "gamma", ModularityParams(self.gamma).gamma)
        if self.max_passes < 1:
            raise ValueError("max_passes must be at least 1")
        if self.theta <= 0:
            raise ValueError("theta must be positive")

    @property
    def params(self) -> ModularityParams:
        return ModularityParams(self.gamma)


def _require_edges(g: Graph) -> None:
    if g.m == 0:
        raise GraphError("heuristics need a graph with at least one edge")


class _Level:
    """Weighted graph used at one aggregation level."""

    def __init__(self, adj: list[dict[int, int]], loops: list[int], strength: list[int], two_mq: int, pn: int):
        self.adj = adj
        self.loops = loops
        self.strength = strength
        self.two_mq = two_mq
        self.pn = pn

    @classmethod
    def from_graph(cls, g: Graph, p: ModularityParams) -> "_Level":
        adj = [{u: 1 for u in g.neighbors(v)} for v in range(g.n)]
        return cls(adj, [0] * g.n, list(g.degree), 2 * g.m * p.gamma.denominator, p.gamma.numerator)

    @property
    def n(self) -> int:
        return len(self.adj)

    def aggregate(self, comm: list[int]) -> tuple["_Level", list[int]]:
        """Collapse communities into nodes; returns the new level and node -> new node."""
        index: dict[int, int] = {}
        new_of = [index.setdefault(c, len(index)) for c in comm]
        k = len(index)
        adj: list[dict[int, int]] = [{} for _ in range(k)]
        loops = [0] * k
        strength = [0] * k
        for v in range(self.n):
            x = new_of[v]
            strength[x] += self.strength[v]
            loops[x] += self.loops[v]
            row = adj[x]
            for u, w in self.adj[v].items():
                y = new_of[u]
                if y == x:
                    loops[x] += w
                else:
                    row[y] = row.get(y, 0) + w
        return _Level(adj, loops, strength, self.two_mq, self.pn), new_of

    def score(self, comm: list[int]) -> int:
        inner: dict[int, int] = {}
        vol: dict[int, int] = {}
        for v in range(self.n):
            c = comm[v]
            vol[c] = vol.get(c, 0) + self.strength[v]
            inner[c] = inner.get(c, 0) + self.loops[v]
            for u, w in self.adj[v].items():
                if comm[u] == c:
                    inner[c] += w
        return sum(self.two_mq * inner.get(c, 0) - self.pn * s * s for c, s in vol.items())


class _Communities:
    """Community bookkeeping for local moving on one level."""

    def __init__(self, level: _Level, comm: list[int]):
        self.level = level
        self.comm = list(comm)
        n = level.n
        self.total = [0] * n
        self.size = [0] * n
        for v, c in enumerate(self.comm):
            self.total[c] += level.strength[v]
            self.size[c] += 1
        self.free = [c for c in range(n) if self.size[c] == 0]
        heapq.heapify(self.free)

    def best_move(self, v: int) -> int:
        """Target community for ``v`` (its current one if nothing is strictly better)."""
        lv = self.level
        a = self.comm[v]
        sv = lv.strength[v]
        links: dict[int, int] = {}
        for u, w in lv.adj[v].items():
            c = self.comm[u]
            links[c] = links.get(c, 0) + w
        rest = self.total[a] - sv
        best_c = a
        best_gain = lv.two_mq * links.get(a, 0) - lv.pn * sv * rest
        for c in sorted(links):
            if c == a:
                continue
            gain = lv.two_mq * links[c] - lv.pn * sv * self.total[c]
            if gain > best_gain:
                best_c, best_gain = c, gain
        if best_gain < 0 and self.size[a] > 1:
            best_c = self.free[0]
        return best_c

    def move(self, v: int, c: int) -> None:
        a = self.comm[v]
        if a == c:
            return
        sv = self.level.strength[v]
        self.total[a] -= sv
        self.size[a] -= 1
        if self.size[a] == 0:
            heapq.heappush(self.free, a)
        if self.size[c] == 0:
            self.free.remove(c)
            heapq.heapify(self.free)
        self.total[c] += sv
        self.size[c] += 1
        self.comm[v] = c


def _relabel(comm: list[int]) -> list[int]:
    index: dict[int, int] = {}
    return [index.setdefault(c, len(index)) for c in comm]


def _sweep_moves(level: _Level, comm: list[int], rng: random.Random) -> tuple[list[int], bool]:
    """Louvain phase one: repeated shuffled sweeps until no node moves."""
    state = _Communities(level, comm)
    moved_any = False
    order = list(range(level.n))
    while True:
        rng.shuffle(order)
        moved = False
        for v in order:
            c = state.best_move(v)
            if c != state.comm[v]:
                state.move(v, c)
                moved = True
        if not moved:
            break
        moved_any = True
    return _relabel(state.comm), moved_any


def _queue_moves(level: _Level, comm: list[int], rng: random.Random) -> tuple[list[int], bool]:
    """Leiden's fast local moving: only revisit neighbours of moved nodes."""
    state = _Communities(level, comm)
    order = list(range(level.n))
    rng.shuffle(order)
    queue = deque(order)
    queued = [True] * level.n
    moved_any = False
    while queue:
        v = queue.popleft()
        queued[v] = False
        c = state.best_move(v)
        if c == state.comm[v]:
            continue
        state.move(v, c)
        moved_any = True
        for u in level.adj[v]:
            if not queued[u] and state.comm[u] != c:
                queued[u] = True
                queue.append(u)
    return _relabel(state.comm), moved_any


def _lift(mapping: list[int], comm: list[int]) -> list[int]:
    return [comm[x] for x in mapping]


def _score(g: Graph, comm: list[int], p: ModularityParams) -> int:
    return modularity_numerator(g, Partition(tuple(comm)), p)


def louvain(
    g: Graph,
    cfg: HeuristicConfig = HeuristicConfig(),
    initial: Partition | None = None,
    trace: list[int] | None = None,
) -> Partition:
    """Louvain method: local moving followed by aggregation, repeated.

    Each pass starts with local moves on the original graph, so the result is
    a local optimum under single-node moves.  If ``initial`` already is such an
    optimum it is returned unchanged.
    """
    _require_edges(g)
    p = cfg.params
    rng = random.Random(cfg.seed)
    base = _Level.from_graph(g, p)
    comm = list(initial.assignment) if initial is not None else list(range(g.n))
    comm = _relabel(comm)
    for _ in range(cfg.max_passes):
        comm, moved = _sweep_moves(base, comm, rng)
        if trace is not None:
            trace.append(base.score(comm))
        if not moved:
            break
        level, mapping = base.aggregate(comm)
        while True:
            sub, moved = _sweep_moves(level, list(range(level.n)), rng)
            if not moved:
                break
            comm = _lift(mapping, sub)
            if trace is not None:
                trace.append(base.score(comm))
            level, step = level.aggregate(sub)
            mapping = _lift(mapping, step)
    return canonicalize(Partition(tuple(comm)))


def _refine(level: _Level, comm: list[int], theta: float, den: int, rng: random.Random) -> list[int]:
    """Split each community into well-connected subcommunities by randomized merging."""
    n = level.n
    two_mq, pn = level.two_mq, level.pn
    total: dict[int, int] = {}
    for v in range(n):
        total[comm[v]] = total.get(comm[v], 0) + level.strength[v]
    inside = [sum(w for u, w in level.adj[v].items() if comm[u] == comm[v]) for v in range(n)]
    ref = list(range(n))
    r_strength = list(level.strength)
    r_external = list(inside)
    r_size = [1] * n
    order = list(range(n))
    rng.shuffle(order)
    for v in order:
        if r_size[ref[v]] != 1:
            continue
        sv = level.strength[v]
        big = total[comm[v]]
        if two_mq * inside[v] < pn * sv * (big - sv):
            continue
        links: dict[int, int] = {}
        for u, w in level.adj[v].items():
            if comm[u] == comm[v] and ref[u] != ref[v]:
                links[ref[u]] = links.get(ref[u], 0) + w
        options = [(ref[v], 0)]
        for r in sorted(links):
            rs = r_strength[r]
            if two_mq * r_external[r] < pn * rs * (big - rs):
                continue
            gain = two_mq * links[r] - pn * sv * rs
            if gain >= 0:
                options.append((r, gain))
        if len(options) == 1:
            continue
        top = max(gain for _, gain in options)
        weights = [math.exp(2 * (gain - top) / den / theta) for _, gain in options]
        target = rng.choices([r for r, _ in options], weights=weights)[0]
        if target == ref[v]:
            continue
        old = ref[v]
        r_size[old] -= 1
        r_strength[old] -= sv
        r_external[target] += inside[v] - 2 * links[target]
        r_strength[target] += sv
        r_size[target] += 1
        ref[v] = target
    return _relabel(ref)


def _split_disconnected(g: Graph, comm: list[int]) -> list[int]:
    out = list(comm)
    label = max(comm) + 1
    for members in Partition(tuple(comm)).communities():
        sub, _ = g.subgraph(members)
        parts = connected_components(sub)
        for extra in parts[1:]:
            for local in extra:
                out[members[local]] = label
            label += 1
    return out


def leiden(
    g: Graph,
    cfg: HeuristicConfig = HeuristicConfig(),
    initial: Partition | None = None,
    trace: list[int] | None = None,
) -> Partition:
    """Leiden algorithm with a randomized refinement phase (randomness ``cfg.theta``).

    Every returned community induces a connected subgraph.
    """
    _require_edges(g)
    p = cfg.params
    den = 4 * g.m * g.m * p.gamma.denominator
    rng = random.Random(cfg.seed)
    base = _Level.from_graph(g, p)
    comm = _relabel(list(initial.assignment) if initial is not None else list(range(g.n)))
    current = base.score(comm)
    for _ in range(cfg.max_passes):
        level, mapping, level_comm = base, list(range(g.n)), list(comm)
        while True:
            level_comm, moved = _queue_moves(level, level_comm, rng)
            if trace is not None:
                trace.append(base.score(_lift(mapping, level_comm)))
            if len(set(level_comm)) == level.n:
                break
            ref = _refine(level, level_comm, cfg.theta, den, rng)
            if len(set(ref)) == level.n:
                # refinement merged nothing; aggregate by the communities to make progress
                ref = level_comm
            coarse, step = level.aggregate(ref)
            parent = [0] * coarse.n
            for v, x in enumerate(step):
                parent[x] = level_comm[v]
            mapping = _lift(mapping, step)
            level, level_comm = coarse, parent
        candidate = _split_disconnected(g, _lift(mapping, level_comm))
        score = base.score(candidate)
        if trace is not None:
            trace.append(score)
        improved = score > current
        comm, current = candidate, score
        if not improved:
            break
    return canonicalize(Partition(tuple(comm)))


def cnm(g: Graph, cfg: HeuristicConfig = HeuristicConfig(), trace: list[int] | None = None) -> Partition:
    """Greedy agglomeration: merge the pair with the largest positive gain until none is left.

    Communities are keyed by their smallest node, and equal gains go to the
    lexicographically smallest pair, so the result does not depend on the seed.
    """
    _require_edges(g)
    p = cfg.params
    two_mq, pn = 2 * g.m * p.gamma.denominator, p.gamma.numerator
    links: dict[int, dict[int, int]] = {v: {u: 1 for u in g.neighbors(v)} for v in range(g.n)}
    total = dict(enumerate(g.degree))
    version = {v: 0 for v in range(g.n)}
    owner = list(range(g.n))

    def delta(a: int, b: int) -> int:
        return 2 * (two_mq * links[a][b] - pn * total[a] * total[b])

    heap = []
    for a in range(g.n):
        for b in links[a]:
            if a < b:
                heap.append((-delta(a, b), a, b, 0, 0))
    heapq.heapify(heap)
    score = modularity_numerator(g, Partition.singletons(g.n), p)
    while heap:
        neg, a, b, va, vb = heapq.heappop(heap)
        if a not in links or b not in links or version[a] != va or version[b] != vb:
            continue
        if -neg <= 0:
            break
        # b is absorbed into a; a < b so the smaller key survives
        for c, w in links.pop(b).items():
            if c == a:
                continue
            links[c].pop(b)
            links[a][c] = links[a].get(c, 0) + w
            links[c][a] = links[a][c]
        links[a].pop(b, None)
        total[a] += total.pop(b)
        version[a] += 1
        del version[b]
        for v in range(g.n):
            if owner[v] == b:
                owner[v] = a
        score += -neg
        if trace is not None:
            trace.append(score)
        for c in links[a]:
            x, y = (a, c) if a < c else (c, a)
            heapq.heappush(heap, (-delta(x, y), x, y, version[x], version[y]))
    return canonicalize(Partition(tuple(owner)))


def _kl_shift(wsub: np.ndarray, side: np.ndarray, ids: list[int]) -> tuple[int, np.ndarray]:
    """Best prefix of a Kernighan-Lin pass over a two-sided node set.

    ``side`` holds 0/1 per node.  Every node is flipped once, greedily by
    largest gain (smallest node id on ties); the best cumulative prefix is
    returned with the resulting sides.
    """
    sign = np.where(side[:, None] == side[None, :], -1, 1)
    gains = 2 * (sign * wsub).sum(axis=1)
    locked = np.zeros(len(side), dtype=bool)
    order_key = np.asarray(ids)
    current = side.copy()
    total = 0
    best, best_len = 0, 0
    flips = []
    for step in range(len(side)):
        masked = np.where(locked, np.iinfo(np.int64).min, gains)
        top = masked.max()
        v = int(np.flatnonzero(masked == top)[np.argmin(order_key[masked == top])])
        total += int(gains[v])
        flips.append(v)
        locked[v] = True
        same = current == current[v]
        # v switches sides: nodes on its old side gain, nodes on the new side lose
        gains += np.where(same, 4, -4) * wsub[:, v]
        current[v] = 1 - current[v]
        if total > best:
            best, best_len = total, step + 1
    result = side.copy()
    for v in flips[:best_len]:
        result[v] = 1 - result[v]
    return best, result


def combo(g: Graph, cfg: HeuristicConfig = HeuristicConfig(), trace: list[int] | None = None) -> Partition:
    """Combo-style optimization by best community-pair recombination.

    Starting from a single community, every adjacent community pair and every
    community paired with a fresh empty one is refined by a Kernighan-Lin
    pass; the single best improving shift is applied.  Candidate evaluations
    are cached and only pairs touching a changed community are recomputed.
    """
    _require_edges(g)
    p = cfg.params
    w = weight_matrix(g, p)
    np.fill_diagonal(w, 0)
    n = g.n
    members: dict[int, list[int]] = {0: list(range(n))}
    owner = [0] * n
    next_id = 1
    cache: dict[tuple[int, int], tuple[int, list[int], list[int]]] = {}
    score = modularity_numerator(g, Partition.whole(n), p)

    def evaluate(s: int, d: int | None) -> tuple[int, list[int], list[int]]:
        left = members[s]
        right = members[d] if d is not None else []
        ids = left + right
        side = np.array([0] * len(left) + [1] * len(right), dtype=np.int64)
        sub = w[np.ix_(ids, ids)]
        best, result = _kl_shift(sub, side, ids)
        if d is not None:
            merge_gain = 2 * int(w[np.ix_(left, right)].sum())
            if merge_gain > best:
                best, result = merge_gain, np.ones(len(ids), dtype=np.int64)
        new_left = [v for v, sd in zip(ids, result) if sd == 0]
        new_right = [v for v, sd in zip(ids, result) if sd == 1]
        return best, new_left, new_right

    while True:
        neighbours: dict[int, set[int]] = {c: set() for c in members}
        for u, v in g.edges:
            a, b = owner[u], owner[v]
            if a != b:
                neighbours[a].add(b)
                neighbours[b].add(a)
        allow_new = cfg.combo_max_communities is None or len(members) < cfg.combo_max_communities
        best_key = None
        best_entry = None
        for s in members:
            pairs = [(s, d) for d in neighbours[s] if s < d]
            if allow_new:
                pairs.append((s, -1))
            for key in pairs:
                if key not in cache:
                    cache[key] = evaluate(s, None if key[1] == -1 else key[1])
                entry = cache[key]
                lo = min(members[s])
                hi = min(members[key[1]]) if key[1] != -1 else n
                rank = (entry[0], -min(lo, hi), -max(lo, hi))
                if best_entry is None or rank > best_key:
                    best_key, best_entry = rank, (key, entry)
        if best_entry is None or best_entry[1][0] <= 0:
            break
        (s, d), (gain, new_left, new_right) = best_entry
        touched = {s, d} - {-1}
        for key in [k for k in cache if touched & set(k)]:
            del cache[key]
        del members[s]
        if d != -1:
            del members[d]
        for group in (new_left, new_right):
            if group:
                members[next_id] = sorted(group)
                for v in group:
                    owner[v] = next_id
                next_id += 1
        score += gain
        if trace is not None:
            trace.append(score)
    return canonicalize(Partition(tuple(owner)))


HEURISTICS = {"cnm": cnm, "louvain": louvain, "leiden": leiden, "combo": combo}


def run_heuristic(name: str, g: Graph, cfg: HeuristicConfig) -> Partition:
    try:
        fn = HEURISTICS[name]
    except KeyError:
        raise ValueError(f"unknown heuristic {name!r}; expected one of {sorted(HEURISTICS)}") from None
    return fn(g, cfg)
