"""Seeded synthetic graphs with planted communities ("abcdlite").

Degrees and community sizes follow truncated discrete power laws; each
node's stubs are split into intra- and inter-community stubs according to the
mixing parameter ``mu`` and wired by configuration-model matching.  The
generator shares parameter names with LFR/ABCD but not their wiring rules.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .graph import Graph, ModularityParams, Partition, modularity

logger = logging.getLogger(__name__)

FAMILY = "abcdlite"
MATCH_ROUNDS = 50
SIZE_ATTEMPTS = 1000


class GenerationError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class BenchmarkSpec:
    """Generator parameters.  Bounds left as ``None`` get size-dependent defaults."""

    n: int
    mu: float = 0.1
    seed: int = 0
    tau1: float = 3.0
    tau2: float = 1.5
    d_min: int | None = None
    d_max: int | None = None
    k_min: int | None = None
    k_max: int | None = None

    def __post_init__(self):
        n = self.n
        if n < 2:
            raise ValueError("n must be at least 2")
        if self.d_min is None:
            object.__setattr__(self, "d_min", min(2, n - 1))
        if self.d_max is None:
            object.__setattr__(self, "d_max", max(self.d_min, min(n - 1, int(0.3 * n))))
        if self.k_max is None:
            object.__setattr__(self, "k_max", max(1, n // 2))
        if self.k_min is None:
            object.__setattr__(self, "k_min", min(self.k_max, 5))
        if not 1 <= self.d_min <= self.d_max < n:
            raise ValueError(f"need 1 <= d_min <= d_max < n, got {self.d_min}, {self.d_max}, {n}")
        if not 1 <= self.k_min <= self.k_max <= n:
            raise ValueError(f"need 1 <= k_min <= k_max <= n, got {self.k_min}, {self.k_max}, {n}")
        if self.tau1 <= 1 or self.tau2 <= 1:
            raise ValueError("power-law exponents must exceed 1")
        if not 0 <= self.mu < 1:
            raise ValueError(f"mu must lie in [0, 1), got {self.mu}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PlantedGraph:
    graph: Graph
    planted: Partition
    spec: BenchmarkSpec | None = None
    degree_loss: int = 0
    target_degrees: tuple[int, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.planted.n != self.graph.n:
            raise ValueError("planted partition does not cover the graph")

    @property
    def inter_fraction(self) -> float:
        if self.graph.m == 0:
            return 0.0
        lab = self.planted.assignment
        inter = sum(1 for u, v in self.graph.edges if lab[u] != lab[v])
        return inter / self.graph.m


def power_law_sample(rng: np.random.Generator, tau: float, lo: int, hi: int, size: int) -> np.ndarray:
    """Draw from ``P(k) ~ k^-tau`` on ``lo..hi`` by inverting the discrete CDF."""
    support = np.arange(lo, hi + 1)
    weights = support.astype(float) ** -tau
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(size), side="right")
    return support[np.minimum(idx, len(support) - 1)]


def _community_sizes(rng: np.random.Generator, spec: BenchmarkSpec) -> list[int]:
    lo, hi, n = spec.k_min, spec.k_max, spec.n
    for _ in range(SIZE_ATTEMPTS):
        sizes: list[int] = []
        total = 0
        while total < n:
            s = int(power_law_sample(rng, spec.tau2, lo, hi, 1)[0])
            sizes.append(s)
            total += s
        excess = total - n
        # trim the overshoot from the last community, spilling into others if needed
        for i in range(len(sizes) - 1, -1, -1):
            cut = min(excess, sizes[i] - lo)
            sizes[i] -= cut
            excess -= cut
            if excess == 0:
                break
        if excess == 0:
            return sizes
    raise GenerationError("community sizes", f"cannot tile n={n} with sizes in [{lo}, {hi}]")


def _round_split(rng: np.random.Generator, degrees: np.ndarray, mu: float) -> np.ndarray:
    """Inter-community stub counts, ``mu * d`` rounded up or down at random."""
    raw = mu * degrees
    base = np.floor(raw)
    return (base + (rng.random(len(degrees)) < raw - base)).astype(np.int64)


def _match(rng: np.random.Generator, stubs: list[int], edges: set, forbid_same=None) -> list[int]:
    """Pair up stubs at random, keeping only new simple edges.

    Returns the stubs left unmatched after ``MATCH_ROUNDS`` shuffles.
    """
    pending = list(stubs)
    for _ in range(MATCH_ROUNDS):
        if len(pending) < 2:
            break
        rng.shuffle(pending)
        rejected = []
        for i in range(0, len(pending) - 1, 2):
            u, v = pending[i], pending[i + 1]
            e = (u, v) if u < v else (v, u)
            if u == v or e in edges or (forbid_same is not None and forbid_same[u] == forbid_same[v]):
                rejected += [u, v]
            else:
                edges.add(e)
        if len(pending) % 2:
            rejected.append(pending[-1])
        pending = rejected
    return pending


def _repair_isolated(rng: np.random.Generator, n: int, labels: list[int], edges: set, d_max: int) -> None:
    deg = [0] * n
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    members: dict[int, list[int]] = {}
    for v, c in enumerate(labels):
        members.setdefault(c, []).append(v)
    for v in range(n):
        if deg[v]:
            continue
        pool = [w for w in members[labels[v]] if w != v and deg[w] < d_max]
        pool = pool or [w for w in range(n) if w != v and deg[w] < d_max] or [w for w in range(n) if w != v]
        w = pool[int(rng.integers(len(pool)))]
        edges.add((min(v, w), max(v, w)))
        deg[v] += 1
        deg[w] += 1


def generate(spec: BenchmarkSpec) -> PlantedGraph:
    """Build one planted-partition graph; identical specs give identical graphs."""
    rng = np.random.default_rng(spec.seed)
    sizes = _community_sizes(rng, spec)
    order = rng.permutation(spec.n)
    labels = [0] * spec.n
    start = 0
    for c, s in enumerate(sizes):
        for v in order[start:start + s]:
            labels[int(v)] = c
        start += s
    degrees = power_law_sample(rng, spec.tau1, spec.d_min, spec.d_max, spec.n)
    inter = _round_split(rng, degrees, spec.mu)
    intra = degrees - inter
    members: dict[int, list[int]] = {}
    for v, c in enumerate(labels):
        members.setdefault(c, []).append(v)
    for c, vs in members.items():
        cap = len(vs) - 1
        for v in vs:
            if intra[v] > cap:
                # a node cannot have more intra neighbours than its community allows
                inter[v] += intra[v] - cap
                intra[v] = cap
    if len(members) == 1:
        intra += inter
        inter[:] = 0
        intra = np.minimum(intra, spec.n - 1)

    edges: set[tuple[int, int]] = set()
    lost = 0
    for c in sorted(members):
        stubs = [v for v in members[c] for _ in range(int(intra[v]))]
        lost += len(_match(rng, stubs, edges))
    stubs = [v for v in range(spec.n) for _ in range(int(inter[v]))]
    lost += len(_match(rng, stubs, edges, forbid_same=labels))
    _repair_isolated(rng, spec.n, labels, edges, spec.d_max)
    try:
        graph = Graph(spec.n, tuple(sorted(edges)))
    except ValueError as exc:
        raise GenerationError("assembly", str(exc)) from exc
    if graph.m == 0:
        raise GenerationError("stub matching", "no edges could be placed")
    if lost:
        logger.debug("seed %d: %d stub(s) left unmatched", spec.seed, lost)
    return PlantedGraph(graph, Partition(tuple(labels)), spec, lost, tuple(int(d) for d in degrees))


def planted_quality(pg: PlantedGraph, p: ModularityParams = ModularityParams()) -> Fraction:
    return modularity(pg.graph, pg.planted, p)


def sidecar(pg: PlantedGraph) -> dict:
    """Metadata written next to a generated edge list."""
    out = {
        "schema_version": "1",
        "family": FAMILY,
        "spec": pg.spec.to_dict() if pg.spec else None,
        "n": pg.graph.n,
        "m": pg.graph.m,
        "inter_fraction": pg.inter_fraction,
        "degree_loss": pg.degree_loss,
        "planted": list(pg.planted.assignment),
    }
    if pg.graph.m:
        out["planted_modularity"] = float(planted_quality(pg))
    return out


def sidecar_json(pg: PlantedGraph) -> str:
    return json.dumps(sidecar(pg), indent=2, sort_keys=True) + "\n"


def spec_from_dict(d: dict) -> BenchmarkSpec:
    known = set(BenchmarkSpec.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown spec field(s): {', '.join(sorted(unknown))}")
    kwargs = dict(d)
    if "mu" in kwargs and not math.isfinite(float(kwargs["mu"])):
        raise ValueError("mu must be finite")
    return BenchmarkSpec(**kwargs)
