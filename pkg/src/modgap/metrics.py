"""Partition similarity and optimality measures: GOP, AMI, RMI, ECS.

Information measures use natural logarithms.  Partitions may be given as
:class:`~modgap.graph.Partition` objects or as plain per-node label sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .graph import Partition

GOP_GUARD = 1e-9
EXACT_COUNT_MAX_N = 40
EXACT_COUNT_MAX_CELLS = 64


class MetricError(ValueError):
    pass


def _labels(x) -> tuple[int, ...]:
    if isinstance(x, Partition):
        return x.assignment
    return tuple(x)


def contingency(x, y) -> np.ndarray:
    """Counts ``n_uv`` of nodes in community ``u`` of ``x`` and ``v`` of ``y``.

    Rows and columns follow first-occurrence order of the labels.
    """
    lx, ly = _labels(x), _labels(y)
    if len(lx) != len(ly):
        raise MetricError(f"partitions cover {len(lx)} and {len(ly)} nodes")
    if not lx:
        raise MetricError("partitions are empty")
    rx: dict = {}
    ry: dict = {}
    ix = [rx.setdefault(c, len(rx)) for c in lx]
    iy = [ry.setdefault(c, len(ry)) for c in ly]
    table = np.zeros((len(rx), len(ry)), dtype=np.int64)
    np.add.at(table, (ix, iy), 1)
    return table


def entropy(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    counts = counts[counts > 0]
    n = counts.sum()
    p = counts / n
    return float(-(p * np.log(p)).sum())


def mutual_information(table: np.ndarray) -> float:
    table = np.asarray(table, dtype=float)
    n = table.sum()
    a = table.sum(axis=1)
    b = table.sum(axis=0)
    nz = np.nonzero(table)
    nij = table[nz]
    return float((nij / n * np.log(n * nij / (a[nz[0]] * b[nz[1]]))).sum())


def expected_mutual_information(table: np.ndarray) -> float:
    """Expected MI under random relabelling with both marginals fixed (hypergeometric model)."""
    table = np.asarray(table)
    n = int(table.sum())
    a = [int(v) for v in table.sum(axis=1)]
    b = [int(v) for v in table.sum(axis=0)]
    lg = [math.lgamma(k + 1) for k in range(n + 1)]
    emi = 0.0
    for ai in a:
        for bj in b:
            fixed = lg[ai] + lg[bj] + lg[n - ai] + lg[n - bj] - lg[n]
            for nij in range(max(1, ai + bj - n), min(ai, bj) + 1):
                log_p = fixed - lg[nij] - lg[ai - nij] - lg[bj - nij] - lg[n - ai - bj + nij]
                emi += nij / n * math.log(n * nij / (ai * bj)) * math.exp(log_p)
    return emi


def ami(x, y) -> float:
    """Adjusted mutual information, normalized by the arithmetic mean of the two entropies."""
    table = contingency(x, y)
    hx = entropy(table.sum(axis=1))
    hy = entropy(table.sum(axis=0))
    if hx == 0 and hy == 0:
        return 1.0
    mi = mutual_information(table)
    emi = expected_mutual_information(table)
    denom = (hx + hy) / 2 - emi
    if denom <= 0:
        # only reachable when both partitions are identical up to float error
        return 1.0
    return (mi - emi) / denom


@dataclass(frozen=True)
class TableCount:
    """Number of non-negative integer matrices with given margins.

    ``omega`` is the exact count when it was computed, ``None`` when only the
    analytic estimate of ``log_omega`` is available.
    """

    log_omega: float
    omega: int | None
    approximate: bool


@lru_cache(maxsize=None)
def _takes(total: int, parts: int, cap: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Multisets of ``parts`` takes in ``[0, cap]`` summing to ``total``, with arrangement counts.

    Takes are listed in non-increasing order; the count is the number of
    distinct ways to assign them to ``parts`` interchangeable rows.
    """
    out = []

    def rec(left: int, slots: int, bound: int, acc: list[int]) -> None:
        if slots == 0:
            if left == 0:
                out.append(tuple(acc))
            return
        for first in range(min(left, bound), -1, -1):
            if first * slots < left:
                break
            acc.append(first)
            rec(left - first, slots - 1, first, acc)
            acc.pop()

    if total <= parts * cap:
        rec(total, parts, cap, [])
    return tuple((t, _arrangements(t)) for t in out)


def _arrangements(takes: tuple[int, ...]) -> int:
    count = math.factorial(len(takes))
    run = 1
    for i in range(1, len(takes) + 1):
        if i < len(takes) and takes[i] == takes[i - 1]:
            run += 1
        else:
            count //= math.factorial(run)
            run = 1
    return count


@lru_cache(maxsize=200_000)
def _children(groups: tuple[tuple[int, int], ...], amount: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Ways to take ``amount`` units from rows grouped as (value, multiplicity).

    Returns (remaining row values, number of distinct row-level assignments) pairs.
    """
    if not groups:
        return (((), 1),) if amount == 0 else ()
    (value, mult), rest = groups[0], groups[1:]
    room_after = sum(v * m for v, m in rest)
    out = []
    for here in range(min(amount, value * mult), -1, -1):
        if amount - here > room_after:
            break
        tails = _children(rest, amount - here)
        if not tails:
            continue
        for takes, ways in _takes(here, mult, value):
            left = tuple(value - t for t in takes)
            for tail, tail_ways in tails:
                out.append((left + tail, ways * tail_ways))
    return tuple(out)


def _group(rows) -> tuple[tuple[int, int], ...]:
    counts: dict[int, int] = {}
    for r in rows:
        if r > 0:
            counts[r] = counts.get(r, 0) + 1
    return tuple(sorted(counts.items(), reverse=True))


def _bounded_compositions(groups: tuple[tuple[int, int], ...], total: int) -> int:
    """Ways to pick ``t_i`` in ``[0, r_i]`` per row with ``sum t_i == total``.

    This is the table count when exactly two columns remain: the coefficient of
    ``x**total`` in the product of ``1 + x + ... + x**r_i``.
    """
    coeffs = [1]
    for value, mult in groups:
        for _ in range(mult):
            width = min(len(coeffs) + value, total + 1)
            nxt = [0] * width
            running = 0
            for k in range(width):
                running += coeffs[k] if k < len(coeffs) else 0
                drop = k - value - 1
                if 0 <= drop < len(coeffs):
                    running -= coeffs[drop]
                nxt[k] = running
            coeffs = nxt
    return coeffs[total] if total < len(coeffs) else 0


@lru_cache(maxsize=4096)
def _count_sorted(rows: tuple[int, ...], cols: tuple[int, ...]) -> int:
    @lru_cache(maxsize=None)
    def go(groups: tuple[tuple[int, int], ...], j: int) -> int:
        if j >= len(cols) - 1:
            return 1
        if j == len(cols) - 2:
            return _bounded_compositions(groups, cols[j])
        merged: dict[tuple[tuple[int, int], ...], int] = {}
        for left, ways in _children(groups, cols[j]):
            key = _group(left)
            merged[key] = merged.get(key, 0) + ways
        return sum(ways * go(key, j + 1) for key, ways in merged.items())

    if not cols:
        return 1
    return go(_group(rows), 0)


def _count_exact(rows: Sequence[int], cols: Sequence[int]) -> int:
    rows = tuple(sorted((int(r) for r in rows if r > 0), reverse=True))
    cols = tuple(sorted((int(c) for c in cols if c > 0), reverse=True))
    # the count is symmetric under transposition; the shorter margin as rows keeps states few
    if (len(cols), cols) < (len(rows), rows):
        rows, cols = cols, rows
    return _count_sorted(rows, cols)


def _log_binom(top: float, bottom: float) -> float:
    return math.lgamma(top + 1) - math.lgamma(bottom + 1) - math.lgamma(top - bottom + 1)


def log_count_estimate(rows: Sequence[int], cols: Sequence[int]) -> float:
    """Second-order estimate of ``log Omega`` from Dirichlet-multinomial moment matching.

    Each column is spread uniformly over the rows; the induced row-sum
    distribution is replaced by a Dirichlet-multinomial whose concentration
    matches its variance.
    """
    rows = [r for r in rows if r > 0]
    cols = [c for c in cols if c > 0]
    n = sum(rows)
    m = len(rows)
    if m <= 1 or len(cols) <= 1:
        return 0.0
    sq = sum(c * c for c in cols)
    log_cols = sum(_log_binom(c + m - 1, m - 1) for c in cols)
    if sq == n:
        # concentration diverges: the row sums become multinomial
        log_rows = math.lgamma(n + 1) - sum(math.lgamma(r + 1) for r in rows) - n * math.log(m)
        return log_cols + log_rows
    alpha = (n * n - n + (n * n - sq) / m) / (sq - n)
    log_rows = sum(
        math.lgamma(r + alpha) - math.lgamma(alpha) - math.lgamma(r + 1) for r in rows
    ) - (math.lgamma(n + m * alpha) - math.lgamma(m * alpha) - math.lgamma(n + 1))
    return log_cols + log_rows


def count_tables(a: Sequence[int], b: Sequence[int], exact: bool | None = None) -> TableCount:
    """Count non-negative integer matrices with row sums ``a`` and column sums ``b``.

    Counted exactly when ``sum(a) <= 40`` and ``len(a) * len(b) <= 64`` (or
    when ``exact=True``), otherwise estimated analytically.
    """
    a = [int(v) for v in a]
    b = [int(v) for v in b]
    if any(v < 0 for v in a + b):
        raise MetricError("margins must be non-negative")
    if sum(a) != sum(b):
        raise MetricError(f"row sums total {sum(a)} but column sums total {sum(b)}")
    if exact is None:
        exact = sum(a) <= EXACT_COUNT_MAX_N and len(a) * len(b) <= EXACT_COUNT_MAX_CELLS
    if exact:
        omega = _count_exact(a, b)
        return TableCount(math.log(omega), omega, False)
    return TableCount(log_count_estimate(a, b), None, True)


def rmi_details(x, y_reference) -> tuple[float, bool]:
    """Normalized reduced mutual information and whether any table count was estimated."""
    table = contingency(x, y_reference)
    n = int(table.sum())
    a = table.sum(axis=1)
    b = table.sum(axis=0)
    cross = count_tables(a, b)
    self_count = count_tables(b, b)
    reference = entropy(b) - self_count.log_omega / n
    if reference <= 0:
        raise MetricError("reference partition too coarse: its reduced self-information is not positive")
    value = (mutual_information(table) - cross.log_omega / n) / reference
    return value, cross.approximate or self_count.approximate


def rmi(x, y_reference) -> float:
    """Reduced mutual information of ``x`` against ``y_reference``, normalized by the reference.

    Asymmetric: ``rmi(y, y) == 1`` and values can be negative.
    """
    return rmi_details(x, y_reference)[0]


def ecs(x, y, alpha: float = 0.9) -> float:
    """Element-centric similarity of two flat partitions.

    Evaluated per contingency cell in exact rational arithmetic, so
    ``ecs(singletons, whole) == 1/n`` holds exactly.
    """
    if not 0 < alpha < 1:
        raise MetricError(f"alpha must lie in (0, 1), got {alpha}")
    table = contingency(x, y)
    n = int(table.sum())
    al = Fraction(repr(alpha)) if isinstance(alpha, float) else Fraction(alpha)
    a = [int(v) for v in table.sum(axis=1)]
    b = [int(v) for v in table.sum(axis=0)]
    total = Fraction(0)
    for u, v in zip(*np.nonzero(table)):
        nuv, au, bv = int(table[u, v]), a[u], b[v]
        pa, pb = al / au, al / bv
        l1 = nuv * abs(pa - pb) + (au - nuv) * pa + (bv - nuv) * pb
        total += nuv * (1 - l1 / (2 * al))
    return float(total / n)


def gop(q_alg, q_star) -> float:
    """Fraction of the maximum modularity reached; 0 for negative modularity."""
    if q_star <= 0:
        raise MetricError(f"GOP is undefined for non-positive maximum modularity {q_star}")
    if q_alg < 0:
        return 0.0
    if q_alg > q_star:
        if float(q_alg - q_star) <= GOP_GUARD:
            return 1.0
        raise MetricError(f"modularity {q_alg} exceeds the supposed maximum {q_star}")
    return float(Fraction(q_alg) / Fraction(q_star)) if not isinstance(q_alg, float) else q_alg / float(q_star)


MEASURES: dict[str, Callable] = {"ami": ami, "rmi": rmi, "ecs": ecs}


def best_over_optima(x, optima: Sequence, measure: str | Callable = "ami") -> float:
    """Largest similarity of ``x`` to any optimal partition (optimum is the reference side)."""
    if not optima:
        raise MetricError("need at least one optimal partition")
    fn = MEASURES[measure] if isinstance(measure, str) else measure
    values = []
    errors = []
    for opt in optima:
        try:
            values.append(fn(x, opt))
        except MetricError as exc:
            errors.append(exc)
    if not values:
        raise errors[0]
    return max(values)


@dataclass(frozen=True)
class SimilarityReport:
    gop: float
    ami: float
    rmi: float
    ecs: float
    optima_count: int
    rmi_approximate: bool = False
    k_star: int = 0


def similarity_report(x, q_alg, optima: Sequence[Partition], q_star) -> SimilarityReport:
    """GOP plus the best AMI, RMI and ECS over all optimal partitions."""
    best_rmi = None
    approx = False
    for opt in optima:
        try:
            value, flag = rmi_details(x, opt)
        except MetricError:
            continue
        if best_rmi is None or value > best_rmi:
            best_rmi, approx = value, flag
    if best_rmi is None:
        raise MetricError("no optimal partition can serve as an RMI reference")
    amis = [ami(x, opt) for opt in optima]
    best = int(np.argmax(amis))
    return SimilarityReport(
        gop=gop(q_alg, q_star),
        ami=amis[best],
        rmi=best_rmi,
        ecs=best_over_optima(x, optima, "ecs"),
        optima_count=len(optima),
        rmi_approximate=approx,
        k_star=len(set(_labels(optima[best]))),
    )
