import math
import random
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from sklearn.metrics import adjusted_mutual_info_score

from modgap.graph import Partition
from modgap.metrics import (
    MetricError,
    ami,
    best_over_optima,
    contingency,
    count_tables,
    ecs,
    entropy,
    expected_mutual_information,
    gop,
    log_count_estimate,
    mutual_information,
    rmi,
    rmi_details,
    similarity_report,
)

# nodes 1..6 with x = {1,2,3,5},{4,6} and y = {1,2,5},{3,4,6}
TOY_X = [0, 0, 0, 1, 0, 1]
TOY_Y = [0, 0, 1, 1, 0, 1]


def random_labels(rng, n, k):
    return [rng.randrange(k) for _ in range(n)]


# ---- independent oracles -------------------------------------------------


def naive_mi_terms(x, y):
    n = len(x)
    hx = hy = mi = 0.0
    for u in set(x):
        p = x.count(u) / n
        hx -= p * math.log(p)
    for v in set(y):
        p = y.count(v) / n
        hy -= p * math.log(p)
    for u in set(x):
        for v in set(y):
            nuv = sum(1 for a, b in zip(x, y) if a == u and b == v)
            if nuv:
                mi += nuv / n * math.log(n * nuv / (x.count(u) * y.count(v)))
    return hx, hy, mi


def naive_emi(x, y):
    n = len(x)
    total = 0.0
    for u in set(x):
        a = x.count(u)
        for v in set(y):
            b = y.count(v)
            for nij in range(max(1, a + b - n), min(a, b) + 1):
                prob = Fraction(math.comb(a, nij) * math.comb(n - a, b - nij), math.comb(n, b))
                total += float(prob) * nij / n * math.log(n * nij / (a * b))
    return total


def compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_tables(rows, cols):
    count = 0
    for choice in product(*(list(compositions(r, len(cols))) for r in rows)):
        if all(sum(row[j] for row in choice) == c for j, c in enumerate(cols)):
            count += 1
    return count


def affinity_ecs(x, y, alpha):
    def affinity(lab):
        n = len(lab)
        mat = np.zeros((n, n))
        for i in range(n):
            size = lab.count(lab[i])
            for j in range(n):
                if lab[i] == lab[j]:
                    mat[i, j] = alpha / size
            mat[i, i] += 1 - alpha
        return mat

    diff = np.abs(affinity(list(x)) - affinity(list(y))).sum(axis=1)
    return float(np.mean(1 - diff / (2 * alpha)))


# ---- fixtures and frozen values ----------------------------------------------


def test_gop_fixture_and_edges():
    assert round(gop(0.122, 0.204), 2) == 0.60
    assert gop(0.3, 0.3) == 1
    assert gop(-0.1, 0.204) == 0
    assert gop(Fraction(1, 2), Fraction(1, 2) - Fraction(1, 10**12)) == 1
    with pytest.raises(MetricError):
        gop(0.1, 0)
    with pytest.raises(MetricError):
        gop(0.5, 0.4)


def test_ami_fixture():
    assert ami(TOY_X, TOY_Y) == pytest.approx(0.36, abs=0.005)


def test_rmi_and_ecs_toy_frozen():
    # RMI from exact table counts: Omega((4,2),(3,3)) = 3 and Omega((3,3),(3,3)) = 4
    assert rmi(TOY_X, TOY_Y) == pytest.approx(0.292481250360578, abs=1e-12)
    assert ecs(TOY_X, TOY_Y) == pytest.approx(23 / 36, abs=1e-15)
    assert ecs(TOY_X, TOY_Y) == pytest.approx(affinity_ecs(TOY_X, TOY_Y, 0.9), abs=1e-12)


def test_count_tables_examples():
    assert count_tables([1, 1], [1, 1]).omega == 2
    assert count_tables([2], [1, 1]).omega == 1
    assert count_tables([4, 2], [3, 3]).omega == enumerate_tables([4, 2], [3, 3]) == 3
    with pytest.raises(MetricError):
        count_tables([2, 1], [2])


def test_count_tables_against_enumeration():
    rng = random.Random(4)
    for _ in range(60):
        n = rng.randint(1, 9)
        rows = [c for c in np.bincount([rng.randrange(3) for _ in range(n)]) if c]
        cols = [c for c in np.bincount([rng.randrange(3) for _ in range(n)]) if c]
        got = count_tables(rows, cols)
        assert not got.approximate
        assert got.omega == enumerate_tables(rows, cols)


def test_count_tables_switches_to_estimate():
    big = count_tables([10] * 5, [5] * 10)
    assert big.approximate and big.omega is None
    exact = count_tables([5] * 8, [5] * 8)
    estimate = log_count_estimate([5] * 8, [5] * 8)
    assert not exact.approximate
    assert abs(estimate - exact.log_omega) / exact.log_omega < 0.01


def test_information_terms_match_naive():
    rng = random.Random(9)
    for _ in range(100):
        n = rng.randint(2, 12)
        x = random_labels(rng, n, rng.randint(1, 4))
        y = random_labels(rng, n, rng.randint(1, 4))
        table = contingency(x, y)
        hx, hy, mi = naive_mi_terms(x, y)
        assert entropy(table.sum(axis=1)) == pytest.approx(hx, abs=1e-12)
        assert entropy(table.sum(axis=0)) == pytest.approx(hy, abs=1e-12)
        assert mutual_information(table) == pytest.approx(mi, abs=1e-12)
        assert expected_mutual_information(table) == pytest.approx(naive_emi(x, y), abs=1e-12)


def test_ami_matches_sklearn():
    rng = random.Random(2)
    for _ in range(100):
        n = rng.randint(2, 40)
        x = random_labels(rng, n, rng.randint(1, 6))
        y = random_labels(rng, n, rng.randint(1, 6))
        expected = adjusted_mutual_info_score(x, y, average_method="arithmetic")
        assert ami(x, y) == pytest.approx(expected, abs=1e-9)


def test_ecs_matches_affinity_oracle():
    rng = random.Random(5)
    for _ in range(60):
        n = rng.randint(1, 15)
        x = random_labels(rng, n, rng.randint(1, 5))
        y = random_labels(rng, n, rng.randint(1, 5))
        alpha = rng.choice([0.5, 0.9, 0.99])
        assert ecs(x, y, alpha) == pytest.approx(affinity_ecs(x, y, alpha), abs=1e-12)
        assert ecs(x, y) == pytest.approx(ecs(y, x), abs=1e-15)
        assert 0 <= ecs(x, y) <= 1


@pytest.mark.parametrize("n", range(2, 11))
def test_ecs_singletons_vs_whole(n):
    assert ecs(Partition.singletons(n), Partition.whole(n), 0.9) == 1 / n


def test_identities_and_invariances():
    rng = random.Random(8)
    for _ in range(30):
        n = rng.randint(3, 20)
        x = random_labels(rng, n, rng.randint(2, 5))
        if len(set(x)) < 2:
            continue
        y = random_labels(rng, n, rng.randint(2, 5))
        perm = {c: (c * 7 + 3) % 101 for c in set(x)}
        x2 = [perm[c] for c in x]
        assert ami(x, x) == pytest.approx(1)
        assert rmi(x, x) == pytest.approx(1)
        assert ecs(x, x) == 1
        assert ami(x, y) == pytest.approx(ami(y, x), abs=1e-12)
        assert ami(x2, y) == pytest.approx(ami(x, y), abs=1e-12)
        if len(set(y)) > 1:
            assert rmi(x2, y) == pytest.approx(rmi(x, y), abs=1e-12)
        assert ecs(x2, y) == pytest.approx(ecs(x, y), abs=1e-12)
        assert ami(x, y) <= 1 + 1e-12


def test_degenerate_cases():
    assert ami([0, 0, 0], [1, 1, 1]) == 1
    assert ami(list(range(5)), [0] * 5) == pytest.approx(0, abs=1e-12)
    with pytest.raises(MetricError):
        rmi(list(range(5)), [0] * 5)
    with pytest.raises(MetricError):
        ami([0, 1], [0, 1, 2])
    with pytest.raises(MetricError):
        ecs([0, 1], [0, 1], alpha=1.0)


def test_best_over_optima():
    c4_a = Partition((0, 0, 1, 1))
    c4_b = Partition((0, 1, 1, 0))
    assert best_over_optima(c4_a, [c4_a, c4_b], "ami") == 1
    single = Partition.singletons(4)
    for m in ("ami", "rmi", "ecs"):
        values = [best_over_optima(single, [o], m) for o in (c4_a, c4_b)]
        assert values[0] == pytest.approx(values[1])
        assert best_over_optima(single, [c4_a, c4_b], m) == max(values)
    assert best_over_optima(TOY_X, [TOY_Y], "ecs") == ecs(TOY_X, TOY_Y)
    with pytest.raises(MetricError):
        best_over_optima(c4_a, [], "ami")


def test_similarity_report_of_optimum_is_all_ones():
    opt = Partition((0, 0, 0, 1, 1, 1))
    rep = similarity_report(opt, Fraction(1, 2), [opt], Fraction(1, 2))
    assert (rep.gop, rep.ami, rep.rmi, rep.ecs, rep.optima_count) == (1, 1, 1, 1, 1)
    value, approx = rmi_details(opt, opt)
    assert value == 1 and not approx
