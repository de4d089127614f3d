import pytest

from conftest import karate, random_graph, random_suite, two_triangles
from modgap.exact import brute_force_max
from modgap.graph import Graph, GraphError, ModularityParams, Partition, connected_components, modularity
from modgap.heuristics import HEURISTICS, HeuristicConfig, cnm, combo, leiden, louvain, run_heuristic

P = ModularityParams()
NAMES = sorted(HEURISTICS)


@pytest.mark.parametrize("name", NAMES)
def test_two_triangles_planted_split(name):
    x = run_heuristic(name, two_triangles(), HeuristicConfig(seed=1))
    assert x == Partition((0, 0, 0, 1, 1, 1))


@pytest.mark.parametrize("name", NAMES)
def test_never_beats_the_optimum(name):
    for g in random_suite(60):
        q_star = brute_force_max(g, P).q_lb
        x = run_heuristic(name, g, HeuristicConfig(seed=3))
        assert x.n == g.n
        assert modularity(g, x) <= q_star


@pytest.mark.parametrize("name", NAMES)
def test_deterministic_for_fixed_seed(name):
    g = karate()
    assert run_heuristic(name, g, HeuristicConfig(seed=7)) == run_heuristic(name, g, HeuristicConfig(seed=7))


@pytest.mark.parametrize("fn", [louvain, leiden, cnm, combo])
def test_traces_are_monotone(fn):
    for seed in range(5):
        trace = []
        g = random_graph(seed, n=16, p=0.25)
        fn(g, HeuristicConfig(seed=seed), trace=trace)
        assert trace
        assert all(b >= a for a, b in zip(trace, trace[1:]))


def _community_connected(g: Graph, x: Partition) -> bool:
    for members in x.communities():
        sub, _ = g.subgraph(members)
        if len(connected_components(sub)) > 1:
            return False
    return True


def test_leiden_communities_are_connected():
    for seed in range(30):
        g = random_graph(seed, n=20, p=0.15)
        assert _community_connected(g, leiden(g, HeuristicConfig(seed=seed)))


def test_louvain_is_a_local_optimum():
    g = karate()
    x = louvain(g, HeuristicConfig(seed=2))
    q = modularity(g, x)
    labels = list(x.assignment)
    for v in range(g.n):
        for c in set(labels) | {max(labels) + 1}:
            y = labels.copy()
            y[v] = c
            assert modularity(g, Partition(tuple(y))) <= q


def test_karate_quality():
    g = karate()
    for name in ("louvain", "leiden", "combo"):
        assert float(modularity(g, run_heuristic(name, g, HeuristicConfig()))) > 0.41
    assert float(modularity(g, cnm(g))) == pytest.approx(0.3807, abs=1e-4)


def test_combo_at_least_cnm_on_most_instances():
    wins = 0
    suite = random_suite(200)
    for g in suite:
        wins += modularity(g, combo(g)) >= modularity(g, cnm(g))
    assert wins / len(suite) >= 0.9


def test_relabel_invariant_start():
    g = karate()
    base = louvain(g, HeuristicConfig(seed=4), initial=Partition.singletons(g.n))
    assert base == louvain(g, HeuristicConfig(seed=4))


def test_gamma_changes_granularity():
    g = karate()
    coarse = louvain(g, HeuristicConfig(gamma=0.5))
    fine = louvain(g, HeuristicConfig(gamma=2))
    assert coarse.k < fine.k


def test_config_validation_and_edgeless():
    with pytest.raises(ValueError):
        HeuristicConfig(max_passes=0)
    with pytest.raises(ValueError):
        HeuristicConfig(theta=0)
    with pytest.raises(GraphError):
        louvain(Graph(3, ()))
    with pytest.raises(ValueError, match="unknown heuristic"):
        run_heuristic("nope", two_triangles(), HeuristicConfig())
