import math

import numpy as np
import pytest

from abcd.dags import (
    Dag,
    DagError,
    GraphPrior,
    LOG_ZERO,
    enumerate_dags,
    log_prior,
    log_prior_vector,
    shd,
)

from oracles import brute_force_dag_edge_sets


def test_enumeration_counts_match_brute_force():
    # d=1 -> 1, d=2 -> 3, d=3 -> 25, d=4 -> 543
    for d, expected in [(1, 1), (2, 3), (3, 25), (4, 543)]:
        dags = enumerate_dags(d)
        assert len(dags) == expected
        oracle = brute_force_dag_edge_sets(d)
        assert len(oracle) == expected
        assert {frozenset(g.edges) for g in dags} == set(oracle)


def test_d2_universe_is_exactly_the_three_graphs():
    dags = enumerate_dags(2)
    assert {g.edges for g in dags} == {(), ((0, 1),), ((1, 0),)}


def test_enumeration_order_is_lexicographic_and_duplicate_free():
    for d in (2, 3, 4):
        dags = enumerate_dags(d)
        flats = [g.flat() for g in dags]
        assert flats == sorted(flats)
        assert len(set(flats)) == len(flats)


def test_every_enumerated_dag_is_acyclic_by_dfs():
    for g in enumerate_dags(3):
        # reuse the brute-force DFS checker on its own
        from oracles import _acyclic_dfs

        assert _acyclic_dfs(g.d, list(g.edges))
        # topo order consistency
        pos = {n: k for k, n in enumerate(g.topo_order)}
        for child, parents in enumerate(g.parent_sets):
            for p in parents:
                assert pos[p] < pos[child]


def test_enumerate_rejects_out_of_range():
    for d in (0, -1, 6, 12):
        with pytest.raises(DagError, match="5"):
            enumerate_dags(d)


def test_dag_construction_invariants():
    with pytest.raises(DagError):
        Dag.from_edges(2, [(0, 1), (1, 0)])  # cycle
    with pytest.raises(DagError):
        Dag.from_edges(2, [(0, 0)])  # self loop
    with pytest.raises(DagError):
        Dag.from_edges(2, [(0, 5)])  # out of range
    g = Dag.from_edges(3, [(0, 1), (1, 2)])
    assert g.parent_sets == ((), (0,), (1,))
    assert g.n_edges == 2


def test_dag_json_round_trip():
    g = Dag.from_edges(4, [(0, 2), (1, 2), (2, 3)])
    assert Dag.from_json(g.to_json()) == g
    assert g.to_json()["edges"] == [[0, 2], [1, 2], [2, 3]]


def test_uniform_prior_is_log_one_third_on_d2():
    universe = enumerate_dags(2)
    for g in universe:
        assert log_prior(g, GraphPrior(), universe) == pytest.approx(math.log(1 / 3), abs=1e-12)


def test_sparsity_prior_d2_weights():
    # weights 1, 1/2, 1/2 -> normalised [0.5, 0.25, 0.25]
    universe = enumerate_dags(2)
    vec = np.exp(log_prior_vector(GraphPrior(kind="sparsity"), universe))
    by_edges = {g.n_edges: p for g, p in zip(universe, vec)}
    assert by_edges[0] == pytest.approx(0.5, abs=1e-12)
    assert by_edges[1] == pytest.approx(0.25, abs=1e-12)


def test_reference_prior_peaks_at_reference():
    universe = enumerate_dags(3)
    ref = Dag.from_edges(3, [(0, 1), (1, 2)])
    vec = log_prior_vector(GraphPrior(kind="reference", reference_graph=ref), universe)
    assert universe[int(np.argmax(vec))] == ref


def test_every_prior_kind_normalises():
    universe = enumerate_dags(3)
    table = {g: 1.0 + g.n_edges for g in universe}
    priors = [
        GraphPrior(),
        GraphPrior(kind="sparsity"),
        GraphPrior(kind="reference", reference_graph=universe[7]),
        GraphPrior(kind="explicit", explicit_table=table),
        GraphPrior(kind="sparsity", max_edges=2),
    ]
    for prior in priors:
        vec = log_prior_vector(prior, universe)
        assert math.fsum(math.exp(v) for v in vec) == pytest.approx(1.0, abs=1e-12)


def test_max_edges_cap_gives_log_zero():
    universe = enumerate_dags(3)
    vec = log_prior_vector(GraphPrior(max_edges=1), universe)
    for g, v in zip(universe, vec):
        if g.n_edges > 1:
            assert v == LOG_ZERO
        else:
            assert math.isfinite(v)


def test_prior_error_cases():
    universe = enumerate_dags(2)
    with pytest.raises(DagError):
        GraphPrior(kind="reference")  # missing reference graph
    with pytest.raises(DagError):
        GraphPrior(kind="bogus")
    partial = {universe[0]: 1.0}
    with pytest.raises(DagError, match="missing"):
        log_prior_vector(GraphPrior(kind="explicit", explicit_table=partial), universe)
    with pytest.raises(DagError):
        log_prior(universe[0], GraphPrior(), [])


def test_shd_examples():
    a = Dag.from_edges(2, [(0, 1)])
    b = Dag.from_edges(2, [(1, 0)])
    empty3 = Dag.from_edges(3, [])
    chain3 = Dag.from_edges(3, [(0, 1), (1, 2)])
    assert shd(a, a) == 0
    assert shd(a, b) == 1  # one reversal
    assert shd(empty3, chain3) == 2  # two additions
    with pytest.raises(DagError):
        shd(a, empty3)


def test_shd_is_a_metric_on_sampled_triples():
    universe = enumerate_dags(3)
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b, c = (universe[k] for k in rng.integers(len(universe), size=3))
        assert shd(a, b) == shd(b, a) >= 0
        assert (shd(a, b) == 0) == (a == b)
        assert shd(a, c) <= shd(a, b) + shd(b, c)
