import math
import random

import pytest

from streamdag import (StreamSpec, batch_depth_stats, build_dag,
                       classify_active, generate_scale_free, longest_path,
                       make_batches, parse_csv, wavefront_schedule)
from streamdag.compgraph import KIND_STATE, CompDag, KIND_INIT
from streamdag.errors import GraphError

from helpers import brute_longest_path, min_schedule_steps, random_dag


def chain_dag(n: int) -> CompDag:
    """x -> h1 -> ... -> hn as a computational DAG."""
    dag = CompDag()
    prev = dag.add_node(KIND_INIT, 1, 0)
    for i in range(n):
        cur = dag.add_node(KIND_STATE, 1, 0, event=i)
        dag.add_edge(prev, cur)
        prev = cur
    return dag


def test_roots_only_depth_zero():
    dag = CompDag()
    dag.add_node(KIND_INIT, 1, 0)
    dag.add_node(KIND_INIT, 2, 0)
    report = longest_path(dag)
    assert report.depth == 0
    assert report.critical_path == []
    assert wavefront_schedule(dag).step_count == 0


def test_six_layer_chain_depth():
    report = longest_path(chain_dag(6))
    assert report.depth == 6
    assert report.work == 6
    assert len(report.critical_path) == 6


def test_oracle_equivalence_random_dags():
    rng = random.Random(123)
    for _ in range(300):
        dag = random_dag(rng, max_nodes=200)
        assert longest_path(dag).depth == brute_longest_path(dag)


def test_oracle_equivalence_stream_dags():
    rng = random.Random(9)
    for _ in range(60):
        spec = StreamSpec(n_users=rng.randint(2, 12), n_items=rng.randint(2, 12),
                          n_events=rng.randint(0, 80), seed=rng.randint(0, 10**6))
        s = generate_scale_free(spec)
        actives = classify_active(s, rng.choice([math.inf, 3, 8]),
                                  rng.choice([math.inf, 3, 8]))
        dag = build_dag(s, actives)
        assert longest_path(dag).depth == brute_longest_path(dag)


def test_critical_path_is_valid_witness():
    rng = random.Random(5)
    for _ in range(50):
        dag = random_dag(rng, max_nodes=80)
        report = longest_path(dag)
        path = report.critical_path
        assert len(path) == report.depth
        for a, b in zip(path, path[1:]):
            assert a in dag.pred[b]
        assert all(dag.kinds[i] == KIND_STATE for i in path)


def test_cycle_detection():
    dag = chain_dag(3)
    states = dag.state_indices()
    dag.add_edge(states[2], states[0])
    with pytest.raises(GraphError, match="cycle"):
        longest_path(dag)


def test_schedule_validity_properties():
    rng = random.Random(31)
    for _ in range(40):
        dag = random_dag(rng, max_nodes=60)
        sched = wavefront_schedule(dag)
        level_of = {}
        for lvl, nodes in enumerate(sched.levels):
            for n in nodes:
                level_of[n] = lvl
        # disjoint cover of exactly the states
        assert sorted(level_of) == dag.state_indices()
        for src in range(len(dag)):
            for dst in dag.succ[src]:
                if dag.kinds[src] == KIND_STATE:
                    assert level_of[src] < level_of[dst]
        assert sched.step_count == longest_path(dag).depth


def test_schedule_minimality_small_dags():
    rng = random.Random(77)
    for _ in range(40):
        dag = random_dag(rng, max_nodes=12)
        depth = longest_path(dag).depth
        assert min_schedule_steps(dag, depth)
        if depth > 0:
            assert not min_schedule_steps(dag, depth - 1)


def test_schedule_levels_text():
    sched = wavefront_schedule(chain_dag(3))
    assert sched.emit_levels() == "1\n2\n3\n"


def test_batch_stats_single_batch_is_whole():
    s = generate_scale_free(StreamSpec(20, 20, 300, seed=1))
    actives = classify_active(s, math.inf, math.inf)
    stats = batch_depth_stats(s, actives, make_batches(s, 1))
    assert len(stats.reports) == 1
    assert stats.reports[0].depth == longest_path(build_dag(s, actives)).depth


def test_doubling_batches_never_deepens():
    s = generate_scale_free(StreamSpec(30, 30, 2000, seed=17))
    actives = classify_active(s, math.inf, math.inf)
    prev = None
    for n_batches in (1, 2, 4, 8, 16):
        stats = batch_depth_stats(s, actives, make_batches(s, n_batches))
        if prev is not None:
            assert stats.mean_depth <= prev
        prev = stats.mean_depth


def test_fractional_means():
    s = generate_scale_free(StreamSpec(30, 30, 999, seed=23))
    actives = classify_active(s, math.inf, math.inf)
    stats = batch_depth_stats(s, actives, make_batches(s, 4))
    assert len(stats.reports) == 4
    assert stats.mean_depth == sum(r.depth for r in stats.reports) / 4
