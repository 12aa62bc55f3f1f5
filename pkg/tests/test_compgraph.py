import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamdag import (StreamSpec, build_dag, classify_active,
                       generate_scale_free, generate_uniform, longest_path,
                       parse_csv, validate_dag)
from streamdag.compgraph import (KIND_INIT, KIND_STATE, KIND_STATIC,
                                 expected_counts, export_edge_list,
                                 export_node_table, import_dag)
from streamdag.errors import GraphError


def stream_from_rows(rows, header=b"user_id,item_id,timestamp,label\n"):
    return parse_csv(header + rows).stream


def test_empty_stream_only_roots():
    s = stream_from_rows(b"0,0,1,0\n")
    actives = classify_active(s, 0, 0)  # both endpoints active (1 > 0)
    dag = build_dag(s.slice(0, 0), actives)
    assert len(dag) == 2
    assert dag.n_edges == 0
    assert all(k == KIND_STATIC for k in dag.kinds)


def test_one_event_two_inactive():
    s = stream_from_rows(b"0,0,1,0\n")
    dag = build_dag(s, classify_active(s, math.inf, math.inf))
    kinds = sorted(dag.kinds)
    assert kinds == sorted([KIND_INIT, KIND_INIT, KIND_STATE, KIND_STATE])
    assert dag.n_edges == 4
    states = dag.state_indices()
    for st_idx in states:
        preds = dag.pred[st_idx]
        assert len(preds) == 2
        assert all(dag.kinds[p] == KIND_INIT for p in preds)


def test_one_event_active_item():
    s = stream_from_rows(b"0,0,1,0\n")
    actives = classify_active(s, math.inf, 0)  # item has 1 > 0 interactions
    dag = build_dag(s, actives)
    assert sorted(dag.kinds) == sorted([KIND_STATIC, KIND_INIT, KIND_STATE])
    assert dag.n_edges == 2
    # the active item gets no state node
    assert all(dag.parts[i] == 1 for i in dag.state_indices())
    state = dag.state_indices()[0]
    pred_kinds = sorted(dag.kinds[p] for p in dag.pred[state])
    assert pred_kinds == sorted([KIND_INIT, KIND_STATIC])


def test_both_endpoints_read_pre_event_state():
    # two consecutive events on the same pair: each new state's cross edge
    # must come from the partner's state at the *previous* event
    s = stream_from_rows(b"0,0,1,0\n0,0,2,0\n")
    dag = build_dag(s, classify_active(s, math.inf, math.inf))
    second = [i for i in dag.state_indices() if dag.events[i] == 1]
    for idx in second:
        for p in dag.pred[idx]:
            assert dag.events[p] == 0  # not the partner's event-1 state


def test_validate_passes_on_build_output():
    s = generate_scale_free(StreamSpec(30, 30, 500, seed=8))
    dag = build_dag(s, classify_active(s, 20, 20))
    report = validate_dag(dag)
    assert report.ok, report.violations


def test_validate_flags_cycle():
    s = stream_from_rows(b"0,0,1,0\n0,0,2,0\n")
    dag = build_dag(s, classify_active(s, math.inf, math.inf))
    states = dag.state_indices()
    dag.add_edge(states[-1], states[0])  # back-edge
    report = validate_dag(dag)
    assert not report.ok
    assert any("cycle" in v for v in report.violations)


def test_counts_closed_form_10k():
    s = generate_scale_free(StreamSpec(200, 200, 10000, seed=5))
    actives = classify_active(s, 100, 60)
    dag = build_dag(s, actives)
    nodes, edges = expected_counts(s, actives)
    assert len(dag) == nodes
    assert dag.n_edges == edges


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 200), st.integers(0, 200))
def test_counts_closed_form_property(seed, t1, t2):
    s = generate_uniform(StreamSpec(12, 9, 150, seed=seed))
    actives = classify_active(s, t1, t2)
    dag = build_dag(s, actives)
    nodes, edges = expected_counts(s, actives)
    assert (len(dag), dag.n_edges) == (nodes, edges)
    assert validate_dag(dag).ok


def test_more_actives_never_larger_or_deeper():
    s = generate_scale_free(StreamSpec(60, 60, 3000, seed=13))
    prev_nodes = prev_depth = None
    for thresh in (math.inf, 120, 60, 20):
        actives = classify_active(s, thresh, thresh)
        dag = build_dag(s, actives)
        d = longest_path(dag).depth
        if prev_nodes is not None:
            assert len(dag) <= prev_nodes
            assert d <= prev_depth
        prev_nodes, prev_depth = len(dag), d


def test_indices_topologically_sorted():
    s = generate_scale_free(StreamSpec(40, 40, 800, seed=21))
    dag = build_dag(s, classify_active(s, 30, 30))
    for src, targets in enumerate(dag.succ):
        for dst in targets:
            assert src < dst


def test_export_import_round_trip():
    s = generate_scale_free(StreamSpec(10, 10, 60, seed=2))
    dag = build_dag(s, classify_active(s, 10, 10))
    clone = import_dag(export_node_table(dag), export_edge_list(dag))
    assert clone.kinds == dag.kinds
    assert clone.succ == dag.succ
    assert longest_path(clone).depth == longest_path(dag).depth


def test_import_rejects_bad_edge():
    with pytest.raises(GraphError):
        import_dag([{"kind": "state", "partition": 1, "node": 0, "event": 0}],
                   "0 5\n")


def test_unknown_node_id_errors():
    s = stream_from_rows(b"0,0,1,0\n")
    s.user[0] = 7  # corrupt beyond n_users
    with pytest.raises(GraphError, match="unknown node"):
        build_dag(s, classify_active(s, math.inf, math.inf))
