import math

import numpy as np
import pytest

from streamdag import (StreamSpec, build_dag, classify_active,
                       eight_event_fixture, generate_scale_free,
                       generate_uniform, longest_path)
from streamdag.errors import ValidationError

from helpers import brute_longest_path, exhaustive_best_subset_depth


def degree_counts(stream):
    return (np.bincount(stream.user, minlength=stream.n_users),
            np.bincount(stream.item, minlength=stream.n_items))


def test_zero_events_empty_stream():
    s = generate_scale_free(StreamSpec(n_users=4, n_items=4, n_events=0))
    assert len(s) == 0
    assert len(generate_uniform(StreamSpec(4, 4, 0))) == 0


def test_single_pair_forced():
    s = generate_scale_free(StreamSpec(n_users=1, n_items=1, n_events=5))
    assert list(s.user) == [0] * 5
    assert list(s.item) == [0] * 5
    assert list(s.time) == [1, 2, 3, 4, 5]


def test_determinism_same_spec():
    spec = StreamSpec(n_users=2, n_items=2, n_events=1000, seed=77,
                      feature_dim=3)
    a = generate_uniform(spec)
    b = generate_uniform(spec)
    for field in ("user", "item", "time", "label", "feat"):
        assert np.array_equal(getattr(a, field), getattr(b, field))
    c = generate_scale_free(spec)
    d = generate_scale_free(spec)
    assert np.array_equal(c.user, d.user) and np.array_equal(c.feat, d.feat)


def test_invalid_specs_name_the_field():
    with pytest.raises(ValidationError, match="n_users"):
        generate_scale_free(StreamSpec(0, 1, 1))
    with pytest.raises(ValidationError, match="n_events"):
        generate_uniform(StreamSpec(1, 1, -1))
    with pytest.raises(ValidationError, match="attachment_exponent"):
        generate_scale_free(StreamSpec(1, 1, 1, attachment_exponent=-2.0))


def test_timestamps_strictly_increase():
    s = generate_scale_free(StreamSpec(10, 10, 500, seed=3))
    assert np.all(np.diff(s.time) > 0)


def test_scale_free_top_share_regression():
    # Measured once on this exact spec and frozen; the 30% floor is the
    # heavy-tail requirement, the tight band is the determinism regression.
    s = generate_scale_free(StreamSpec(1000, 1000, 100000, seed=42))
    _, items = degree_counts(s)
    share = np.sort(items)[::-1][:10].sum() / len(s)
    assert share >= 0.30
    assert share == pytest.approx(0.35924, abs=1e-9)


def test_uniform_max_degree_regression():
    s = generate_uniform(StreamSpec(100, 100, 10000, seed=0))
    users, items = degree_counts(s)
    mean = len(s) / 100
    assert users.max() <= 3 * mean and items.max() <= 3 * mean
    # frozen observed maxima for this seed
    assert int(users.max()) == 125
    assert int(items.max()) == 127


def test_heavy_tail_ccdf_witness():
    spec = StreamSpec(500, 500, 50000, seed=7)
    sf = generate_scale_free(spec)
    uni = generate_uniform(spec)
    mean = spec.n_events / spec.n_items
    _, sf_items = degree_counts(sf)
    _, uni_items = degree_counts(uni)
    sf_ccdf = (sf_items >= 10 * mean).mean()
    uni_ccdf = (uni_items >= 10 * mean).mean()
    assert sf_ccdf >= 10 * max(uni_ccdf, 1e-9)


def test_fixture_shape():
    s = eight_event_fixture()
    assert len(s) == 8
    nodes = {(1, int(u)) for u in s.user} | {(2, int(v)) for v in s.item}
    assert len(nodes) == 4


def test_fixture_depth_six_by_oracle():
    s = eight_event_fixture()
    actives = classify_active(s, math.inf, math.inf)
    dag = build_dag(s, actives)
    assert brute_longest_path(dag) == 6
    assert longest_path(dag).depth == 6


def test_fixture_three_dnodes_reach_depth_three():
    s = eight_event_fixture()
    dag = build_dag(s, classify_active(s, math.inf, math.inf))
    assert exhaustive_best_subset_depth(dag, 3) <= 3
