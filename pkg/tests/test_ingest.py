import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamdag import (StreamSpec, classify_active, generate_scale_free,
                       generate_uniform, make_batches, parse_csv,
                       split_train_valid_test, write_csv)
from streamdag.errors import ParseError, ValidationError

GOLDEN_CSV = """user_id,item_id,timestamp,label,feat_0
0,0,1,1,3
1,1,2,0,2
0,2,3,1,0
2,1,4,0,5
1,0,5,1,1
3,3,6,0,4
2,2,7,1,7
0,1,8,0,6
4,4,9,1,2
3,0,10,0,0
"""


def test_empty_file_with_header():
    result = parse_csv(b"user_id,item_id,timestamp,label\n")
    assert len(result.stream) == 0
    assert result.stream.n_users == 0


def test_sort_contract():
    result = parse_csv(b"user_id,item_id,timestamp,label\n"
                       b"7,1,5,0\n7,2,2,0\n7,3,9,0\n")
    assert list(result.stream.time) == [2, 5, 9]
    assert result.resort_warnings == 1
    # dense remap follows first appearance after the sort
    assert list(result.stream.item) == [0, 1, 2]
    assert result.item_map == {2: 0, 1: 1, 3: 2}


def test_malformed_row_reports_line():
    with pytest.raises(ParseError, match="line 3"):
        parse_csv(b"user_id,item_id,timestamp,label\n1,1,1,0\n1,x,2,0\n")
    with pytest.raises(ParseError, match="line 2"):
        parse_csv(b"user_id,item_id,timestamp,label\n1,1,1\n")


def test_bad_header():
    with pytest.raises(ParseError, match="line 1"):
        parse_csv(b"user,item,ts,label\n")


def test_golden_round_trip(tmp_path):
    src = tmp_path / "in.csv"
    src.write_text(GOLDEN_CSV, encoding="utf-8")
    stream = parse_csv(src).stream
    out = tmp_path / "out.csv"
    write_csv(stream, out)
    assert out.read_bytes() == src.read_bytes()


def test_round_trip_idempotent_on_generated(tmp_path):
    s = generate_scale_free(StreamSpec(20, 20, 200, seed=1, feature_dim=2))
    first = tmp_path / "a.csv"
    write_csv(s, first)
    second = tmp_path / "b.csv"
    write_csv(parse_csv(first).stream, second)
    third = tmp_path / "c.csv"
    write_csv(parse_csv(second).stream, third)
    assert second.read_bytes() == third.read_bytes()


def test_split_small():
    s = generate_uniform(StreamSpec(5, 5, 10, seed=0))
    a, b, c = split_train_valid_test(s, (0.7, 0.1, 0.2))
    assert (len(a), len(b), len(c)) == (7, 1, 2)
    a, b, c = split_train_valid_test(s, (1.0, 0.0, 0.0))
    assert (len(a), len(b), len(c)) == (10, 0, 0)


def test_split_large_exact():
    s = generate_uniform(StreamSpec(10, 10, 1_000_000, seed=0))
    a, b, c = split_train_valid_test(s, (0.8, 0.1, 0.1))
    assert (len(a), len(b), len(c)) == (800_000, 100_000, 100_000)


def test_split_contiguity_no_leakage():
    s = generate_uniform(StreamSpec(5, 5, 100, seed=4))
    a, b, c = split_train_valid_test(s, (0.6, 0.2, 0.2))
    assert a.time[-1] <= b.time[0] <= c.time[0]
    assert len(a) + len(b) + len(c) == 100


def test_split_invalid_fractions():
    s = generate_uniform(StreamSpec(5, 5, 10, seed=0))
    with pytest.raises(ValidationError):
        split_train_valid_test(s, (0.5, 0.2, 0.2))
    with pytest.raises(ValidationError):
        split_train_valid_test(s, (-0.1, 0.6, 0.5))


def test_classify_active_infinite_thresholds():
    s = generate_scale_free(StreamSpec(50, 50, 2000, seed=2))
    act = classify_active(s, math.inf, math.inf)
    assert not act.active_users and not act.active_items


def test_classify_active_strict_inequality():
    s = parse_csv(b"user_id,item_id,timestamp,label\n"
                  + b"".join(f"0,{i},{i + 1},0\n".encode() for i in range(5))
                  ).stream
    assert 0 not in classify_active(s, 5, math.inf).active_users
    assert 0 in classify_active(s, 4, math.inf).active_users


def test_classify_active_monotone_shrink():
    s = generate_scale_free(StreamSpec(300, 300, 20000, seed=6))
    low = classify_active(s, 200, 100)
    high = classify_active(s, 400, 200)
    assert high.active_users <= low.active_users
    assert high.active_items <= low.active_items
    # recount oracle for a handful of members
    counts = np.bincount(s.user, minlength=300)
    for u in low.active_users:
        assert counts[u] > 200


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 500), st.integers(0, 500))
def test_classify_active_monotone_property(t1, t2):
    s = generate_scale_free(StreamSpec(40, 40, 800, seed=11))
    lo, hi = sorted((t1, t2))
    a_hi = classify_active(s, hi, hi)
    a_lo = classify_active(s, lo, lo)
    assert a_hi.active_users <= a_lo.active_users
    assert a_hi.active_items <= a_lo.active_items


def test_make_batches_even():
    s = generate_uniform(StreamSpec(3, 3, 9, seed=0))
    plan = make_batches(s, 3)
    assert [hi - lo for lo, hi in plan] == [3, 3, 3]


def test_make_batches_uneven():
    s = generate_uniform(StreamSpec(3, 3, 10, seed=0))
    plan = make_batches(s, 3)
    sizes = [hi - lo for lo, hi in plan]
    assert sum(sizes) == 10 and max(sizes) - min(sizes) <= 1
    # partition: disjoint, ordered, covering
    flat = [i for lo, hi in plan for i in range(lo, hi)]
    assert flat == list(range(10))


def test_make_batches_arithmetic():
    s = generate_uniform(StreamSpec(10, 10, 30000, seed=0))
    plan = make_batches(s, 300)
    assert all(hi - lo == 100 for lo, hi in plan)


def test_make_batches_errors():
    s = generate_uniform(StreamSpec(3, 3, 5, seed=0))
    with pytest.raises(ValidationError):
        make_batches(s, 6)
    with pytest.raises(ValidationError):
        make_batches(s, 0)
