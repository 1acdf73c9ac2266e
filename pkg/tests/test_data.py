import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condtau import (Box, BoxFamily, CodeSet, Interval, Sample, box_family_from_config,
                     category_family, interval_family, load_sample, members, overlap_fraction,
                     pair_list, quantile_family)
from condtau.data import parse_roles
from condtau.errors import IngestionError, ValidationError

from oracles import member_scan


def write_csv(path, header, rows):
    path.write_text(",".join(header) + "\n" + "\n".join(",".join(map(str, r)) for r in rows) + "\n")
    return path


def test_csv_roles_give_expected_block_sizes(tmp_path):
    f = write_csv(tmp_path / "a.csv", ["X1", "X2", "X3", "X4"],
                  [[1, 2, 3, 4], [2, 1, 0, 5], [3, 3, 1, 6]])
    s = load_sample(f, "X1:cond,X2:cond,X3:conditioning")
    assert s.p == 2 and s.q == 1 and s.n == 3
    assert s.conditioned_names == ["X1", "X2"]
    assert s.conditioning_names == ["X3"]
    np.testing.assert_array_equal(s.xj[:, 0], [3, 0, 1])


def test_blank_cell_error_names_row_and_column(tmp_path):
    f = write_csv(tmp_path / "a.csv", ["a", "b", "c"], [[1, 2, 3], [4, "", 6]])
    with pytest.raises(IngestionError) as info:
        load_sample(f, {"a": "conditioned", "b": "conditioned", "c": "conditioning"})
    assert info.value.row == 1
    assert info.value.column == "b"
    assert "row 1" in str(info.value)


def test_non_numeric_cell_rejected(tmp_path):
    f = write_csv(tmp_path / "a.csv", ["a", "b", "c"], [[1, 2, 3], [4, "x", 6]])
    with pytest.raises(IngestionError, match="non-numeric"):
        load_sample(f, "a:i,b:i,c:j")


def test_needs_two_conditioned_and_one_conditioning(tmp_path):
    f = write_csv(tmp_path / "a.csv", ["a", "b", "c"], [[1, 2, 3], [4, 5, 6]])
    with pytest.raises(IngestionError):
        load_sample(f, "a:i,c:j")
    with pytest.raises(IngestionError):
        load_sample(f, "a:i,b:i")


def test_unknown_role_rejected():
    with pytest.raises(ValidationError):
        parse_roles("a:weird")
    assert parse_roles('{"a": "COND", "b": "j"}') == {"a": "conditioned", "b": "conditioning"}


def test_categorical_column_encoded_as_codes(tmp_path):
    rng = np.random.default_rng(0)
    years = ["2015", "2016", "2017", "2018", "2019"]
    rows = [[*rng.normal(size=3).round(6), years[i % 5]] for i in range(1435)]
    f = write_csv(tmp_path / "ins.csv", ["claims", "premium", "cost", "year"], rows)
    s = load_sample(f, "claims:i,premium:i,cost:i,year:cat")
    assert s.n == 1435 and s.p == 3
    fam = category_family(s, 0)
    assert fam.m == 5 and fam.labels == tuple(years)
    assert sum(members(s, b).size for b in fam.boxes) == 1435


def test_universal_and_empty_boxes():
    s = Sample.from_blocks(np.arange(10.0).reshape(5, 2), [3.0, 1.0, 4.0, 1.0, 5.0])
    np.testing.assert_array_equal(members(s, Box.universal(1)), np.arange(5))
    empty = Box.on(1, 0, Interval(-math.inf, 1.0 - 1))
    assert members(s, empty).size == 0


def test_six_point_box_matches_scan():
    xj = np.array([-1.0, 0.0, 0.5, 2.0, 2.5, 1.0])
    s = Sample.from_blocks(np.zeros((6, 2)) + np.arange(6)[:, None], xj)
    box = Box.on(1, 0, Interval(0.0, 2.0))
    expected = member_scan(xj[:, None], {0: (0.0, 2.0, True, False)})
    np.testing.assert_array_equal(members(s, box), expected)
    assert expected == [2, 3, 5]


def test_overlap_fraction_examples():
    rng = np.random.default_rng(3)
    s = Sample.from_blocks(rng.normal(size=(50, 2)), rng.uniform(0, 1, 50))
    a = Box.on(1, 0, Interval(0.0, 0.6))
    b = Box.on(1, 0, Interval(0.6, 1.0))
    inner = Box.on(1, 0, Interval(0.2, 0.4))
    assert overlap_fraction(s, a, a) == members(s, a).size / 50
    assert overlap_fraction(s, a, b) == 0.0
    assert overlap_fraction(s, a, inner) == members(s, inner).size / 50


def test_interval_openness():
    iv = Interval(0.0, 1.0, lower_open=False, upper_open=True)
    np.testing.assert_array_equal(iv.contains(np.array([0.0, 0.5, 1.0])), [True, True, False])
    assert Interval(0, 2).intersect(Interval(1, 3)) == Interval(1, 2)
    with pytest.raises(ValidationError):
        Interval(2, 1)


def test_codeset_box():
    s = Sample.from_blocks(np.zeros((4, 2)) + np.arange(4)[:, None], [0, 1, 2, 1])
    box = Box.on(1, 0, CodeSet(frozenset([1])))
    np.testing.assert_array_equal(members(s, box), [1, 3])


def test_pair_enumeration_order():
    assert pair_list(3) == [(0, 1), (0, 2), (1, 2)]
    assert all(a < b for a, b in pair_list(6))
    with pytest.raises(ValidationError):
        pair_list(1)


def test_box_config_round_trip():
    rng = np.random.default_rng(1)
    s = Sample.from_blocks(rng.normal(size=(40, 2)), rng.normal(size=(40, 2)), ["a", "b", "u", "v"])
    config = {"boxes": [[{"column": "u", "upper": 0}], [{"column": "u", "lower": 0},
                                                        {"column": "v", "upper": 1.5}]]}
    fam = box_family_from_config(json.loads(json.dumps(config)), s)
    assert fam.m == 2 and fam.disjoint
    np.testing.assert_array_equal(fam.membership(s)[0], s.xj[:, 0] <= 0)
    np.testing.assert_array_equal(fam.membership(s)[1], (s.xj[:, 0] > 0) & (s.xj[:, 1] <= 1.5))
    with pytest.raises(ValidationError):
        box_family_from_config([{"column": "a", "upper": 0}], s)


def test_quantile_family_balanced():
    rng = np.random.default_rng(2)
    s = Sample.from_blocks(rng.normal(size=(400, 2)), rng.normal(size=400))
    fam = quantile_family(s, 0, 4)
    assert [members(s, b).size for b in fam.boxes] == [100] * 4


def test_sample_rejects_non_finite():
    with pytest.raises(IngestionError):
        Sample.from_blocks(np.array([[1.0, np.nan], [2.0, 3.0]]), [0.0, 1.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=40), st.floats(-5, 5), st.floats(0, 5))
def test_members_order_preserving_idempotent_and_counts(xj, lo, width):
    xj = np.array(xj)
    s = Sample.from_blocks(np.column_stack([xj, -xj]), xj)
    box = Box.on(1, 0, Interval(lo, lo + width))
    idx = members(s, box)
    assert np.all(np.diff(idx) > 0)
    if idx.size >= 2:
        sub = s.take(idx)
        np.testing.assert_array_equal(members(sub, box), np.arange(idx.size))
    assert idx.size == round(s.n * overlap_fraction(s, box, box))
    assert list(idx) == member_scan(xj[:, None], {0: (lo, lo + width, True, False)})


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=40),
       st.lists(st.floats(-4, 4), min_size=1, max_size=5, unique=True))
def test_partition_counts_sum_to_n(xj, edges):
    s = Sample.from_blocks(np.zeros((len(xj), 2)), np.array(xj))
    fam = interval_family(sorted(edges))
    assert sum(members(s, b).size for b in fam.boxes) == s.n
    assert fam.is_disjoint_on(s)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=30),
       st.tuples(st.floats(-5, 5), st.floats(0, 5)), st.tuples(st.floats(-5, 5), st.floats(0, 5)))
def test_overlap_fraction_symmetric(xj, b1, b2):
    s = Sample.from_blocks(np.zeros((len(xj), 2)), np.array(xj))
    k = Box.on(1, 0, Interval(b1[0], b1[0] + b1[1]))
    l = Box.on(1, 0, Interval(b2[0], b2[0] + b2[1]))
    assert overlap_fraction(s, k, l) == overlap_fraction(s, l, k)
