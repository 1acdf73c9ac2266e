import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condtau import Box, Interval, Sample, d_hat, interval_family, kendall_tau, tau_matrix, tau_pair_box
from condtau.errors import InsufficientSubsampleError
from condtau.estimators import count_pairs, tau_from_counts

from oracles import d_oracle, kendall_tau_a, pair_counts


def one_box_sample(points):
    pts = np.asarray(points, dtype=float)
    return Sample.from_blocks(pts, np.zeros(len(pts)))


UNIVERSAL = Box.universal(1)


def test_perfect_concordance():
    s = one_box_sample([(1, 1), (2, 2), (3, 3)])
    assert tau_pair_box(s, (0, 1), UNIVERSAL) == 1.0


def test_single_discordant_pair():
    s = one_box_sample([(1, 2), (2, 1)])
    assert tau_pair_box(s, (0, 1), UNIVERSAL) == -1.0
    assert tau_pair_box(s, (0, 1), UNIVERSAL, variant=2) == -0.5
    assert tau_matrix(s, interval_family([])).s_n[0] == 0.5


def test_five_points_enumerated():
    pts = [(1, 3), (2, 1), (3, 4), (4, 2), (5, 5)]
    s = one_box_sample(pts)
    x, y = zip(*pts)
    assert pair_counts(x, y) == (7, 3)
    assert tau_pair_box(s, (0, 1), UNIVERSAL) == pytest.approx(0.4, abs=1e-15)


def test_single_universal_box_is_classical_tau():
    rng = np.random.default_rng(5)
    xi = rng.normal(size=(60, 3))
    s = Sample.from_blocks(xi, rng.normal(size=60))
    est = tau_matrix(s, interval_family([]))
    assert est.tau.shape == (3, 1)
    for r, (a, b) in enumerate(est.pairs):
        assert est.tau[r, 0] == pytest.approx(kendall_tau_a(xi[:, a], xi[:, b]), abs=1e-12)


def test_independent_entries_near_zero():
    rng = np.random.default_rng(11)
    s = Sample.from_blocks(rng.normal(size=(10_000, 2)), rng.normal(size=10_000))
    est = tau_matrix(s, interval_family([-0.5, 0.0, 0.7]))
    assert np.all(np.abs(est.tau) < 0.05)


def test_equicorrelated_gaussian_entries_near_half():
    rng = np.random.default_rng(12)
    z = rng.normal(size=(10_000, 2))
    rho = 0.7071
    xi = np.column_stack([z[:, 0], rho * z[:, 0] + np.sqrt(1 - rho ** 2) * z[:, 1]])
    s = Sample.from_blocks(xi, rng.normal(size=10_000))
    est = tau_matrix(s, interval_family([-0.5, 0.5]))
    assert np.all(np.abs(est.tau - 0.5) < 0.03)


def test_d_hat_examples():
    s = one_box_sample([(1, 1), (2, 2), (3, 3)])
    assert d_hat(s, (0, 1), UNIVERSAL) == 0.5
    assert d_hat(s, (0, 1), Box.on(1, 0, Interval(5, 6))) == 0.0
    pts = [(0.3, 1.0), (0.1, 0.2), (0.7, 0.5), (0.9, 0.8)]
    xj = np.array([0.5, 1.5, 0.2, 0.9])
    s4 = Sample.from_blocks(np.array(pts), xj)
    box = Box.on(1, 0, Interval(0.0, 1.0))
    inbox = [0 < v <= 1 for v in xj]
    xs, ys = zip(*pts)
    assert d_hat(s4, (0, 1), box) == d_oracle(xs, ys, inbox)


def test_undersized_box_raises_with_index_and_count():
    s = one_box_sample([(1, 1), (2, 2), (3, 3)])
    s = Sample.from_blocks(s.xi, [0.0, 1.0, 1.0])
    with pytest.raises(InsufficientSubsampleError) as info:
        tau_matrix(s, interval_family([0.5]))
    assert info.value.box == 0 and info.value.count == 1


def test_ties_count_for_neither_side():
    assert count_pairs([1, 1, 2], [1, 2, 2]) == (1, 0)
    assert count_pairs([1, 1, 2], [1, 2, 2], "fast") == (1, 0)


def test_variant_ranges():
    for size in (2, 3, 7):
        total = size * (size - 1) // 2
        lo1, hi1 = tau_from_counts(0, total, size, 1), tau_from_counts(total, 0, size, 1)
        assert (lo1, hi1) == pytest.approx((-1, 1 - 2 / size))
        lo2, hi2 = tau_from_counts(0, total, size, 2), tau_from_counts(total, 0, size, 2)
        assert (lo2, hi2) == pytest.approx((-1 + 1 / size, 1 - 1 / size))
        lo3, hi3 = tau_from_counts(0, total, size, 3), tau_from_counts(total, 0, size, 3)
        assert (lo3, hi3) == pytest.approx((-1 + 2 / size, 1))


points = st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=2, max_size=80)


@settings(max_examples=200, deadline=None)
@given(points)
def test_fast_and_direct_counts_agree_with_oracle(pts):
    x, y = (np.array(c) for c in zip(*pts))
    expected = pair_counts(x, y)
    assert count_pairs(x, y, "direct") == expected
    assert count_pairs(x, y, "fast") == expected


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-1000, 1000), st.integers(-1000, 1000)),
                min_size=2, max_size=60, unique_by=(lambda t: t[0], lambda t: t[1])))
def test_identity_chain_tie_free(pts):
    pts = np.array(pts, dtype=float)
    s = one_box_sample(pts)
    est = tau_matrix(s, interval_family([]))
    sn = est.s_n[0]
    t1, t2, t3 = (est.variant(v)[0, 0] for v in (1, 2, 3))
    assert t1 + sn == pytest.approx(t2, abs=1e-12)
    assert t3 - sn == pytest.approx(t2, abs=1e-12)
    n = len(pts)
    dh = d_hat(s, (0, 1), UNIVERSAL)
    assert 4 * dh - 1 == pytest.approx((1 + t1) * n / (n - 1) - 1, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(points, st.sampled_from(["exp", "cube", "shift"]))
def test_rank_invariance(pts, transform):
    pts = np.array(pts)
    f = {"exp": lambda v: np.exp(v / 50), "cube": lambda v: v ** 3 + v, "shift": lambda v: 3 * v + 1}[transform]
    xj = np.linspace(0, 1, len(pts))
    s1 = Sample.from_blocks(pts, xj)
    s2 = Sample.from_blocks(np.column_stack([f(pts[:, 0]), pts[:, 1]]), xj)
    # only check strictly monotone images (float rounding may merge values)
    if len(np.unique(f(pts[:, 0]))) != len(np.unique(pts[:, 0])):
        return
    fam = interval_family([0.5]) if len(pts) >= 4 else interval_family([])
    try:
        a = tau_matrix(s1, fam).tau
    except InsufficientSubsampleError:
        return
    np.testing.assert_array_equal(a, tau_matrix(s2, fam).tau)


def test_kendall_tau_matches_scipy_without_ties():
    from scipy import stats

    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(2, 300))
    assert kendall_tau(x, y) == pytest.approx(stats.kendalltau(x, y).statistic, abs=1e-12)
