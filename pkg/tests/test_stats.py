import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats as sps

from emophone.stats import (
    DegenerateTestError,
    TestResult,
    betainc,
    box_stats,
    log_gamma,
    normal_cdf,
    paired_t_test,
    ranks_with_ties,
    student_t_cdf,
    welch_t_test,
    wilcoxon_signed_rank,
)


@pytest.mark.parametrize("x", [0.1, 0.5, 1.0, 1.5, 2.0, 3.7, 10.0, 55.5, 170.0])
def test_log_gamma_matches_scipy(x):
    assert log_gamma(x) == pytest.approx(special.gammaln(x), rel=1e-12, abs=1e-13)


@given(
    a=st.floats(0.05, 60), b=st.floats(0.05, 60), x=st.floats(0.0, 1.0),
)
@settings(max_examples=200, deadline=None)
def test_betainc_matches_scipy(a, b, x):
    assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-10)


def test_t_cdf_known_values():
    assert student_t_cdf(0.0, 7) == 0.5
    # Cauchy
    assert abs(student_t_cdf(1.0, 1) - 0.75) < 1e-10
    assert abs(student_t_cdf(-1.0, 1) - 0.25) < 1e-10


@given(t=st.floats(-40, 40), df=st.floats(0.5, 200))
@settings(max_examples=200, deadline=None)
def test_t_cdf_matches_scipy(t, df):
    assert student_t_cdf(t, df) == pytest.approx(sps.t.cdf(t, df), abs=1e-11)


@given(t=st.floats(0, 30), df=st.floats(1, 100))
@settings(max_examples=100, deadline=None)
def test_t_cdf_symmetry(t, df):
    assert student_t_cdf(t, df) + student_t_cdf(-t, df) == pytest.approx(1.0, abs=1e-12)


def test_t_cdf_approaches_normal():
    assert student_t_cdf(1.959964, 1e7) == pytest.approx(0.975, abs=1e-6)


def test_normal_cdf():
    assert normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-7)
    assert normal_cdf(0.0) == 0.5


def test_ranks_with_ties():
    assert ranks_with_ties([10, 20, 20, 30]).tolist() == [1.0, 2.5, 2.5, 4.0]
    assert ranks_with_ties([3, 1, 2]).tolist() == [3.0, 1.0, 2.0]


def test_wilcoxon_exact_all_positive():
    r = wilcoxon_signed_rank([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])
    assert r.method == "wilcoxon-exact"
    assert r.p_value == 0.0625
    assert r.statistic == 0.0


def test_wilcoxon_drops_zero_differences():
    r = wilcoxon_signed_rank([1, 2, 3, 4, 5, 7], [0, 0, 0, 0, 0, 7])
    assert r.n == 5 and r.p_value == 0.0625


def test_wilcoxon_all_zero_is_degenerate():
    with pytest.raises(DegenerateTestError, match="degenerate"):
        wilcoxon_signed_rank([1, 2, 3], [1, 2, 3])


@given(st.lists(st.integers(-50, 50).filter(lambda v: v != 0), min_size=1, max_size=14))
@settings(max_examples=80, deadline=None)
def test_wilcoxon_exact_matches_scipy(d):
    d = np.array(d, dtype=float)
    ours = wilcoxon_signed_rank(d, np.zeros_like(d)).p_value
    if len(np.unique(np.abs(d))) == len(d):
        ref = sps.wilcoxon(d, method="exact").pvalue
        assert ours == pytest.approx(ref, abs=1e-12)
    else:
        # tied ranks: scipy has no exact mode, so enumerate by brute force
        r = ranks_with_ties(np.abs(d))
        w = min(r[d > 0].sum(), r[d < 0].sum())
        n = len(d)
        signs = ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1).astype(bool)
        wp = (signs * r).sum(axis=1)
        wm = r.sum() - wp
        ref = np.mean(np.minimum(wp, wm) <= w + 1e-9)
        assert ours == pytest.approx(min(1.0, ref), abs=1e-12)


@pytest.mark.parametrize("n", range(15, 21))
def test_wilcoxon_exact_vs_normal_agree(n):
    rng = np.random.default_rng(n)
    for _ in range(5):
        d = rng.normal(0.3, 1.0, size=n)
        exact = wilcoxon_signed_rank(d, np.zeros(n)).p_value
        approx = wilcoxon_signed_rank(d, np.zeros(n), exact_max_n=0).p_value
        assert abs(exact - approx) <= 0.02


def test_wilcoxon_normal_matches_scipy():
    rng = np.random.default_rng(3)
    d = rng.normal(0.4, 1, size=40)
    ours = wilcoxon_signed_rank(d, np.zeros(40))
    ref = sps.wilcoxon(d, method="approx", correction=True).pvalue
    assert ours.method == "wilcoxon-normal"
    assert ours.p_value == pytest.approx(ref, abs=1e-10)


def test_welch_example():
    r = welch_t_test([1, 2, 3], [4, 5, 6])
    assert r.statistic == pytest.approx(-3.6742, abs=1e-3)
    assert r.df == pytest.approx(4.0, abs=1e-9)
    oracle = special.betainc(2.0, 0.5, 4.0 / (4.0 + r.statistic ** 2))
    assert abs(r.p_value - oracle) < 5e-4
    assert r.p_value == pytest.approx(0.0213, abs=5e-4)


@given(
    st.lists(st.floats(-100, 100), min_size=2, max_size=12),
    st.lists(st.floats(-100, 100), min_size=2, max_size=12),
)
@settings(max_examples=100, deadline=None)
@pytest.mark.filterwarnings("ignore:Precision loss")
def test_welch_matches_scipy(a, b):
    a, b = np.array(a), np.array(b)
    if a.var() + b.var() < 1e-6:
        return
    ours = welch_t_test(a, b)
    ref = sps.ttest_ind(a, b, equal_var=False)
    assert ours.statistic == pytest.approx(ref.statistic, rel=1e-9, abs=1e-9)
    assert ours.p_value == pytest.approx(ref.pvalue, abs=1e-9)


def test_welch_degenerate_cases():
    with pytest.raises(DegenerateTestError):
        welch_t_test([2, 2, 2], [2, 2])
    r = welch_t_test([1, 1, 1], [3, 3])
    assert r.p_value == 0.0 and r.degenerate and r.statistic is None


def test_paired_t_example():
    r = paired_t_test([2, 4, 6, 8], [1, 2, 3, 4])
    assert r.p_value == pytest.approx(sps.ttest_rel([2, 4, 6, 8], [1, 2, 3, 4]).pvalue, abs=1e-12)
    assert r.df == 3.0


def test_paired_t_constant_difference_is_degenerate():
    with pytest.raises(DegenerateTestError):
        paired_t_test([1, 2, 3], [0, 1, 2])


def test_test_result_reject_and_round_trip():
    r = TestResult("t-paired", 2.5, 0.03, 10, 9.0)
    assert r.reject
    assert TestResult.from_dict(r.to_dict()) == r
    u = TestResult.undefined("t-paired", 3, "why")
    assert not u.reject and u.degenerate and u.p_value is None


def test_box_stats_matches_numpy():
    v = np.array([1.0, 2, 3, 4, 5, 6, 7, 8, 100])
    b = box_stats(v)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    assert (b.q1, b.median, b.q3) == (q1, med, q3)
    assert b.outliers == [100.0]
    assert b.whisker_high == 8.0 and b.whisker_low == 1.0


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40))
def test_box_stats_properties(values):
    v = np.array(values)
    b = box_stats(v)
    assert b.q1 <= b.median <= b.q3
    lo, hi = b.q1 - 1.5 * b.iqr, b.q3 + 1.5 * b.iqr
    assert lo <= b.whisker_low <= b.whisker_high <= hi
    inside = int(np.sum((v >= lo) & (v <= hi)))
    assert inside + len(b.outliers) == b.n == v.size
    assert math.isfinite(b.iqr)
