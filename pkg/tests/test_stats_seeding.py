import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sst

from mildbbm.parallel import replicate_map
from mildbbm.seeding import derive_seed, make_rng
from mildbbm.stats import (bootstrap_ci, chisquare_pvalue, ks_dominance_pvalue, ks_one_sample,
                           log_mean_exp, mean_estimate, proportion_estimate, wilson_interval)


def test_derive_seed_deterministic_and_distinct():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    seen = {derive_seed(m, i, *p) for m in range(3) for i in range(50)
            for p in ((), (0,), (1,), (0, 0), (0, 1))}
    assert len(seen) == 3 * 50 * 5


def test_derive_seed_trailing_zero_paths_differ():
    assert derive_seed(1, 2) != derive_seed(1, 2, 0)
    assert derive_seed(1, 0) != derive_seed(1, 0, 0, 0)


def test_derive_seed_rejects_negative():
    with pytest.raises(ValueError):
        derive_seed(-1, 0)


def test_make_rng_reproducible():
    a = make_rng(5).random(10)
    b = make_rng(5).random(10)
    assert np.array_equal(a, b)


def test_replicate_map_order_and_threads():
    fn = lambda i, s: (i, make_rng(s).random())
    one = replicate_map(fn, 37, 9, threads=1)
    many = replicate_map(fn, 37, 9, threads=8)
    assert one == many
    assert [i for i, _ in one] == list(range(37))


def test_ks_uniform_and_shifted():
    x = make_rng(1).random(20_000)
    assert ks_one_sample(x, lambda v: np.clip(v, 0, 1)).ks_p_value > 0.01
    assert ks_one_sample(x + 0.05, lambda v: np.clip(v, 0, 1)).ks_p_value < 1e-6


def test_ks_matches_scipy():
    x = make_rng(2).normal(size=500)
    ours = ks_one_sample(x, sst.norm.cdf)
    ref = sst.kstest(x, "norm", method="asymp")
    assert ours.ks_statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert ours.ks_p_value == pytest.approx(ref.pvalue, rel=1e-6)


def test_ks_discrete_geometric():
    p = 0.3
    x = make_rng(3).geometric(p, size=50_000)
    cdf = lambda k: np.where(k >= 1, 1 - (1 - p) ** np.maximum(np.floor(k), 0), 0.0)
    assert ks_one_sample(x, cdf, discrete=True).ks_p_value > 0.01
    cdf_bad = lambda k: np.where(k >= 1, 1 - (1 - 0.32) ** np.maximum(np.floor(k), 0), 0.0)
    assert ks_one_sample(x, cdf_bad, discrete=True).ks_p_value < 1e-6


def test_ks_rejects_empty_and_nan():
    with pytest.raises(ValueError):
        ks_one_sample([], lambda v: v)
    with pytest.raises(ValueError):
        ks_one_sample([0.1, np.nan], lambda v: v)


@given(st.integers(1, 500), st.data())
@settings(max_examples=60, deadline=None)
def test_wilson_interval_contains_estimate(n, data):
    k = data.draw(st.integers(0, n))
    lo, hi = wilson_interval(k, n)
    assert 0 <= lo <= k / n <= hi <= 1
    if k > 0:
        assert lo > 0


def test_wilson_invalid():
    with pytest.raises(ValueError):
        wilson_interval(3, 2)
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_proportion_estimate():
    e = proportion_estimate(30, 100)
    assert e.value == 0.3 and e.contains(0.3)
    assert e.std_error == pytest.approx(math.sqrt(0.21 / 100))


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=50))
@settings(max_examples=60, deadline=None)
def test_log_mean_exp_matches_direct(xs):
    lm, _ = log_mean_exp(xs)
    assert lm == pytest.approx(math.log(np.mean(np.exp(xs))), rel=1e-10, abs=1e-10)


def test_log_mean_exp_no_overflow():
    lm, ls = log_mean_exp([1000.0, 1000.0 + math.log(3.0)])
    assert lm == pytest.approx(1000.0 + math.log(2.0))
    assert math.isfinite(ls)


def test_mean_estimate_and_ci():
    e = mean_estimate([1.0, 2.0, 3.0, 4.0], excluded=2)
    assert e.value == 2.5 and e.excluded == 2
    assert e.ci_low < 2.5 < e.ci_high
    with pytest.raises(ValueError):
        mean_estimate([])


def test_dominance_pvalue():
    rng = make_rng(4)
    small = rng.exponential(1.0, 2000)
    large = rng.exponential(2.0, 2000)
    _, p = ks_dominance_pvalue(small, large)
    assert p > 0.5
    _, p = ks_dominance_pvalue(large, small)
    assert p < 1e-6


def test_bootstrap_and_chisquare():
    x = make_rng(5).normal(size=2000)
    lo, hi = bootstrap_ci(x, np.median, seed=1)
    assert lo < 0 < hi
    assert chisquare_pvalue([10], [1.0]) == 1.0
    assert chisquare_pvalue([500, 500], [0.5, 0.5]) == pytest.approx(1.0)


def test_neighbouring_seeds_give_different_streams():
    a = make_rng(0).random(64)
    b = make_rng(1).random(64)
    assert not np.any(a == b)


def test_ks_constant_samples_rejected():
    r = ks_one_sample(np.full(1000, 0.5), lambda x: np.clip(x, 0, 1))
    assert r.ks_statistic == pytest.approx(0.5) and r.ks_p_value < 1e-100


def test_ks_single_sample_at_median():
    r = ks_one_sample([0.0], sst.norm.cdf)
    assert r.ks_statistic == 0.5


def test_ks_self_consistency_rate():
    rng = make_rng(77)
    ok = sum(ks_one_sample(rng.exponential(size=500), sst.expon.cdf).ks_p_value > 0.01
             for _ in range(400))
    assert ok / 400 >= 0.97
