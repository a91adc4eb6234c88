import math

import mpmath
import numpy as np
from scipy import integrate
import pytest
from hypothesis import given, settings, strategies as st

from mildbbm.asymptotics import DomainError
from mildbbm.stats import ks_one_sample
from mildbbm.yule import (CoalescenceLaw, batch_pair_coalescence, coalescence_samples,
                          geometric_cdf, hitting_time_F_cdf, population_pmf,
                          sample_pair_mrca_time, simulate_yule, simulate_yule_conditioned,
                          yule_batch, yule_time_coalescent_pmf)

mpmath.mp.dps = 40


@pytest.mark.parametrize("t", [0.5, 2.0, 7.0])
def test_cdf_is_distribution(t):
    law = CoalescenceLaw(t)
    u = np.linspace(1e-9, t - 1e-9, 2001)
    F = law.cdf(u)
    assert F[0] == pytest.approx(0.0, abs=1e-6)
    assert F[-1] == pytest.approx(1.0, abs=1e-6)
    assert np.all(np.diff(F) >= -1e-14)


@pytest.mark.parametrize("t", [0.3, 2.0, 6.0])
def test_density_integrates_to_cdf(t):
    law = CoalescenceLaw(t)
    for u in (0.1 * t, 0.5 * t, 0.9 * t):
        integral = mpmath.quad(lambda s: law.density(float(s)), [1e-12, u])
        assert float(integral) == pytest.approx(law.cdf(u), abs=1e-9)


def test_cdf_series_branch_continuity():
    law = CoalescenceLaw(3.0)
    lo, hi = law.cdf(0.1 - 1e-12), law.cdf(0.1 + 1e-12)
    assert abs(lo - hi) < 1e-11
    dl, dh = law.density(0.1 - 1e-12), law.density(0.1 + 1e-12)
    assert abs(dl - dh) < 1e-9


def test_cdf_against_high_precision():
    # density and cdf at small u through the series, compared with mpmath
    law = CoalescenceLaw(2.0)
    for u in (1e-6, 1e-3, 0.05, 0.5, 1.5):
        F = mpmath.quad(lambda s: law.density(float(s)), [0, u])
        assert law.cdf(u) == pytest.approx(float(F), rel=1e-8, abs=1e-14)


def test_beta2_scaling():
    a = CoalescenceLaw(4.0, beta2=2.0)
    b = CoalescenceLaw(8.0, beta2=1.0)
    assert a.cdf(1.3) == pytest.approx(b.cdf(2.6), rel=1e-13)
    assert a.density(1.3) == pytest.approx(2 * b.density(2.6), rel=1e-13)


def test_domain_errors():
    law = CoalescenceLaw(1.0)
    for u in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(DomainError):
            law.cdf(u)
    with pytest.raises(ValueError):
        CoalescenceLaw(0.0)


@given(st.floats(0.05, 5.0), st.integers(1, 6))
@settings(max_examples=30, deadline=None)
def test_population_pmf_sums_to_one(u, i):
    k = np.arange(1, 20_000)
    p = population_pmf(k, u, i)
    assert p.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(p[k < i] == 0)
    mean = (k * p).sum()
    assert mean == pytest.approx(i * math.exp(u), rel=1e-6)


def test_geometric_cdf_matches_pmf():
    k = np.arange(1, 60)
    assert np.allclose(np.cumsum(population_pmf(k, 1.2)), geometric_cdf(k, 1.2), atol=1e-14)
    assert geometric_cdf(0, 1.0) == 0.0


@pytest.mark.parametrize("j", [2, 3, 5, 10, 40])
def test_time_coalescent_pmf_normalized(j):
    total = sum(yule_time_coalescent_pmf(i, j) for i in range(2, j + 1))
    assert total == pytest.approx(1.0, rel=1e-13)
    assert yule_time_coalescent_pmf(1, j) == 0.0
    assert yule_time_coalescent_pmf(j + 1, j) == 0.0


def test_hitting_time_law():
    assert hitting_time_F_cdf(1) == 0.0
    assert hitting_time_F_cdf(2) == pytest.approx(1 / 3)
    vals = [hitting_time_F_cdf(i) for i in range(2, 200)]
    assert np.all(np.diff(vals) > 0) and vals[-1] < 1


@pytest.mark.parametrize("seed", range(20))
def test_tree_invariants(seed):
    tree = simulate_yule(1.0, 3.0, seed)
    tree.check()
    assert tree.n_leaves == len(tree.leaves)
    st_ = tree.split_times()
    assert np.all(st_ < 3.0)


def test_mrca_consistency():
    tree = simulate_yule_conditioned(1.0, 3.0, seed=5, min_leaves=6)
    leaves = tree.leaves
    for a in leaves[:4]:
        for b in leaves[:4]:
            if a != b:
                m = tree.mrca(int(a), int(b))
                assert tree.mrca(int(b), int(a)) == m
                assert tree.mrca_split_time(int(a), int(b)) == tree.split[m]
    s = sample_pair_mrca_time(tree, seed=1)
    assert 0 <= s < 3.0


def test_conditioned_tree_and_errors():
    tree = simulate_yule_conditioned(1.0, 0.2, seed=1)
    assert tree.n_leaves >= 2
    single = simulate_yule(1.0, 1e-9, seed=0)
    with pytest.raises(ValueError):
        sample_pair_mrca_time(single, 0)
    with pytest.raises(ValueError):
        simulate_yule(0.0, 1.0, 0)


def test_batch_counts_match_tree_law():
    b = yule_batch(1.0, 1.5, 50_000, seed=3, record=False)
    assert ks_one_sample(b.counts, lambda x: geometric_cdf(x, 1.5), discrete=True).ks_p_value > 0.01
    with pytest.raises(ValueError):
        batch_pair_coalescence(b, 0)


def test_martingale_mean_and_positivity():
    t = 3.0
    y = yule_batch(1.0, t, 100_000, seed=8, record=False).counts
    w = math.exp(-t) * y
    assert abs(w.mean() - 1) < 3 * w.std() / math.sqrt(w.size)
    assert np.all(w > 0)


def test_tree_route_matches_law():
    law = CoalescenceLaw(2.0)
    s = [sample_pair_mrca_time(simulate_yule_conditioned(1.0, 2.0, seed=k), seed=k)
         for k in range(1500)]
    assert ks_one_sample(s, law.cdf).ks_p_value > 0.01


def test_batch_route_matches_law():
    s, i, y = coalescence_samples(1.0, 3.0, 30_000, seed=2)
    assert np.all(y >= 2) and np.all((2 <= i) & (i <= y))
    assert ks_one_sample(s, CoalescenceLaw(3.0).cdf).ks_p_value > 0.01


def test_pre_coalescence_size_two_leaves():
    _, i, _ = coalescence_samples(1.0, math.log(2), 2000, seed=4, leaves=2)
    assert np.all(i == 2)


def _cdf_closed_form_mp(u, t):
    u, t = mpmath.mpf(u), mpmath.mpf(t)
    e = mpmath.exp
    num = 1 - 2 * u * e(-u) - e(-2 * u) + e(-t) * (2 * u - 3 + 4 * e(-u) - e(-2 * u))
    return num / ((1 - e(-t)) * (1 - e(-u)) ** 2)


def _density_closed_form_mp(u, t):
    u, t = mpmath.mpf(u), mpmath.mpf(t)
    e = mpmath.exp
    num = e(-u) * (u - 2 + (u + 2) * e(-u)) + e(-t) * (1 - 2 * u * e(-u) - e(-2 * u))
    return 2 * num / ((1 - e(-t)) * (1 - e(-u)) ** 3)


@pytest.mark.parametrize("t,u", [(2.0, 1.0), (2.0, 0.01), (2.0, 1.99), (10.0, 0.2), (0.5, 0.25)])
def test_closed_forms_high_precision(t, u):
    law = CoalescenceLaw(t)
    assert law.cdf(u) == pytest.approx(float(_cdf_closed_form_mp(u, t)), rel=1e-13)
    assert law.density(u) == pytest.approx(float(_density_closed_form_mp(u, t)), rel=1e-12)


def test_density_normalized_and_nonnegative():
    for t in (0.5, 2.0, 8.0):
        law = CoalescenceLaw(t)
        total, _ = integrate.quad(lambda s: float(law.density(s)), 0, t, epsabs=1e-12,
                                  epsrel=1e-12, limit=200)
        assert abs(total - 1) < 1e-8
        assert np.all(law.density(np.linspace(1e-6, t - 1e-6, 500)) >= 0)


def test_numerical_derivative_matches_density():
    law = CoalescenceLaw(2.0)
    u = np.linspace(0.01, 1.99, 199)
    eps = 1e-6
    deriv = (law.cdf(u + eps) - law.cdf(u - eps)) / (2 * eps)
    assert np.max(np.abs(deriv - law.density(u))) < 1e-6


def test_pmf_at_log_two():
    k = np.arange(1, 30)
    assert np.allclose(population_pmf(k, math.log(2)), 2.0 ** -k, rtol=1e-13, atol=0)


@pytest.mark.parametrize("i", [1, 2, 3])
def test_pmf_normalization_tight(i):
    k = np.arange(1, 2000)
    assert abs(population_pmf(k, 1.0, i).sum() - 1) < 1e-12


def test_pmf_two_ancestors():
    # C(k-1, 1) e^{-2u} (1 - e^{-u})^{k-2}
    u = 0.7
    for k in (2, 3, 7):
        exact = (k - 1) * math.exp(-2 * u) * (1 - math.exp(-u)) ** (k - 2)
        assert population_pmf(k, u, 2) == pytest.approx(exact, rel=1e-13)
    assert population_pmf(1, u, 2) == 0.0


def test_small_size_laws():
    assert yule_time_coalescent_pmf(2, 3) == pytest.approx(2 / 3)
    assert yule_time_coalescent_pmf(3, 3) == pytest.approx(1 / 3)
    assert yule_time_coalescent_pmf(2, 2) == pytest.approx(1.0)
    assert hitting_time_F_cdf(3) == pytest.approx(0.5)
    assert hitting_time_F_cdf(10 ** 9) == pytest.approx(1.0)


def test_two_leaf_tree_pair_is_root():
    for seed in range(200):
        tree = simulate_yule(1.0, 0.5, seed)
        if tree.n_leaves == 2:
            assert sample_pair_mrca_time(tree, seed) == tree.split[0]
            return
    pytest.fail("no two-leaf tree found")


def test_short_horizon_single_leaf():
    tree = simulate_yule(1.0, 1e-12, 3)
    assert tree.n_leaves == 1 and tree.n_internal == 0


def test_tree_leaf_counts_follow_geometric():
    y = [simulate_yule(1.0, 1.0, s).n_leaves for s in range(3000)]
    assert ks_one_sample(y, lambda x: geometric_cdf(x, 1.0), discrete=True).ks_p_value > 0.01


def test_tree_cap_error():
    with pytest.raises(RuntimeError, match="cap"):
        simulate_yule(1.0, 10.0, 0, cap=5)
