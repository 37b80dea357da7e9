import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percolab.clusters import SizeCensus, extract_clusters, size_census
from percolab.estimators import (CensusAccumulator, conditional_pattern_stats, estimate_mu,
                                 fit_stretched, geometric_bins, occurrence_density,
                                 pattern_theorem_report, ratio_limit_report, tail_from_total,
                                 tail_report)
from percolab.exact import exact_tail
from percolab.harvest import PatternRecords, harvest_patterns
from percolab.lattice import Configuration, Window
from percolab.patterns import single_site_pair
from percolab.sampler import ProductMeasureSpec, RngPolicy, sample_product


def test_geometric_tail_exact_for_every_n():
    ns = np.arange(1, 31)
    cn = 0.5**ns
    est = estimate_mu(ns, cn, total=1.0)
    assert np.allclose(est.root, 0.5, rtol=1e-14, atol=0)
    assert np.allclose(est.ratio, 0.5, rtol=1e-12, atol=0)
    assert np.allclose(est.c_ratio[:-1], 0.5, rtol=1e-14, atol=0)
    assert est.root_estimate == pytest.approx(0.5) and est.ratio_estimate == pytest.approx(0.5)


def test_polynomial_prefactor_routes():
    ns = np.arange(1, 401)
    cn = np.exp(np.log(ns) - ns * np.log(3))
    est = estimate_mu(ns, cn)
    assert np.allclose(est.c_ratio[:-1], (ns[:-1] + 1) / (3 * ns[:-1]), rtol=1e-10)
    assert abs(est.root[-1] - 1 / 3) < 0.01
    assert np.all(np.diff(np.abs(est.root - 1 / 3))[10:] < 0)
    assert np.isnan(est.ratio).all()


def test_estimate_mu_rejects_bad_input():
    with pytest.raises(ValueError):
        estimate_mu([1, 2], [0.1, 0.0])
    with pytest.raises(ValueError):
        estimate_mu([1, 2], [0.1, -0.2])
    with pytest.raises(ValueError):
        estimate_mu([1, 2], [0.1])
    with pytest.raises(ValueError):
        tail_from_total([2, 3], [0.1, 0.1], 1.0)


def test_exact_p01_routes():
    tail = exact_tail(0.1, 12)
    est = estimate_mu(tail.ns, tail.cn[1:], pn=tail.tail[1:])
    # the root route converges slowly from below; at n = 12 it sits ~13% under the ratio route
    assert np.all(np.diff(est.root) > 0)
    assert est.root[-1] < est.ratio[-1]
    gap = np.abs(est.root - est.ratio)
    assert np.all(np.diff(gap[4:]) < 0)


@pytest.mark.xfail(strict=True, reason="root and ratio routes differ by about 13% at n = 12")
def test_exact_p01_routes_within_ten_percent():
    tail = exact_tail(0.1, 12)
    est = estimate_mu(tail.ns, tail.cn[1:], pn=tail.tail[1:])
    assert abs(est.root_estimate - est.ratio_estimate) <= 0.10 * est.ratio_estimate


def test_fit_stretched_exact_form():
    ns = np.arange(1, 60)
    fit = fit_stretched(ns, np.exp(-2 * ns**0.5))
    assert fit.beta == pytest.approx(0.5, abs=1e-6)
    assert fit.nu == pytest.approx(math.exp(-2), abs=1e-6)
    assert fit_stretched(ns, 0.6**ns).beta == pytest.approx(1.0, abs=1e-9)


def test_fit_stretched_errors():
    with pytest.raises(ValueError):
        fit_stretched([1, 2, 3, 4], [0.1] * 4)
    with pytest.raises(ValueError):
        fit_stretched([1, 1, 1, 2, 2], [0.1, 0.2, 0.3, 0.1, 0.2])
    with pytest.raises(ValueError):
        fit_stretched(range(1, 7), [1.0, 0.5, 0.4, 0.3, 0.2, 0.1])


def census_accumulator(p, shape, configs, seed, margin=16):
    w = Window.box(shape)
    spec = ProductMeasureSpec.bernoulli(p)
    pol = RngPolicy(seed)
    acc = None
    for k in range(configs):
        cen = size_census(extract_clusters(sample_product(w, spec, pol.generator(k))), margin=margin)
        acc = acc or CensusAccumulator(cen.region_sites)
        acc.add(cen)
    return acc


@pytest.mark.xfail(strict=True, reason="finite-size regime: the log-log slope sits near 0.2 "
                                       "for cluster sizes reachable on a desk")
def test_supercritical_stretched_exponent_range():
    et = census_accumulator(0.65, (512, 512), 60, 31).estimate()
    sel = (et.ns >= 20) & (et.ns <= 80) & (et.cn > 0)
    beta = fit_stretched(et.ns[sel], et.cn[sel]).beta
    assert 0.3 <= beta <= 0.7


def test_census_accumulator_merge_is_order_free():
    w = Window.box((40, 40))
    spec = ProductMeasureSpec.bernoulli(0.45)
    cens = [size_census(extract_clusters(sample_product(w, spec, s)), margin=3) for s in range(6)]
    a = CensusAccumulator(cens[0].region_sites)
    for c in cens:
        a.add(c)
    b1, b2 = CensusAccumulator(cens[0].region_sites), CensusAccumulator(cens[0].region_sites)
    for c in cens[::2]:
        b1.add(c)
    for c in cens[1::2][::-1]:
        b2.add(c)
    merged = b2.merge(b1)
    ea, eb = a.estimate(), merged.estimate()
    assert np.array_equal(ea.cstar, eb.cstar) and np.array_equal(ea.tail_se, eb.tail_se)
    assert ea.n_configs == 6


def test_census_accumulator_values():
    region = Window.box((10, 10))
    acc = CensusAccumulator(100)
    acc.add(SizeCensus(region, Counter({1: 4, 3: 2})))
    acc.add(SizeCensus(region, Counter({1: 2})))
    et = acc.estimate()
    assert et.cstar.tolist() == pytest.approx([0.03, 0.0, 0.01, 0.0])
    assert et.cn.tolist() == pytest.approx([0.03, 0.0, 0.03, 0.0])
    assert et.tail[0] == pytest.approx((10 + 2) / 2 / 100)
    assert et.le_tail[2] == pytest.approx(0.01)
    assert et.cstar_se[0] == pytest.approx(np.std([0.04, 0.02], ddof=1) / math.sqrt(2))
    with pytest.raises(ValueError):
        acc.add(SizeCensus(Window.box((5, 5))))
    with pytest.raises(ValueError):
        et.ratio_mu(min_clusters=100)


def test_ratio_mu_on_subcritical_census():
    et = census_accumulator(0.3, (256, 256), 40, 2).estimate()
    mu, se, n = et.ratio_mu(500)
    exact = exact_tail(0.3, 12)
    assert 0 < se < 0.05
    assert n > 12
    # exact ratios climb by about 5e-4 per step near n = 12; allow that drift out to n
    drift = 1e-3 * (n - 12)
    assert abs(mu - exact.tail[13] / exact.tail[12]) < 4 * se + drift


def make_records(sizes, weights, counts):
    sizes = np.asarray(sizes)
    weights = np.asarray(weights)
    counts = np.asarray(counts)
    return PatternRecords(1, 2, sizes, weights, counts)


def fixture_records():
    # three clusters, K = 2 residue classes, two patterns
    sizes = [10, 12, 30]
    weights = [[6, 4], [12, 0], [10, 20]]
    counts = [[[1, 2], [0, 1]],
              [[3, 0], [1, 0]],
              [[2, 4], [2, 0]]]
    return make_records(sizes, weights, counts)


def test_conditional_stats_fixture():
    rec = fixture_records()
    rep = conditional_pattern_stats(rec, [(1, 20), (20, 40), (40, 50)], gamma=2.0)
    b = rep.bins[0]
    assert b.clusters == 2 and b.weight == 22
    assert b.mean_P == pytest.approx((6 * 1 + 4 * 2 + 12 * 3) / 22)
    assert b.mean_P_prime == pytest.approx((4 * 1 + 12 * 1) / 22)
    assert b.var_P == pytest.approx((6 + 16 + 108) / 22 - b.mean_P**2)
    assert b.mean_ratio == pytest.approx((4 * 2 + 12 * 3) / 16)
    assert b.excluded_fraction == pytest.approx(6 / 22)
    assert b.mean_size == pytest.approx((10 * 10 + 12 * 12) / 22)
    assert rep.bins[1].ratio_of_means == pytest.approx((10 * 2 + 20 * 4) / 20)
    assert rep.bins[2].empty and math.isnan(rep.bins[2].mean_P)
    assert len(list(rep.rows())) == 3


def test_conditional_stats_all_vacant():
    config = Configuration(Window.box((30, 30)))
    rec = harvest_patterns(config, list(single_site_pair()))
    rep = conditional_pattern_stats(rec, geometric_bins(1, 100, 4))
    assert all(b.empty for b in rep.bins)


@settings(max_examples=25, deadline=None)
@given(perm_seed=st.integers(0, 10**6), split=st.integers(1, 9))
def test_conditional_stats_order_and_split_invariant(perm_seed, split):
    rng = np.random.default_rng(perm_seed)
    m = 10
    sizes = rng.integers(1, 50, m)
    weights = rng.integers(0, 5, (m, 9))
    counts = rng.integers(0, 4, (m, 2, 9))
    rec = make_records(sizes, weights, counts)
    perm = rng.permutation(m)
    shuffled = make_records(sizes[perm], weights[perm], counts[perm])
    parts = PatternRecords.concat([make_records(sizes[perm][:split], weights[perm][:split],
                                                counts[perm][:split]),
                                   make_records(sizes[perm][split:], weights[perm][split:],
                                                counts[perm][split:])])
    bins = geometric_bins(1, 49, 3)
    ref = conditional_pattern_stats(rec, bins)
    for other in (shuffled, parts):
        rep = conditional_pattern_stats(other, bins)
        for a, b in zip(ref.bins, rep.bins):
            assert (a.weight, a.clusters) == (b.weight, b.clusters)
            if not a.empty:
                assert a.mean_P == b.mean_P and a.var_P_prime == b.var_P_prime


def test_pattern_theorem_fixture_step():
    sizes = np.array([10, 20, 40, 80])
    weights = sizes[:, None].copy()
    counts = (sizes // 10)[:, None, None].copy()
    rec = PatternRecords(1, 2, sizes, weights, counts.reshape(4, 1, 1))
    rep = pattern_theorem_report(rec, 0, [0.0, 0.09, 0.1, 0.5, 1.0], [(1, 100)])
    assert rep.prob[0].tolist() == [0.0, 0.0, 1.0, 1.0, 1.0]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_pattern_theorem_monotone_in_a(seed):
    rng = np.random.default_rng(seed)
    m = 12
    rec = make_records(rng.integers(1, 100, m), rng.integers(1, 5, (m, 9)),
                       rng.integers(0, 6, (m, 1, 9)))
    grid = np.linspace(0, 1.2, 13)
    rep = pattern_theorem_report(rec, 0, grid, geometric_bins(1, 99, 3))
    for row in rep.prob:
        ok = ~np.isnan(row)
        assert np.all(np.diff(row[ok]) >= 0)


def test_pattern_theorem_a_zero_decreasing_supercritical():
    w = Window.box((1024, 1024))
    spec = ProductMeasureSpec.bernoulli(0.65)
    pol = RngPolicy(77)
    occ = single_site_pair()[0]
    recs = [harvest_patterns(sample_product(w, spec, pol.generator(k)), [occ], (10, 160))
            for k in range(40)]
    rec = PatternRecords.concat(recs)
    bins = geometric_bins(10, 159, 4)
    rep = pattern_theorem_report(rec, 0, [0.0, 1.0], bins)
    assert min(rep.clusters) >= 200
    assert np.all(np.diff(rep.prob[:, 0]) < 0)
    assert np.all(rep.prob[:, 1] == 1.0)
    assert occurrence_density(rec, 0, bins[0]) > 0


def test_ratio_limit_geometric():
    ns = np.arange(1, 25)
    rep = ratio_limit_report(ns, 2.0**-ns, total=1.0)
    assert np.allclose(rep.deviation[:-1], 0, atol=1e-14)
    assert rep.p_ratio == pytest.approx(np.full(24, 0.5))
    assert rep.mu_ref == pytest.approx(0.5)


def test_ratio_limit_exact_p01_deviation_decreasing():
    tail = exact_tail(0.1, 12)
    root12 = tail.cn[12] ** (1 / 12)
    rep = ratio_limit_report(tail.ns, tail.cn[1:], mu_ref=root12)
    dev = rep.deviation[~np.isnan(rep.deviation)]
    assert np.all(np.diff(dev[-4:]) < 0)


def test_ratio_limit_strengthened_form():
    ns = np.arange(1, 200)
    beta = 0.5
    cn = np.exp(-2 * ns**beta)
    rep = ratio_limit_report(ns, cn, beta=beta)
    norm = rep.normalized[~np.isnan(rep.normalized)]
    assert np.all(norm < 1.1)


def test_tail_report_rows_and_summary():
    ns = np.arange(1, 8)
    rep = tail_report(ns, 0.5**ns, total=1.0, stretched=True)
    rows = list(rep.rows())
    assert len(rows) == 7 and rows[0][0] == 1
    assert rep.summary()["mu_ratio"] == pytest.approx(0.5)
    assert rep.summary()["beta"] == pytest.approx(1.0)


def test_geometric_bins():
    bins = geometric_bins(200, 2000, 6)
    assert bins[0][0] == 200 and bins[-1][1] == 2001
    assert all(a < b for a, b in bins)
    assert all(b1 == a2 for (_, b1), (a2, _) in zip(bins, bins[1:]))
    with pytest.raises(ValueError):
        geometric_bins(10, 5, 3)
