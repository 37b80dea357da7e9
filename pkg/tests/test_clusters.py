import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import union_find_sizes
from percolab.clusters import (cluster_at, cluster_of_origin, extract_clusters,
                               left_endpoint_cluster, max_cluster_size, size_census)
from percolab.lattice import Configuration, Window


def config_of(sites, window=Window((-4, -4), (5, 5))):
    return Configuration.from_sites(window, sites)


def test_extract_examples():
    assert extract_clusters(config_of([])).n_clusters == 0
    lab = extract_clusters(config_of([(0, 0)]))
    assert lab.n_clusters == 1 and lab.sizes[1] == 1 and lab.left_endpoint(1) == (0, 0)
    lab = extract_clusters(config_of([(0, 0), (0, 2)]))
    assert lab.n_clusters == 2 and list(lab.sizes[1:]) == [1, 1]


def test_labels_ordered_by_left_endpoint():
    # a U shape whose flat-order first label differs from its left-endpoint order
    sites = [(0, 3), (1, 3), (1, 0), (2, 0), (2, 1), (2, 2), (2, 3)]
    lab = extract_clusters(config_of(sites))
    lefts = [lab.left_endpoint(k) for k in range(1, lab.n_clusters + 1)]
    assert lefts == sorted(lefts)
    assert lab.sites(1) == set(sites)


def test_origin_cluster_examples():
    assert cluster_of_origin(config_of([(1, 0)])) == frozenset()
    plus = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
    assert len(cluster_of_origin(config_of(plus))) == 5
    assert cluster_of_origin(config_of([(0, 0), (1, 1)])) == {(0, 0)}


def test_left_endpoint_cluster():
    config = config_of([(0, 0), (1, 0)])
    assert left_endpoint_cluster(config, (0, 0)) == {(0, 0), (1, 0)}
    assert left_endpoint_cluster(config, (1, 0)) == frozenset()
    assert left_endpoint_cluster(config, (2, 2)) == frozenset()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), p=st.floats(0.2, 0.8), d=st.integers(2, 3))
def test_labeling_matches_bfs(seed, p, d):
    side = 9 if d == 2 else 5
    w = Window.box((side,) * d)
    rng = np.random.default_rng(seed)
    config = Configuration(w, (rng.random(w.shape) < p).astype(np.uint8))
    lab = extract_clusters(config)
    for x in map(tuple, np.argwhere(config.occupied)):
        c = cluster_at(config, x)
        label = lab.labels[x]
        assert len(c) == lab.sizes[label]
        assert min(c) == lab.left_endpoint(label)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), p=st.floats(0.3, 0.7))
def test_labeling_matches_union_find(seed, p):
    w = Window.box((12, 12))
    rng = np.random.default_rng(seed)
    config = Configuration(w, (rng.random(w.shape) < p).astype(np.uint8))
    occupied = {tuple(map(int, x)) for x in np.argwhere(config.occupied)}
    lab = extract_clusters(config)
    assert sorted(lab.sizes[1:].tolist()) == union_find_sizes(occupied)


def test_max_cluster_examples():
    w = Window.centered(6)
    assert max_cluster_size(Configuration(w), 2) == 0
    seven = [(x, 0) for x in range(-1, 6)]
    assert max_cluster_size(Configuration.from_sites(w, seven), 2, "all") == 7
    with pytest.raises(ValueError):
        max_cluster_size(Configuration(w), 7)
    with pytest.raises(ValueError):
        max_cluster_size(Configuration(w), 2, mode="largest")


def test_max_cluster_finite_only_skips_spanning_cluster():
    w = Window.centered(6)
    spanning = [(0, y) for y in range(-6, 7)]
    islands = [(2, 2), (2, 3), (3, 3), (-3, -3)]
    config = Configuration.from_sites(w, spanning + islands)
    assert max_cluster_size(config, 4, "all") == 13
    assert max_cluster_size(config, 4, "finite_only") == 3


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), extra=st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)),
                                                   max_size=10))
def test_max_cluster_monotone_under_adding_sites(seed, extra):
    w = Window.centered(5)
    rng = np.random.default_rng(seed)
    config = Configuration(w, (rng.random(w.shape) < 0.4).astype(np.uint8))
    before = max_cluster_size(config, 3)
    for x in extra:
        config[x] = 1
    assert max_cluster_size(config, 3) >= before


def test_size_census_examples():
    w = Window.box((12, 12))
    assert not size_census(extract_clusters(Configuration(w)), margin=1).counts
    dominoes = [(2, 2), (2, 3), (5, 5), (6, 5), (8, 1), (8, 2)]
    census = size_census(extract_clusters(Configuration.from_sites(w, dominoes)), margin=1)
    assert census.counts == {2: 3} and census.boundary_touching == 0
    crossing = dominoes + [(0, 6), (1, 6), (1, 7)]
    census = size_census(extract_clusters(Configuration.from_sites(w, crossing)))
    assert census.counts == {2: 3} and census.excluded == {3: 1}
    assert list(census.rows()) == [(2, 3, 0), (3, 0, 1)]


def test_census_merge_requires_same_region():
    w = Window.box((10, 10))
    a = size_census(extract_clusters(Configuration(w)), margin=1)
    b = size_census(extract_clusters(Configuration(w)), margin=2)
    with pytest.raises(ValueError):
        a.merge(b)
