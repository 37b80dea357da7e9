"""Occupied-cluster extraction, left-endpoints, censuses and maximal clusters."""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .lattice import Configuration, Site, Window


@dataclass(eq=False)
class ClusterLabeling:
    """Partition of the occupied sites of a configuration.

    ``labels`` holds 0 on non-occupied sites and 1..n_clusters elsewhere.
    Clusters are numbered by increasing left-endpoint, so the labeling of a
    configuration is canonical.  Per-cluster arrays are indexed by label and
    entry 0 is unused.
    """

    window: Window
    labels: np.ndarray
    sizes: np.ndarray
    left_endpoints: np.ndarray
    boundary: np.ndarray

    @property
    def n_clusters(self) -> int:
        return self.sizes.size - 1

    def left_endpoint(self, label: int) -> Site:
        return tuple(int(v) for v in self.left_endpoints[label])

    def sites(self, label: int) -> set[Site]:
        idx = np.argwhere(self.labels == label) + np.array(self.window.lo)
        return {tuple(int(v) for v in row) for row in idx}


def _structure(d: int) -> np.ndarray:
    return ndimage.generate_binary_structure(d, 1)


def border_labels(labels: np.ndarray) -> np.ndarray:
    faces = []
    for ax in range(labels.ndim):
        faces.append(np.take(labels, 0, axis=ax).ravel())
        faces.append(np.take(labels, -1, axis=ax).ravel())
    found = np.unique(np.concatenate(faces))
    return found[found > 0]


def extract_clusters(config: Configuration) -> ClusterLabeling:
    window = config.window
    labels, n = ndimage.label(config.occupied, structure=_structure(window.d))
    flat = labels.ravel()
    first = np.full(n + 1, flat.size, dtype=np.int64)
    np.minimum.at(first, flat, np.arange(flat.size, dtype=np.int64))
    first = first[1:]
    # number clusters by left-endpoint (flat index order is lexicographic order)
    if n > 1 and np.any(np.diff(first) < 0):
        order = np.argsort(first, kind="stable")
        remap = np.zeros(n + 1, dtype=labels.dtype)
        remap[order + 1] = np.arange(1, n + 1, dtype=labels.dtype)
        labels = remap[labels]
        first = first[order]
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    sizes[0] = 0
    left = np.zeros((n + 1, window.d), dtype=np.int64)
    if n:
        left[1:] = np.stack(np.unravel_index(first, window.shape), axis=1) + np.array(window.lo)
    boundary = np.zeros(n + 1, dtype=bool)
    boundary[border_labels(labels)] = True
    return ClusterLabeling(window, labels, sizes, left, boundary)


def _neighbours(x: Site):
    for ax in range(len(x)):
        for step in (-1, 1):
            y = list(x)
            y[ax] += step
            yield tuple(y)


def cluster_at(config: Configuration, x: Sequence[int]) -> frozenset[Site]:
    """C(x): occupied sites joined to x by occupied nearest-neighbour paths."""
    x = tuple(x)
    if not config.window.contains(x):
        raise IndexError(f"site {x} outside window")
    if config[x] != 1:
        return frozenset()
    seen = {x}
    queue = deque([x])
    while queue:
        y = queue.popleft()
        for z in _neighbours(y):
            if z not in seen and config.get(z) == 1:
                seen.add(z)
                queue.append(z)
    return frozenset(seen)


def cluster_of_origin(config: Configuration) -> frozenset[Site]:
    return cluster_at(config, (0,) * config.window.d)


def left_endpoint_cluster(config: Configuration, x: Sequence[int]) -> frozenset[Site]:
    """C(x) if x is its lexicographic minimum, else the empty set."""
    c = cluster_at(config, x)
    if c and min(c) != tuple(x):
        return frozenset()
    return c


def max_cluster_size(config: Configuration, box, mode: str = "all",
                     labeling: ClusterLabeling | None = None) -> int:
    """Largest |C(x)| over x in ``box``.

    ``box`` is either a half-width n (the cube [-n, n]^d) or a ``(lo, hi)``
    pair with exclusive ``hi``.  ``mode="finite_only"`` skips clusters that
    touch the window border.
    """
    if mode not in ("all", "finite_only"):
        raise ValueError(f"mode must be 'all' or 'finite_only', got {mode!r}")
    window = config.window
    if isinstance(box, (int, np.integer)):
        lo, hi = (-int(box),) * window.d, (int(box) + 1,) * window.d
    else:
        lo, hi = (tuple(int(v) for v in b) for b in box)
    if any(h <= l for l, h in zip(lo, hi)):
        raise ValueError("empty box")
    if not window.contains_box(lo, hi):
        raise ValueError(f"box {lo}..{hi} not inside window {window.lo}..{window.hi}")
    lab = labeling if labeling is not None else extract_clusters(config)
    sl = tuple(slice(l - wl, h - wl) for l, h, wl in zip(lo, hi, window.lo))
    hit = np.unique(lab.labels[sl])
    hit = hit[hit > 0]
    if mode == "finite_only":
        hit = hit[~lab.boundary[hit]]
    return int(lab.sizes[hit].max()) if hit.size else 0


@dataclass
class SizeCensus:
    """Cluster counts by size for clusters whose left-endpoint is in a region.

    ``counts`` holds clusters that stay away from the window border;
    ``excluded`` holds the border-touching ones, which are not used.
    """

    region: Window
    counts: Counter = field(default_factory=Counter)
    excluded: Counter = field(default_factory=Counter)

    @property
    def boundary_touching(self) -> int:
        return sum(self.excluded.values())

    @property
    def region_sites(self) -> int:
        return self.region.size

    def merge(self, other: "SizeCensus") -> "SizeCensus":
        if other.region.shape != self.region.shape:
            raise ValueError("cannot merge censuses over regions of different shape")
        return SizeCensus(self.region, self.counts + other.counts, self.excluded + other.excluded)

    def rows(self):
        for n in sorted(set(self.counts) | set(self.excluded)):
            yield n, self.counts.get(n, 0), self.excluded.get(n, 0)


def default_region(window: Window, margin: int) -> Window:
    if any(2 * margin >= s for s in window.shape):
        raise ValueError(f"margin {margin} leaves an empty census region")
    return window.shrink(margin)


def size_census(labeling: ClusterLabeling, region: Window | None = None,
                margin: int = 0) -> SizeCensus:
    window = labeling.window
    if region is None:
        region = default_region(window, margin)
    if not window.contains_box(region.lo, region.hi):
        raise ValueError("census region must lie inside the window")
    census = SizeCensus(region)
    if labeling.n_clusters == 0:
        return census
    left = labeling.left_endpoints[1:]
    inside = np.all((left >= np.array(region.lo)) & (left < np.array(region.hi)), axis=1)
    sizes = labeling.sizes[1:][inside]
    touching = labeling.boundary[1:][inside]
    for n, k in zip(*np.unique(sizes[~touching], return_counts=True)):
        census.counts[int(n)] = int(k)
    for n, k in zip(*np.unique(sizes[touching], return_counts=True)):
        census.excluded[int(n)] = int(k)
    return census
