"""Pattern counts on every finite cluster of a window.

A window holds many clusters; each one is a draw of the cluster of the origin
once the origin is placed on one of its sites.  With the grid
V = (r+2)Z^d + (1,...,1) fixed relative to the origin, the count N_P depends
on which residue class mod (r+2) the origin's site falls in.  A harvested
cluster therefore contributes one record per residue class, weighted by the
number of its sites in that class: the weights of a cluster add up to its
size, which is the size-biasing that turns left-endpoint counts c*_n into
c_n = n c*_n.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .clusters import ClusterLabeling, extract_clusters
from .lattice import Configuration, cube_geometry
from .patterns import Pattern


@dataclass
class PatternRecords:
    """Per-cluster data, K = (r+2)^d residue classes.

    sizes   : (m,)        cluster sizes
    weights : (m, K)      sites of the cluster in each residue class
    counts  : (m, k, K)   N of pattern j when the origin sits in class rho
    """

    r: int
    d: int
    sizes: np.ndarray
    weights: np.ndarray
    counts: np.ndarray

    @classmethod
    def empty(cls, r: int, d: int, n_patterns: int) -> "PatternRecords":
        k = (r + 2) ** d
        return cls(r, d, np.zeros(0, np.int64), np.zeros((0, k), np.int64),
                   np.zeros((0, n_patterns, k), np.int64))

    def __len__(self) -> int:
        return self.sizes.size

    @staticmethod
    def concat(parts: Sequence["PatternRecords"]) -> "PatternRecords":
        first = parts[0]
        return PatternRecords(
            first.r, first.d,
            np.concatenate([p.sizes for p in parts]),
            np.concatenate([p.weights for p in parts]),
            np.concatenate([p.counts for p in parts]),
        )


def _residue_index(coords: np.ndarray, m: int) -> np.ndarray:
    """Flat index of coords mod m, coords of shape (k, d)."""
    res = np.mod(coords, m)
    idx = np.zeros(res.shape[0], dtype=np.int64)
    for ax in range(res.shape[1]):
        idx = idx * m + res[:, ax]
    return idx


def cluster_pattern_counts(states: np.ndarray, mask: np.ndarray, origin: Sequence[int],
                           patterns: Sequence[Pattern]) -> tuple[np.ndarray, np.ndarray]:
    """Residue weights and per-pattern occurrence counts for one cluster.

    ``mask`` marks the cluster inside the sub-array ``states``, whose entry
    [0, ..., 0] sits at absolute site ``origin``.
    """
    r, d = patterns[0].r, patterns[0].d
    m = r + 2
    k = m**d
    lo = np.array(origin)
    cells = np.argwhere(mask) + lo
    weights = np.bincount(_residue_index(cells, m), minlength=k)
    counts = np.zeros((len(patterns), k), dtype=np.int64)
    if any(s < m for s in mask.shape):
        return weights, counts
    geo = cube_geometry(r, d)
    ring = np.array(geo.boundary) + 1
    ring_flat = np.ravel_multi_index(tuple(ring.T), (m,) * d)
    win = sliding_window_view(mask, (m,) * d)
    lead = win.shape[:d]
    ring_ok = win.reshape(*lead, k)[..., ring_flat].all(axis=-1)
    if not ring_ok.any():
        return weights, counts
    inner = sliding_window_view(states, (m,) * d)[(Ellipsis,) + (slice(1, -1),) * d]
    for j, pat in enumerate(patterns):
        match = ring_ok & np.all(inner == pat.values, axis=tuple(range(d, 2 * d)))
        z = np.argwhere(match) + 1 + lo
        occ = np.bincount(_residue_index(z, m), minlength=k).reshape((m,) * d)
        # origin in class rho sees the occurrences at z = rho + 1 (mod m)
        counts[j] = np.roll(occ, -1, axis=tuple(range(d))).ravel()
    return weights, counts


def harvest_patterns(config: Configuration, patterns: Sequence[Pattern],
                     size_range: tuple[int, int] = (1, 2**62),
                     labeling: ClusterLabeling | None = None) -> PatternRecords:
    """Records for every non-border cluster with size in ``size_range``."""
    if not patterns:
        raise ValueError("need at least one pattern")
    r, d = patterns[0].r, patterns[0].d
    if any((p.r, p.d) != (r, d) for p in patterns):
        raise ValueError("harvested patterns must share r and d")
    lab = labeling if labeling is not None else extract_clusters(config)
    lo_n, hi_n = size_range
    keep = (lab.sizes >= lo_n) & (lab.sizes <= hi_n) & ~lab.boundary
    keep[0] = False
    chosen = np.flatnonzero(keep)
    out = PatternRecords.empty(r, d, len(patterns))
    if chosen.size == 0:
        return out
    boxes = ndimage.find_objects(lab.labels, max_label=int(chosen.max()))
    weights, counts = [], []
    for label in chosen:
        sl = boxes[label - 1]
        mask = lab.labels[sl] == label
        origin = [s.start + wl for s, wl in zip(sl, config.window.lo)]
        w, c = cluster_pattern_counts(config.states[sl], mask, origin, patterns)
        weights.append(w)
        counts.append(c)
    out.sizes = lab.sizes[chosen].astype(np.int64)
    out.weights = np.stack(weights)
    out.counts = np.stack(counts)
    return out
