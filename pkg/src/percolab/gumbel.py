"""Maximal clusters in boxes and their double-exponential law."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .clusters import extract_clusters, max_cluster_size
from .lattice import Window
from .sampler import ProductMeasureSpec, RngPolicy, sample_product

MAX_WINDOW_SITES = 2**26


@dataclass
class MaxClusterSample:
    p: float
    n: int
    mode: str
    seed: int
    values: np.ndarray
    d: int = 2
    margin: int = 0

    @property
    def replicates(self) -> int:
        return int(self.values.size)

    header = ("replicate", "value")

    def rows(self):
        for k, v in enumerate(self.values):
            yield k, int(v)


def _replicates(p, n, d, margin, mode, seed, indices):
    window = Window.centered(n + margin, d)
    spec = ProductMeasureSpec.bernoulli(p)
    policy = RngPolicy(seed)
    out = []
    for k in indices:
        config = sample_product(window, spec, policy.generator(k))
        out.append(max_cluster_size(config, n, mode, extract_clusters(config)))
    return out


def simulate_max_clusters(p: float, n: int, replicates: int, seed: int, mode: str = "all",
                          d: int = 2, margin: int = 32, workers: int = 1,
                          max_sites: int = MAX_WINDOW_SITES) -> MaxClusterSample:
    """|C_max| over B_n = [-n, n]^d in independent Bernoulli(p) windows.

    Each window extends ``margin`` sites beyond the box; replicate k uses
    the RNG stream (seed, k), so results do not depend on ``workers``.
    """
    if replicates < 1:
        raise ValueError("need at least one replicate")
    if n < 0 or margin < 0:
        raise ValueError("box half-width and margin must be non-negative")
    if mode not in ("all", "finite_only"):
        raise ValueError(f"mode must be 'all' or 'finite_only', got {mode!r}")
    sites = (2 * (n + margin) + 1) ** d
    if sites > max_sites:
        raise MemoryError(f"window of {sites} sites exceeds the budget of {max_sites}")
    idx = list(range(replicates))
    if workers <= 1:
        values = _replicates(p, n, d, margin, mode, seed, idx)
    else:
        chunks = [idx[i::workers] for i in range(workers)]
        values = [0] * replicates
        with ProcessPoolExecutor(workers) as pool:
            futures = [pool.submit(_replicates, p, n, d, margin, mode, seed, c) for c in chunks]
            for chunk, fut in zip(chunks, futures):
                for k, v in zip(chunk, fut.result()):
                    values[k] = v
    return MaxClusterSample(p, n, mode, seed, np.array(values, dtype=np.int64), d, margin)


@dataclass(frozen=True)
class Centering:
    u: int
    saturated: bool


def choose_un(ks: Sequence[int], tail: Sequence[float], n: int, d: int = 2) -> Centering:
    """u_n = max{k : (2n+1)^d p_k >= 1} over the supplied tail values.

    ``saturated`` flags that the condition still holds at the last k, so the
    true u_n may lie beyond the range.
    """
    ks = np.asarray(ks, dtype=np.int64)
    tail = np.asarray(tail, dtype=float)
    if ks.size == 0 or ks.shape != tail.shape:
        raise ValueError("ks and tail must be non-empty and of equal length")
    ok = (2 * n + 1) ** d * tail >= 1
    if not ok.any():
        raise ValueError("tail range insufficient: |B_n| p_k < 1 already at the first k")
    last = int(np.flatnonzero(ok)[-1])
    return Centering(int(ks[last]), bool(ok[-1]))


@dataclass
class GumbelReport:
    u_n: int
    mu: float
    a_n: float
    offsets: np.ndarray
    ecdf: np.ndarray
    fitted: np.ndarray
    sup_distance: float
    usable_offsets: int
    meta: dict = field(default_factory=dict)

    header = ("offset", "ecdf", "fitted")

    def rows(self):
        for x, f, g in zip(self.offsets, self.ecdf, self.fitted):
            yield int(x), f, g

    def summary(self) -> dict:
        return {"u_n": self.u_n, "a_n": self.a_n, "sup_distance": self.sup_distance,
                "mu": self.mu, "usable_offsets": self.usable_offsets, **self.meta}


def empirical_cdf(values: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Right-continuous F(x) = #{v <= x} / N."""
    v = np.sort(np.asarray(values))
    return np.searchsorted(v, xs, side="right") / v.size


def gumbel_compare(sample, u_n: int, mu: float) -> GumbelReport:
    """Fit F(u_n + x) = exp(-a mu^x) with mu fixed and report the sup distance.

    With mu fixed, -log(-log F) = -log a - x log mu is linear in x with a
    known slope, so the least-squares intercept is a weighted mean over the
    offsets where 0 < F < 1.  Weights are inverse delta-method variances,
    N F log(F)^2 / (1 - F), which keeps sparsely populated extreme offsets
    from dominating the fit.
    """
    if not 0 < mu < 1:
        raise ValueError(f"mu must lie in (0, 1), got {mu}")
    values = np.asarray(getattr(sample, "values", sample), dtype=np.int64)
    if values.size == 0:
        raise ValueError("empty sample")
    x_all = values - int(u_n)
    xs = np.arange(x_all.min() - 1, x_all.max() + 1)
    F = empirical_cdf(x_all, xs)
    usable = (F > 0) & (F < 1)
    if usable.sum() < 3:
        raise ValueError(f"only {int(usable.sum())} usable offsets; sample is degenerate")
    Fu = F[usable]
    weights = Fu * np.log(Fu) ** 2 / (1 - Fu)
    log_a = np.average(np.log(-np.log(Fu)) - xs[usable] * math.log(mu), weights=weights)
    a = float(math.exp(log_a))
    fitted = np.exp(-a * mu ** xs.astype(float))
    sup = float(np.max(np.abs(F - fitted)))
    meta = {}
    if hasattr(sample, "p"):
        meta = {"n": sample.n, "p": sample.p, "mode": sample.mode, "seed": sample.seed,
                "replicates": sample.replicates}
    return GumbelReport(int(u_n), float(mu), a, xs, F, fitted, sup, int(usable.sum()), meta)


def sample_double_exponential(a: float, mu: float, size: int, seed) -> np.ndarray:
    """Integer draws X with P(X <= x) = exp(-a mu^x) at every integer x.

    A continuous draw from that law is rounded up, which leaves the CDF at
    integers unchanged.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u = rng.random(size)
    # F(t) = u  <=>  t = log(-log(u) / a) / log(mu)
    t = np.log(-np.log(u) / a) / math.log(mu)
    return np.ceil(t).astype(np.int64)
