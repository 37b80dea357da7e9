"""Tail constants, ratio limits and conditional pattern statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .clusters import SizeCensus
from .harvest import PatternRecords


def _positive(cn: np.ndarray) -> None:
    if cn.size == 0 or np.any(~np.isfinite(cn)) or np.any(cn <= 0):
        raise ValueError("tail values must be finite and strictly positive")


def tail_from_total(ns: Sequence[int], cn: Sequence[float], total: float) -> np.ndarray:
    """p_n = total - sum_{m<n} c_m for n = 1..N+1 (ns must be 1..N)."""
    ns = np.asarray(ns)
    if not np.array_equal(ns, np.arange(1, ns.size + 1)):
        raise ValueError("tail from total mass needs ns = 1, 2, ..., N")
    partial = np.concatenate(([0.0], np.cumsum(np.asarray(cn, dtype=float))))
    return total - partial


@dataclass
class MuEstimate:
    """Per-n estimates of mu.

    root[k]    = c_n^(1/n)
    ratio[k]   = p_{n+1} / p_n   (nan without tail information)
    c_ratio[k] = c_{n+1} / c_n   (nan at the last n)
    """

    ns: np.ndarray
    root: np.ndarray
    ratio: np.ndarray
    c_ratio: np.ndarray

    @staticmethod
    def _last(values: np.ndarray) -> float:
        ok = np.isfinite(values)
        return float(values[ok][-1]) if ok.any() else math.nan

    @property
    def root_estimate(self) -> float:
        return self._last(self.root)

    @property
    def ratio_estimate(self) -> float:
        return self._last(self.ratio)


def estimate_mu(ns: Sequence[int], cn: Sequence[float], pn: Sequence[float] | None = None,
                total: float | None = None) -> MuEstimate:
    """Root and ratio estimators of the exponential tail constant.

    ``pn`` gives p_n for each n in ``ns`` plus one trailing value p_{N+1};
    alternatively ``total`` (the full mass sum_n c_n) determines it.
    """
    ns = np.asarray(ns, dtype=np.int64)
    cn = np.asarray(cn, dtype=float)
    if ns.shape != cn.shape:
        raise ValueError("ns and cn must have the same length")
    _positive(cn)
    root = cn ** (1.0 / ns)
    consecutive = np.concatenate((np.diff(ns) == 1, [False]))
    c_ratio = np.full(cn.size, math.nan)
    c_ratio[:-1] = cn[1:] / cn[:-1]
    c_ratio[~consecutive] = math.nan
    if pn is None and total is not None:
        pn = tail_from_total(ns, cn, total)
    ratio = np.full(cn.size, math.nan)
    if pn is not None:
        pn = np.asarray(pn, dtype=float)
        if pn.size != cn.size + 1:
            raise ValueError("pn needs one entry per n plus p_{N+1}")
        ok = pn[:-1] > 0
        ratio[ok] = pn[1:][ok] / pn[:-1][ok]
    return MuEstimate(ns, root, ratio, c_ratio)


@dataclass(frozen=True)
class StretchedFit:
    beta: float
    nu: float
    rms_residual: float


def fit_stretched(ns: Sequence[int], cn: Sequence[float]) -> StretchedFit:
    """Least squares of log(-log c_n) = beta log n + log(-log nu)."""
    ns = np.asarray(ns, dtype=float)
    cn = np.asarray(cn, dtype=float)
    if ns.size < 5 or np.unique(ns).size < 5:
        raise ValueError("stretched fit needs at least 5 distinct n")
    _positive(cn)
    if np.any(cn >= 1):
        raise ValueError("stretched fit needs c_n < 1")
    x = np.log(ns)
    y = np.log(-np.log(cn))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return StretchedFit(float(slope), float(np.exp(-np.exp(intercept))),
                        float(np.sqrt(np.mean(resid**2))))


@dataclass
class TailReport:
    source: str
    ns: np.ndarray
    cn: np.ndarray
    se: np.ndarray
    mu: MuEstimate
    stretched: StretchedFit | None = None

    header = ("n", "c_n", "stderr", "mu_root", "mu_ratio", "c_ratio")

    def rows(self):
        for k, n in enumerate(self.ns):
            yield (int(n), self.cn[k], self.se[k], self.mu.root[k], self.mu.ratio[k],
                   self.mu.c_ratio[k])

    def summary(self) -> dict:
        out = {
            "source": self.source,
            "n_max": int(self.ns[-1]),
            "mu_root": self.mu.root_estimate,
            "mu_ratio": self.mu.ratio_estimate,
        }
        if self.stretched is not None:
            out.update(beta=self.stretched.beta, nu=self.stretched.nu)
        return out


def tail_report(ns, cn, se=None, pn=None, total=None, source: str = "exact",
                stretched: bool = False) -> TailReport:
    cn = np.asarray(cn, dtype=float)
    se = np.zeros_like(cn) if se is None else np.asarray(se, dtype=float)
    mu = estimate_mu(ns, cn, pn=pn, total=total)
    fit = fit_stretched(ns, cn) if stretched else None
    return TailReport(source, np.asarray(ns), cn, se, mu, fit)


class CensusAccumulator:
    """Running per-site cluster statistics over independent windows.

    All sums are integer sums over configurations, so merging is exact and
    independent of the order in which windows arrive.
    """

    def __init__(self, region_sites: int):
        self.region_sites = int(region_sites)
        self.n_configs = 0
        self._size = 0
        self.count = np.zeros(0, np.int64)      # sum_k N_k(n)
        self.count2 = np.zeros(0, np.int64)     # sum_k N_k(n)^2
        self.tail = np.zeros(0, np.int64)       # sum_k sum_{m>=n} m N_k(m)
        self.tail2 = np.zeros(0, np.int64)
        self.tail_cross = np.zeros(0, np.int64)  # sum_k T_k(n) T_k(n+1)
        self.le_tail = np.zeros(0, np.int64)    # sum_k sum_{m>=n} N_k(m)
        self.le_tail2 = np.zeros(0, np.int64)
        self.le_cross = np.zeros(0, np.int64)

    _fields = ("count", "count2", "tail", "tail2", "tail_cross", "le_tail", "le_tail2", "le_cross")

    def _grow(self, size: int) -> None:
        if size <= self._size:
            return
        for name in self._fields:
            old = getattr(self, name)
            new = np.zeros(size, np.int64)
            new[:old.size] = old
            setattr(self, name, new)
        self._size = size

    def add(self, census: SizeCensus) -> None:
        if census.region_sites != self.region_sites:
            raise ValueError("census region size does not match the accumulator")
        n_top = max(census.counts, default=0)
        self._grow(n_top + 2)
        per = np.zeros(self._size, np.int64)
        for n, k in census.counts.items():
            per[n] = k
        mass = per * np.arange(self._size)
        tail = np.cumsum(mass[::-1])[::-1]
        le_tail = np.cumsum(per[::-1])[::-1]
        self.count += per
        self.count2 += per * per
        self.tail += tail
        self.tail2 += tail * tail
        self.tail_cross[:-1] += tail[:-1] * tail[1:]
        self.le_tail += le_tail
        self.le_tail2 += le_tail * le_tail
        self.le_cross[:-1] += le_tail[:-1] * le_tail[1:]
        self.n_configs += 1

    def merge(self, other: "CensusAccumulator") -> "CensusAccumulator":
        if other.region_sites != self.region_sites:
            raise ValueError("cannot merge accumulators over different regions")
        out = CensusAccumulator(self.region_sites)
        out._grow(max(self._size, other._size))
        for name in self._fields:
            acc = getattr(out, name)
            for src in (self, other):
                arr = getattr(src, name)
                acc[:arr.size] += arr
        out.n_configs = self.n_configs + other.n_configs
        return out

    def estimate(self) -> "EmpiricalTail":
        if self.n_configs < 2:
            raise ValueError("need at least two configurations for standard errors")
        k, area = self.n_configs, self.region_sites
        ns = np.arange(self._size)

        def mean_se(s, s2):
            mean = s / k
            var = np.maximum(s2 / k - mean**2, 0.0) * k / (k - 1)
            return mean / area, np.sqrt(var / k) / area

        cstar, cstar_se = mean_se(self.count.astype(float), self.count2.astype(float))
        tail, tail_se = mean_se(self.tail.astype(float), self.tail2.astype(float))
        le_tail, le_tail_se = mean_se(self.le_tail.astype(float), self.le_tail2.astype(float))
        return EmpiricalTail(
            ns=ns[1:], cstar=cstar[1:], cstar_se=cstar_se[1:],
            cn=(ns * cstar)[1:], cn_se=(ns * cstar_se)[1:],
            tail=tail[1:], tail_se=tail_se[1:],
            le_tail=le_tail[1:], le_tail_se=le_tail_se[1:],
            tail_counts=self.tail[1:].copy(), le_counts=self.le_tail[1:].copy(),
            n_configs=k, region_sites=area,
            _tail_cross=self.tail_cross[1:].astype(float),
            _tail2=self.tail2[1:].astype(float),
        )


@dataclass
class EmpiricalTail:
    """Size-biased estimates from harvested windows, indexed by n = 1..N.

    cn      : P(|C| = n) estimated as n * (clusters of size n per site)
    tail    : P(n <= |C| < infinity)
    le_tail : P(n <= |C^le(0)| < infinity), the per-site count of clusters
              of size >= n
    """

    ns: np.ndarray
    cstar: np.ndarray
    cstar_se: np.ndarray
    cn: np.ndarray
    cn_se: np.ndarray
    tail: np.ndarray
    tail_se: np.ndarray
    le_tail: np.ndarray
    le_tail_se: np.ndarray
    tail_counts: np.ndarray
    le_counts: np.ndarray
    n_configs: int
    region_sites: int
    _tail_cross: np.ndarray = field(repr=False, default=None)
    _tail2: np.ndarray = field(repr=False, default=None)

    def ratio_mu(self, min_clusters: int = 1000) -> tuple[float, float, int]:
        """p_{n+1}/p_n at the largest n whose tail still holds ``min_clusters``.

        Returns (mu, stderr, n); the error is the delta-method estimate over
        windows.
        """
        ok = np.flatnonzero(self.le_counts[:-1] >= min_clusters)
        if ok.size == 0:
            raise ValueError("no n with enough clusters in the tail for a ratio estimate")
        i = int(ok[-1])
        k, area = self.n_configs, self.region_sites
        b, a = self.tail[i] * area, self.tail[i + 1] * area  # per-window means
        var_b = self._tail2[i] / k - b * b
        var_a = self._tail2[i + 1] / k - a * a
        cov = self._tail_cross[i] / k - a * b
        mu = a / b
        var = (var_a + mu * mu * var_b - 2 * mu * cov) / (b * b) / (k - 1)
        return float(mu), float(math.sqrt(max(var, 0.0))), int(self.ns[i])


def geometric_bins(lo: int, hi: int, count: int) -> list[tuple[int, int]]:
    """``count`` half-open integer bins [a, b) covering [lo, hi] geometrically."""
    if not 1 <= lo < hi or count < 1:
        raise ValueError("need 1 <= lo < hi and count >= 1")
    edges = np.unique(np.round(np.geomspace(lo, hi + 1, count + 1)).astype(int))
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


@dataclass
class BinStats:
    lo: int
    hi: int
    clusters: int
    weight: int
    mean_size: float
    mean_P: float
    var_P: float
    mean_P_prime: float
    var_P_prime: float
    mean_ratio: float
    excluded_fraction: float

    @property
    def ratio_of_means(self) -> float:
        return self.mean_P / self.mean_P_prime if self.mean_P_prime > 0 else math.nan

    @property
    def empty(self) -> bool:
        return self.clusters == 0


@dataclass
class ConcentrationReport:
    pair: tuple[int, int]
    gamma: float | None
    bins: list[BinStats]
    theorem: "PatternTheoremReport | None" = None

    header = ("bin_lo", "bin_hi", "clusters", "mean_size", "mean_N_P", "var_N_P",
              "mean_N_P_prime", "var_N_P_prime", "ratio_of_means", "mean_ratio",
              "excluded_fraction", "gamma")

    def rows(self):
        for b in self.bins:
            yield (b.lo, b.hi, b.clusters, b.mean_size, b.mean_P, b.var_P, b.mean_P_prime,
                   b.var_P_prime, b.ratio_of_means, b.mean_ratio, b.excluded_fraction,
                   self.gamma if self.gamma is not None else math.nan)

    def summary(self) -> dict:
        bins = []
        for k, b in enumerate(self.bins):
            entry = {"lo": b.lo, "hi": b.hi, "clusters": b.clusters,
                     "mean_N_P": b.mean_P, "mean_N_P_prime": b.mean_P_prime,
                     "ratio_of_means": b.ratio_of_means,
                     "excluded_fraction": b.excluded_fraction}
            if self.theorem is not None:
                entry["prob_N_le_an"] = dict(zip(map(str, self.theorem.a_grid),
                                                 self.theorem.prob[k].tolist()))
            bins.append(entry)
        return {"pair": list(self.pair), "gamma": self.gamma, "bins": bins}


def _in_bin(records: PatternRecords, lo: int, hi: int) -> np.ndarray:
    return (records.sizes >= lo) & (records.sizes < hi)


def conditional_pattern_stats(records: PatternRecords, bins: Sequence[tuple[int, int]],
                              pair: tuple[int, int] = (0, 1),
                              gamma: float | None = None,
                              a_grid: Sequence[float] | None = None) -> ConcentrationReport:
    """Statistics of (N_P, N_P') under P(. | |C| in bin).

    Every (cluster, origin class) record carries its integer site weight, so
    bin sums are exact and do not depend on record order.
    """
    i, j = pair
    out = []
    for lo, hi in bins:
        sel = _in_bin(records, lo, hi)
        w = records.weights[sel]
        W = int(w.sum())
        if W == 0:
            nan = math.nan
            out.append(BinStats(lo, hi, 0, 0, nan, nan, nan, nan, nan, nan, nan))
            continue
        a = records.counts[sel, i, :]
        b = records.counts[sel, j, :]
        sizes = records.sizes[sel]
        mean_a = int((w * a).sum()) / W
        mean_b = int((w * b).sum()) / W
        var_a = int((w * a * a).sum()) / W - mean_a**2
        var_b = int((w * b * b).sum()) / W - mean_b**2
        pos = b > 0
        w_pos = int(w[pos].sum())
        mean_ratio = float((w[pos] * a[pos] / b[pos]).sum() / w_pos) if w_pos else math.nan
        out.append(BinStats(lo, hi, int(sel.sum()), W, int((w.sum(axis=1) * sizes).sum()) / W,
                            mean_a, var_a, mean_b, var_b, mean_ratio, 1 - w_pos / W))
    theorem = pattern_theorem_report(records, i, a_grid, bins) if a_grid is not None else None
    return ConcentrationReport(pair, gamma, out, theorem)


@dataclass
class PatternTheoremReport:
    pattern: int
    a_grid: list[float]
    bins: list[tuple[int, int]]
    clusters: list[int]
    prob: np.ndarray  # (len(bins), len(a_grid))

    header = ("bin_lo", "bin_hi", "clusters", "a", "prob_N_le_an")

    def rows(self):
        for k, (lo, hi) in enumerate(self.bins):
            for m, a in enumerate(self.a_grid):
                yield lo, hi, self.clusters[k], a, self.prob[k, m]


def pattern_theorem_report(records: PatternRecords, pattern: int, a_grid: Sequence[float],
                           bins: Sequence[tuple[int, int]]) -> PatternTheoremReport:
    """Empirical P_n(N_P <= a n) per bin, with n the cluster size."""
    a_grid = [float(a) for a in a_grid]
    prob = np.full((len(bins), len(a_grid)), math.nan)
    clusters = []
    for k, (lo, hi) in enumerate(bins):
        sel = _in_bin(records, lo, hi)
        clusters.append(int(sel.sum()))
        w = records.weights[sel]
        W = w.sum()
        if W == 0:
            continue
        counts = records.counts[sel, pattern, :]
        sizes = records.sizes[sel][:, None]
        for m, a in enumerate(a_grid):
            prob[k, m] = (w * (counts <= a * sizes)).sum() / W
    return PatternTheoremReport(pattern, a_grid, list(bins), clusters, prob)


def occurrence_density(records: PatternRecords, pattern: int, bin: tuple[int, int]) -> float:
    """Mean N_P divided by mean |C| within a bin (size-biased)."""
    sel = _in_bin(records, *bin)
    w = records.weights[sel]
    W = w.sum()
    if W == 0:
        return math.nan
    mean_n = (w.sum(axis=1) * records.sizes[sel]).sum() / W
    return float((w * records.counts[sel, pattern, :]).sum() / W / mean_n)


@dataclass
class RatioLimitReport:
    ns: np.ndarray
    c_ratio: np.ndarray
    p_ratio: np.ndarray
    mu_ref: float
    deviation: np.ndarray
    route_gap: np.ndarray
    normalized: np.ndarray | None = None
    beta: float | None = None

    header = ("n", "c_ratio", "p_ratio", "mu_ref", "deviation", "route_gap", "normalized")

    def rows(self):
        for k, n in enumerate(self.ns):
            norm = self.normalized[k] if self.normalized is not None else math.nan
            yield (int(n), self.c_ratio[k], self.p_ratio[k], self.mu_ref, self.deviation[k],
                   self.route_gap[k], norm)


def ratio_limit_report(ns, cn, pn=None, total=None, mu_ref: float | None = None,
                       beta: float | None = None) -> RatioLimitReport:
    """Deviations of c_{n+1}/c_n from the reference mu and from p_{n+1}/p_n.

    With ``beta`` the normalized deviation n^((1-beta)/2) |c_{n+1}/c_n - 1|
    is added, which stays bounded under a stretched-exponential tail.
    """
    est = estimate_mu(ns, cn, pn=pn, total=total)
    if mu_ref is None:
        mu_ref = est.ratio_estimate
        if math.isnan(mu_ref):
            mu_ref = MuEstimate._last(est.c_ratio)
    deviation = np.abs(est.c_ratio - mu_ref)
    gap = np.abs(est.c_ratio - est.ratio)
    normalized = None
    if beta is not None:
        normalized = est.ns ** ((1.0 - beta) / 2.0) * np.abs(est.c_ratio - 1.0)
    return RatioLimitReport(est.ns, est.c_ratio, est.ratio, float(mu_ref), deviation, gap,
                            normalized, beta)
