"""Exact cluster-size laws for two-dimensional Bernoulli site percolation.

Everything here reduces to lattice animals with site perimeters:
P(C = A) = p^|A| (1-p)^t(A) for every finite connected A containing the
origin.  Enumeration keeps integer bookkeeping (counts keyed by size,
perimeter and pattern counts) and evaluates probabilities last.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator

import numpy as np

from .lattice import cube_geometry
from .patterns import Pattern, box_probability, cluster_contribution, is_cluster_determined
from .sampler import ProductMeasureSpec

DEFAULT_BUDGET = 12
STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True)
class LatticeAnimal:
    cells: tuple[tuple[int, int], ...]
    perimeter: int

    @property
    def size(self) -> int:
        return len(self.cells)

    @property
    def left_endpoint(self) -> tuple[int, int]:
        return self.cells[0]


def _check_budget(n_max: int, budget: int) -> None:
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    if n_max > budget:
        raise ValueError(f"n_max={n_max} exceeds the enumeration budget {budget}")


def _redelmeier(n_max: int, visit: Callable[[int, int, set], None],
                sizes: frozenset | None = None) -> None:
    """Grow every fixed animal whose lexicographic minimum is the origin.

    Cells are encoded as x * W + (y + OFF) with x >= 0, so "lexicographically
    after the origin" is simply "code >= origin code".  ``visit(size,
    perimeter, cells)`` is called once per animal (only for ``sizes`` when
    given); ``cells`` is the live set of codes and must not be kept.
    """
    off = n_max + 1
    W = 2 * n_max + 3
    origin = off
    steps = (W, -W, 1, -1)
    occupied: set[int] = set()
    reached = {origin}
    touching: dict[int, int] = defaultdict(int)

    def grow(untried: list[int], size: int, perimeter: int) -> None:
        while untried:
            c = untried.pop()
            occupied.add(c)
            t = perimeter - 1 if size else 0
            new, bumped = [], []
            for s in steps:
                nb = c + s
                if nb in occupied:
                    continue
                if touching[nb] == 0:
                    t += 1
                touching[nb] += 1
                bumped.append(nb)
                if nb > origin and nb not in reached:
                    reached.add(nb)
                    new.append(nb)
            if sizes is None or size + 1 in sizes:
                visit(size + 1, t, occupied)
            if size + 1 < n_max:
                grow(untried + new, size + 1, t)
            for nb in new:
                reached.discard(nb)
            for nb in bumped:
                touching[nb] -= 1
            occupied.discard(c)

    grow([origin], 0, 0)


def _decoder(n_max: int):
    off = n_max + 1
    W = 2 * n_max + 3

    def decode(code: int) -> tuple[int, int]:
        x, y = divmod(code, W)
        return x, y - off

    return decode


def enumerate_animals(n_max: int, budget: int = DEFAULT_BUDGET) -> Iterator[LatticeAnimal]:
    """Every fixed polyomino of size <= n_max with left-endpoint at the origin."""
    _check_budget(n_max, budget)
    decode = _decoder(n_max)
    found: list[LatticeAnimal] = []

    def visit(size, t, cells):
        found.append(LatticeAnimal(tuple(sorted(decode(c) for c in cells)), t))

    _redelmeier(n_max, visit)
    yield from found


@lru_cache(maxsize=None)
def _anchored_census(n_max: int) -> tuple[Counter, ...]:
    census = tuple(Counter() for _ in range(n_max + 1))

    def visit(size, t, cells):
        census[size][t] += 1

    _redelmeier(n_max, visit)
    return census


def perimeter_census(n_max: int, budget: int = DEFAULT_BUDGET) -> tuple[Counter, ...]:
    """census[n][t] = number of anchored animals of size n and perimeter t."""
    _check_budget(n_max, budget)
    return _anchored_census(n_max)


def _weight(p: float, n: int, t: int) -> float:
    return p**n * (1.0 - p) ** t


def exact_cstar(n: int, p: float, budget: int = DEFAULT_BUDGET) -> float:
    """c*_n = P(|C^le(0)| = n): the origin is the left-endpoint of a size-n cluster."""
    census = perimeter_census(n, budget)
    return math.fsum(k * _weight(p, n, t) for t, k in census[n].items())


def exact_cn(n: int, p: float, budget: int = DEFAULT_BUDGET) -> float:
    """c_n = P(|C| = n), via the n translates of each anchored animal."""
    _check_budget(n, budget)
    return n * exact_cstar(n, p, budget)


def rooted_perimeter_census(n_max: int, budget: int = 10) -> tuple[Counter, ...]:
    """Same kind of census, for all animals containing the origin.

    Built by level-wise growth from the single site with explicit
    de-duplication; it shares no code with the anchored enumeration and
    serves as its cross-check.
    """
    _check_budget(n_max, budget)
    return _rooted_census(n_max)


@lru_cache(maxsize=None)
def _rooted_census(n_max: int) -> tuple[Counter, ...]:
    census = tuple(Counter() for _ in range(n_max + 1))
    level = {((0, 0),)}
    for n in range(1, n_max + 1):
        if n > 1:
            grown = set()
            for animal in level:
                cells = set(animal)
                for x, y in animal:
                    for dx, dy in STEPS:
                        nb = (x + dx, y + dy)
                        if nb not in cells:
                            grown.add(tuple(sorted(cells | {nb})))
            level = grown
        for animal in level:
            cells = set(animal)
            perim = {(x + dx, y + dy) for x, y in animal for dx, dy in STEPS} - cells
            census[n][len(perim)] += 1
    return census


def exact_cn_rooted(n: int, p: float, budget: int = 10) -> float:
    census = rooted_perimeter_census(n, budget)
    return math.fsum(k * _weight(p, n, t) for t, k in census[n].items())


@dataclass(frozen=True)
class ExactTail:
    """Exact c_n, c*_n for n = 1..n_max; ``tail[n] = P(|C| >= n)``.

    ``tail`` is computed as p - sum_{m<n} c_m, which equals
    p_n = P(n <= |C| < infinity) whenever no infinite cluster exists
    (p below the critical point).
    """

    p: float
    n_max: int
    cn: np.ndarray
    cstar: np.ndarray
    tail: np.ndarray

    @property
    def ns(self) -> np.ndarray:
        return np.arange(1, self.n_max + 1)

    def rows(self):
        for n in range(1, self.n_max + 1):
            yield n, float(self.cn[n]), float(self.cstar[n]), float(self.tail[n])


def exact_tail(p: float, n_max: int = DEFAULT_BUDGET, budget: int = DEFAULT_BUDGET) -> ExactTail:
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    census = perimeter_census(n_max, budget)
    cstar = np.zeros(n_max + 1)
    for n in range(1, n_max + 1):
        cstar[n] = math.fsum(k * _weight(p, n, t) for t, k in census[n].items())
    cn = cstar * np.arange(n_max + 1)
    tail = np.zeros(n_max + 2)
    for n in range(1, n_max + 2):
        tail[n] = p - math.fsum(cn[1:n])
    return ExactTail(p, n_max, cn, cstar, tail)


@dataclass(frozen=True)
class JointCountTable:
    """probs[(i, j)] = P(|C| = n, N_P = i, N_P' = j)."""

    n: int
    p: float
    P: Pattern
    P_prime: Pattern
    probs: dict

    def total(self) -> float:
        return math.fsum(self.probs.values())

    def rows(self):
        for (i, j) in sorted(self.probs):
            yield self.n, i, j, self.probs[(i, j)]


def _occurrence_classes(cells: set, ring, cube, m: int) -> Counter:
    """Residue classes (mod m) of the sites z where the pattern ``cube`` occurs on ``cells``.

    For a cluster-determined pattern, an occurrence on C at z means: the ring
    around Q_z is in C, occupied pattern sites are in C, the rest are not.
    """
    hits = Counter()
    corner = ring[0]
    for (x, y) in cells:
        z = (x - corner[0], y - corner[1])
        if not all((z[0] + a, z[1] + b) in cells for a, b in ring):
            continue
        if all(((z[0] + a, z[1] + b) in cells) == (v == 1) for (a, b), v in cube):
            hits[(z[0] % m, z[1] % m)] += 1
    return hits


def joint_count_census(n: int, P: Pattern, P_prime: Pattern,
                       budget: int = DEFAULT_BUDGET) -> Counter:
    """counts[(t, i, j)] = number of (anchored animal, origin site) pairs.

    The origin is placed on each site of each anchored animal of size n in
    turn, and N_P, N_P' are read off against the fixed grid V.
    """
    _check_budget(n, budget)
    return _joint_census(n, P, P_prime)


@lru_cache(maxsize=None)
def _joint_census(n: int, P: Pattern, P_prime: Pattern) -> Counter:
    for pat in (P, P_prime):
        if pat.d != 2 or not is_cluster_determined(pat):
            raise ValueError("exact joint counts need cluster-determined d=2 patterns")
    if P.r != P_prime.r:
        raise ValueError("pattern pair must share the diameter r")
    geo = cube_geometry(P.r, 2)
    ring = sorted(geo.boundary)
    m = P.r + 2
    cubes = [[(y, pat[y]) for y in geo.cube] for pat in (P, P_prime)]
    decode = _decoder(n)
    out = Counter()

    def visit(size, t, codes):
        cells = {decode(c) for c in codes}
        occ = [_occurrence_classes(cells, ring, cubes[0], m),
               _occurrence_classes(cells, ring, cubes[1], m)]
        by_class = Counter((x % m, y % m) for x, y in cells)
        for (a, b), w in by_class.items():
            # origin at a site of class (a, b): V = (a+1, b+1) + m Z^2
            key = ((a + 1) % m, (b + 1) % m)
            out[(t, occ[0].get(key, 0), occ[1].get(key, 0))] += w

    _redelmeier(n, visit, frozenset({n}))
    return out


def exact_joint_counts(n: int, p: float, P: Pattern, P_prime: Pattern,
                       budget: int = DEFAULT_BUDGET) -> JointCountTable:
    census = joint_count_census(n, P, P_prime, budget)
    buckets = defaultdict(list)
    for (t, i, j), k in census.items():
        buckets[(i, j)].append(k * _weight(p, n, t))
    probs = {key: math.fsum(v) for key, v in buckets.items()}
    return JointCountTable(n, p, P, P_prime, probs)


def verify_swap_identity(n: int, p: float, P: Pattern, P_prime: Pattern,
                         budget: int = DEFAULT_BUDGET) -> float:
    """Largest |LHS/RHS - 1| of c_{n+1}(i-1, j+1) = i/(j+1) box(P')/box(P) c_n(i, j).

    Checked over i >= 1, j >= 0 with c_n(i, j) > 0, and conversely over every
    populated c_{n+1}(i', j') with j' >= 1.  The identity needs the swap
    P -> P' to add exactly one site to the cluster.
    """
    dc = cluster_contribution(P_prime) - cluster_contribution(P)
    if dc != 1:
        raise ValueError(f"swap identity needs c_P' - c_P = 1, got {dc}")
    measure = ProductMeasureSpec.bernoulli(p)
    ratio = box_probability(P_prime, measure) / box_probability(P, measure)
    now = exact_joint_counts(n, p, P, P_prime, budget)
    nxt = exact_joint_counts(n + 1, p, P, P_prime, budget)
    worst = 0.0
    for (i, j), value in now.probs.items():
        if i < 1 or value <= 0:
            continue
        rhs = i / (j + 1) * ratio * value
        lhs = nxt.probs.get((i - 1, j + 1), 0.0)
        worst = max(worst, abs(lhs / rhs - 1.0))
    for (i, j), value in nxt.probs.items():
        if j >= 1 and value > 0 and now.probs.get((i + 1, j - 1), 0.0) <= 0:
            worst = max(worst, 1.0)
    return worst


@dataclass(frozen=True)
class SupermultiCheck:
    A: float
    argmin: tuple[int, int]
    n_max: int
    p: float


def verify_supermulti(n_max: int, p: float, budget: int = DEFAULT_BUDGET) -> SupermultiCheck:
    """Best A with c_{n+m}/(n+m) >= A (c_n/n)(c_m/m) for all n + m <= n_max."""
    tail = exact_tail(p, n_max, budget)
    best, arg = math.inf, (0, 0)
    for a in range(1, n_max):
        for b in range(a, n_max - a + 1):
            ratio = (tail.cn[a + b] / (a + b)) / ((tail.cn[a] / a) * (tail.cn[b] / b))
            if ratio < best:
                best, arg = ratio, (a, b)
    return SupermultiCheck(best, arg, n_max, p)
