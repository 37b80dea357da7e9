"""Brute-force reference computations, written independently of the package.

Nothing here imports percolab: each oracle enumerates states or subsets
directly and uses only the definitions.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter


def _neighbours(x, y):
    return ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))


def _component(start, occupied):
    seen = {start}
    stack = [start]
    while stack:
        s = stack.pop()
        for t in _neighbours(*s):
            if t in occupied and t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


def diamond_cluster_law(p: float, radius: int = 2) -> dict[int, float]:
    """P(|C(0)| = n) for the sizes n decided inside the L1 ball of ``radius``.

    All 2^|ball| states are enumerated.  A cluster is only trusted if every
    neighbour of it lies in the ball, which holds for n <= radius.
    """
    ball = [(x, y) for x in range(-radius, radius + 1) for y in range(-radius, radius + 1)
            if abs(x) + abs(y) <= radius]
    ball_set = set(ball)
    law = Counter()
    for bits in itertools.product((0, 1), repeat=len(ball)):
        occupied = {s for s, b in zip(ball, bits) if b}
        if (0, 0) not in occupied:
            continue
        cluster = _component((0, 0), occupied)
        if not all(t in ball_set for s in cluster for t in _neighbours(*s)):
            continue
        k = sum(bits)
        law[len(cluster)] += p**k * (1 - p) ** (len(ball) - k)
    return {n: v for n, v in law.items() if n <= radius}


def polyomino_counts(n_max: int, side: int = 6) -> list[int]:
    """Fixed polyominoes of each size via subsets of a side x side window.

    Every translation class has exactly one member touching both the x = 0
    and y = 0 lines, and for n <= side that member fits in the window.
    """
    cells = [(x, y) for x in range(side) for y in range(side)]
    counts = [0] * (n_max + 1)
    for n in range(1, n_max + 1):
        for subset in itertools.combinations(cells, n):
            if min(x for x, _ in subset) or min(y for _, y in subset):
                continue
            chosen = set(subset)
            if len(_component(subset[0], chosen)) == n:
                counts[n] += 1
    return counts[1:]


def perimeter(cells) -> int:
    cells = set(cells)
    return len({t for s in cells for t in _neighbours(*s)} - cells)


def animals_with_perimeters(n: int, side: int = 6) -> Counter:
    """Counter of perimeters over fixed animals of size n (same subset scheme)."""
    cells = [(x, y) for x in range(side) for y in range(side)]
    out = Counter()
    for subset in itertools.combinations(cells, n):
        if min(x for x, _ in subset) or min(y for _, y in subset):
            continue
        if len(_component(subset[0], set(subset))) == n:
            out[perimeter(subset)] += 1
    return out


def local_box_probability(pattern_values, p: float) -> float:
    """P(box) by summing over all 2^9 states of the 3x3 block (r = 1)."""
    centre = pattern_values
    total = 0.0
    for bits in itertools.product((0, 1), repeat=9):
        if bits[4] != centre:
            continue
        if any(bits[k] != 1 for k in range(9) if k != 4):
            continue
        total += math.prod(p if b else 1 - p for b in bits)
    return total


def union_find_sizes(occupied) -> list[int]:
    """Sorted cluster sizes of a set of occupied sites via union-find."""
    parent = {s: s for s in occupied}

    def find(s):
        while parent[s] != s:
            parent[s] = parent[parent[s]]
            s = parent[s]
        return s

    for s in occupied:
        for t in _neighbours(*s):
            if t in parent:
                a, b = find(s), find(t)
                if a != b:
                    parent[a] = b
    return sorted(Counter(find(s) for s in occupied).values())
