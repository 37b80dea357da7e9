"""Patterns on the cube Q and their occurrences on the origin's cluster."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Collection, NamedTuple, Sequence

import numpy as np

from .lattice import Configuration, Site, Window, cube_geometry, grid_v_sites
from .sampler import MarkovConditionalSpec, ProductMeasureSpec, RngPolicy, sample_markov, sample_product


@dataclass(frozen=True, eq=False)
class Pattern:
    """A q-state assignment on Q = {0, ..., r-1}^d, stored as an r^d array."""

    values: np.ndarray
    q: int = 2

    def __post_init__(self):
        values = np.array(self.values, dtype=np.uint8)
        if values.ndim < 2 or len(set(values.shape)) != 1:
            raise ValueError(f"pattern must be an r^d cube with d >= 2, got shape {values.shape}")
        if values.max() >= self.q:
            raise ValueError(f"pattern value {values.max()} not below q={self.q}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def uniform(cls, r: int, d: int = 2, state: int = 0, q: int = 2) -> "Pattern":
        return cls(np.full((r,) * d, state), q)

    @classmethod
    def single(cls, r: int, site: Sequence[int], d: int = 2, state: int = 1, q: int = 2) -> "Pattern":
        """Pattern in state 0 except ``site``."""
        values = np.zeros((r,) * d, dtype=np.uint8)
        values[tuple(site)] = state
        return cls(values, q)

    @property
    def r(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.ndim

    def __getitem__(self, y: Sequence[int]) -> int:
        return int(self.values[tuple(y)])

    def __eq__(self, other):
        if not isinstance(other, Pattern):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.q, self.values.shape, self.values.tobytes()))


def single_site_pair(d: int = 2) -> tuple[Pattern, Pattern]:
    """(occupied, vacant) patterns of diameter 1."""
    return Pattern.uniform(1, d, 1), Pattern.uniform(1, d, 0)


def corner_center_pair(d: int = 2) -> tuple[Pattern, Pattern]:
    """Diameter-3 pair: occupied only at (1,...,1), and occupied only at 0.

    The first contributes nothing to the surrounding cluster, the second one
    site, so swapping the first for the second grows the cluster by one.
    """
    return Pattern.single(3, (1,) * d, d), Pattern.single(3, (0,) * d, d)


def read_pattern(path) -> Pattern:
    return parse_pattern(Path(path).read_text())


def parse_pattern(text: str) -> Pattern:
    """Digit grid, one row per line.

    For d = 3, slices are separated by blank lines.  ``#`` starts a comment
    and an optional ``q = N`` line declares the number of states.
    """
    q = None
    slices, current = [], []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if "=" in line:
            key, val = (s.strip() for s in line.split("=", 1))
            if key != "q":
                raise ValueError(f"unknown pattern header {key!r}")
            q = int(val)
            continue
        if not line:
            if current:
                slices.append(current)
                current = []
            continue
        if not line.isdigit():
            raise ValueError(f"pattern row {line!r} is not a digit string")
        current.append([int(c) for c in line])
    if current:
        slices.append(current)
    if not slices:
        raise ValueError("empty pattern")
    arr = np.array(slices[0] if len(slices) == 1 else slices)
    if q is None:
        q = max(2, int(arr.max()) + 1)
    return Pattern(arr, q)


def format_pattern(pattern: Pattern) -> str:
    lines = [f"q = {pattern.q}"]
    values = pattern.values
    if pattern.d == 2:
        blocks = [values]
    elif pattern.d == 3:
        blocks = list(values)
    else:
        raise ValueError("pattern files support d = 2 and d = 3")
    for k, block in enumerate(blocks):
        if k:
            lines.append("")
        lines.extend("".join(str(v) for v in row) for row in block)
    return "\n".join(lines) + "\n"


def write_pattern(pattern: Pattern, path) -> None:
    Path(path).write_text(format_pattern(pattern))


def _shift(x: Sequence[int], offsets) -> list[Site]:
    return [tuple(a + b for a, b in zip(x, y)) for y in offsets]


def occurs_at(config: Configuration, pattern: Pattern, x: Sequence[int]) -> bool:
    """True iff the configuration equals ``pattern`` on Q_x."""
    x = tuple(x)
    window = config.window
    lo, hi = x, tuple(v + pattern.r for v in x)
    if not window.contains_box(lo, hi):
        raise ValueError(f"cube at {x} extends outside the window")
    sl = tuple(slice(l - wl, h - wl) for l, h, wl in zip(lo, hi, window.lo))
    return bool(np.array_equal(config.states[sl], pattern.values))


def occurs_on_C_at(config: Configuration, pattern: Pattern, x: Sequence[int],
                   C: Collection[Site]) -> bool:
    """True iff ``pattern`` occurs at x and the boundary of Q_x lies in C."""
    x = tuple(x)
    geo = cube_geometry(pattern.r, pattern.d)
    lo, hi = tuple(v - 1 for v in x), tuple(v + pattern.r + 1 for v in x)
    if not config.window.contains_box(lo, hi):
        raise ValueError(f"extended cube at {x} extends outside the window")
    if not all(y in C for y in _shift(x, geo.boundary)):
        return False
    return occurs_at(config, pattern, x)


def count_NP(config: Configuration, pattern: Pattern, C: Collection[Site]) -> int:
    """Occurrences of ``pattern`` on C at grid sites whose extended cube fits."""
    if not C:
        return 0
    return sum(occurs_on_C_at(config, pattern, x, C)
               for x in grid_v_sites(config.window, pattern.r, fit="extended"))


def _neighbours(y: Site):
    for ax in range(len(y)):
        for step in (-1, 1):
            z = list(y)
            z[ax] += step
            yield tuple(z)


def attached_sites(pattern: Pattern) -> set[Site]:
    """Occupied sites of Q joined to the boundary through occupied sites."""
    geo = cube_geometry(pattern.r, pattern.d)
    cube = set(geo.cube)
    seen = set(geo.boundary)
    queue = deque(geo.boundary)
    attached = set()
    while queue:
        y = queue.popleft()
        for z in _neighbours(y):
            if z in cube and z not in seen and pattern[z] == 1:
                seen.add(z)
                attached.add(z)
                queue.append(z)
    return attached


def cluster_contribution(pattern: Pattern) -> int:
    """c_P: occupied pattern sites that join any cluster surrounding Q."""
    return len(attached_sites(pattern))


def is_cluster_determined(pattern: Pattern) -> bool:
    """Whether an occurrence on C is decided by C alone.

    Every occupied site must be attached to the boundary, and every other
    site must neighbour the boundary or an attached site (so it is on the
    perimeter of C and its state is forced).
    """
    if pattern.q != 2:
        return False
    geo = cube_geometry(pattern.r, pattern.d)
    attached = attached_sites(pattern)
    footprint = attached | set(geo.boundary)
    for y in geo.cube:
        if pattern[y] == 1:
            if y not in attached:
                return False
        elif not any(z in footprint for z in _neighbours(y)):
            return False
    return True


class BoxEstimate(NamedTuple):
    probability: float
    stderr: float


def box_probability(pattern: Pattern, measure, samples: int | None = None, seed: int = 0,
                    window_shape: Sequence[int] | None = None, sweeps: int = 100):
    """Probability that the field equals P on Q and is occupied on its boundary.

    Product measures are evaluated exactly and return a float.  With
    ``samples`` set (required for Markov specs), the frequency over grid
    sites of independently sampled windows is returned as a ``BoxEstimate``
    whose standard error comes from the spread between windows.
    """
    geo = cube_geometry(pattern.r, pattern.d)
    if samples is None:
        if not isinstance(measure, ProductMeasureSpec):
            raise ValueError("exact box probability needs a product measure; pass samples")
        if measure.q != pattern.q:
            raise ValueError("pattern and measure disagree on q")
        logs = [measure.probs[int(v)] for v in pattern.values.ravel()]
        logs += [measure.probs[1]] * len(geo.boundary)
        return math.prod(logs)
    if samples <= 0:
        raise ValueError("Monte Carlo box probability needs at least one sample")
    shape = tuple(window_shape or (64,) * pattern.d)
    window = Window.box(shape, pattern.q)
    policy = RngPolicy(seed)
    target = np.ones((pattern.r + 2,) * pattern.d, dtype=np.uint8)
    target[(slice(1, -1),) * pattern.d] = pattern.values
    freqs = []
    for k in range(samples):
        if isinstance(measure, ProductMeasureSpec):
            config = sample_product(window, measure, policy.generator(k))
        elif isinstance(measure, MarkovConditionalSpec):
            config = sample_markov(window, measure, policy.generator(k), sweeps)
        else:
            raise TypeError(f"unsupported measure {type(measure).__name__}")
        sites = grid_v_sites(window, pattern.r, fit="extended")
        hits = 0
        for x in sites:
            sl = tuple(slice(v - 1, v + pattern.r + 1) for v in x)
            hits += bool(np.array_equal(config.states[sl], target))
        freqs.append(hits / len(sites))
    freqs = np.array(freqs)
    se = freqs.std(ddof=1) / math.sqrt(samples) if samples > 1 else float("nan")
    return BoxEstimate(float(freqs.mean()), float(se))


def gamma(pattern: Pattern, pattern_prime: Pattern, mu: float, measure) -> float:
    """mu^(c_P') P(box P) / (mu^(c_P) P(box P')), the limiting N_P / N_P' ratio."""
    if not 0 < mu <= 1:
        raise ValueError(f"mu must lie in (0, 1], got {mu}")
    box = box_probability(pattern, measure)
    box_prime = box_probability(pattern_prime, measure)
    if box_prime == 0:
        raise ZeroDivisionError("box probability of the second pattern is zero")
    dc = cluster_contribution(pattern_prime) - cluster_contribution(pattern)
    return mu**dc * box / box_prime


@dataclass(frozen=True)
class PatternPairContext:
    P: Pattern
    P_prime: Pattern
    c_P: int
    c_P_prime: int
    box_P: float
    box_P_prime: float
    gamma: float

    @property
    def delta_c(self) -> int:
        return self.c_P_prime - self.c_P


def pattern_pair(P: Pattern, P_prime: Pattern, measure: ProductMeasureSpec,
                 mu: float) -> PatternPairContext:
    if (P.r, P.d, P.q) != (P_prime.r, P_prime.d, P_prime.q):
        raise ValueError("patterns of a pair must share r, d and q")
    return PatternPairContext(
        P, P_prime,
        cluster_contribution(P), cluster_contribution(P_prime),
        box_probability(P, measure), box_probability(P_prime, measure),
        gamma(P, P_prime, mu, measure),
    )
