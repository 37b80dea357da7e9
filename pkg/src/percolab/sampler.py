"""Samplers for product measures and nearest-neighbour Markov fields."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from numba import njit

from .lattice import Configuration, Window

PROB_TOL = 1e-12
MAX_TABLE_CODES = 10_000_000


@dataclass(frozen=True)
class RngPolicy:
    """Deterministic stream derivation from one master seed.

    Every stream is keyed by a tuple of non-negative indices (typically
    ``(replicate,)``), so the draws of a replicate never depend on how many
    workers run or in which order replicates are scheduled.
    """

    seed: int

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")

    def generator(self, *key: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(int(k) for k in key))
        return np.random.Generator(np.random.PCG64(ss))


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return RngPolicy(int(seed)).generator()


@dataclass(frozen=True)
class ProductMeasureSpec:
    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(v) for v in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) < 2:
            raise ValueError("need at least two states")
        if any(v < 0 or not math.isfinite(v) for v in probs):
            raise ValueError(f"probabilities must be finite and non-negative: {probs}")
        if abs(math.fsum(probs) - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {math.fsum(probs)!r}, not 1")

    @classmethod
    def bernoulli(cls, p: float) -> "ProductMeasureSpec":
        return cls((1.0 - p, p))

    @property
    def q(self) -> int:
        return len(self.probs)

    @property
    def p(self) -> float:
        """Occupation probability (state 1)."""
        return self.probs[1]


def neighbour_multisets(q: int, d: int) -> list[tuple[int, ...]]:
    """All count vectors (n_0, ..., n_{q-1}) summing to 2d."""
    k = 2 * d
    out = []
    for cut in itertools.combinations(range(k + q - 1), q - 1):
        prev, counts = -1, []
        for c in cut:
            counts.append(c - prev - 1)
            prev = c
        counts.append(k + q - 2 - prev)
        out.append(tuple(counts))
    return sorted(out)


@dataclass(frozen=True, eq=False)
class MarkovConditionalSpec:
    """Conditional law of a site given the multiset of its 2d neighbour states.

    ``rows`` maps each neighbour count vector ``(n_0, ..., n_{q-1})`` to the
    distribution of the site's own state.
    """

    q: int
    d: int
    rows: Mapping[tuple[int, ...], tuple[float, ...]]

    def __post_init__(self):
        expected = neighbour_multisets(self.q, self.d)
        rows = {tuple(k): tuple(float(x) for x in v) for k, v in self.rows.items()}
        missing = [m for m in expected if m not in rows]
        extra = [m for m in rows if m not in set(expected)]
        if missing or extra:
            raise ValueError(f"table rows missing {missing[:3]} / unexpected {extra[:3]}")
        for key, row in rows.items():
            if len(row) != self.q:
                raise ValueError(f"row {key} has {len(row)} entries, expected {self.q}")
            if any(v < 0 or not math.isfinite(v) for v in row):
                raise ValueError(f"row {key} has a negative or non-finite entry")
            if abs(math.fsum(row) - 1.0) > PROB_TOL:
                raise ValueError(f"row {key} sums to {math.fsum(row)!r}, not 1")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def independent(cls, probs: Sequence[float], d: int = 2) -> "MarkovConditionalSpec":
        probs = tuple(probs)
        return cls(len(probs), d, {m: probs for m in neighbour_multisets(len(probs), d)})

    @classmethod
    def ising(cls, beta: float, d: int = 2, field: float = 0.0) -> "MarkovConditionalSpec":
        """State 1 is spin +1, state 0 is spin -1."""
        rows = {}
        for m in neighbour_multisets(2, d):
            h = m[1] - m[0] + field
            up = 1.0 / (1.0 + math.exp(-2.0 * beta * h))
            rows[m] = (1.0 - up, up)
        return cls(2, d, rows)

    @classmethod
    def potts(cls, beta: float, q: int, d: int = 2) -> "MarkovConditionalSpec":
        rows = {}
        for m in neighbour_multisets(q, d):
            w = np.exp(beta * (np.array(m, dtype=float) - max(m)))
            rows[m] = tuple(w / w.sum())
        return cls(q, d, rows)

    def compiled(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(row index per mixed-radix code, cumulative rows, radix powers)."""
        radix = 2 * self.d + 1
        n_codes = radix ** (self.q - 1)
        if n_codes > MAX_TABLE_CODES:
            raise ValueError(f"q={self.q}, d={self.d} table too large to compile")
        powers = np.array([radix**s for s in range(self.q - 1)] + [0], dtype=np.int64)
        keys = sorted(self.rows)
        row_of_code = np.full(n_codes, -1, dtype=np.int64)
        cum = np.empty((len(keys), self.q), dtype=np.float64)
        for i, key in enumerate(keys):
            row_of_code[int(np.dot(key, powers))] = i
            cum[i] = np.cumsum(self.rows[key])
        return row_of_code, cum, powers


class FiniteEnergy(NamedTuple):
    h: float
    finite_energy: bool


def finite_energy_h(spec) -> FiniteEnergy:
    """Smallest conditional probability of any state in any neighbourhood."""
    if isinstance(spec, ProductMeasureSpec):
        h = min(spec.probs)
    else:
        h = min(min(row) for row in spec.rows.values())
    return FiniteEnergy(h, h > 0)


def sample_product(window: Window, spec: ProductMeasureSpec, seed) -> Configuration:
    if spec.q != window.q:
        raise ValueError(f"spec has q={spec.q} but window has q={window.q}")
    rng = _as_generator(seed)
    u = rng.random(window.shape)
    if spec.q == 2:
        states = (u < spec.probs[1]).astype(np.uint8)
    else:
        edges = np.cumsum(spec.probs)[:-1]
        states = np.searchsorted(edges, u, side="right").astype(np.uint8)
    return Configuration(window, states)


@njit(cache=True)
def _heat_bath_sweep(states, shape, strides, row_of_code, cum, powers, u):
    n = states.size
    d = shape.size
    q = cum.shape[1]
    for i in range(n):
        code = 0
        for ax in range(d):
            coord = (i // strides[ax]) % shape[ax]
            if coord > 0:
                code += powers[states[i - strides[ax]]]
            else:
                code += powers[0]
            if coord < shape[ax] - 1:
                code += powers[states[i + strides[ax]]]
            else:
                code += powers[0]
        row = row_of_code[code]
        x = u[i]
        k = 0
        while k < q - 1 and x >= cum[row, k]:
            k += 1
        states[i] = k


def sample_markov(window: Window, spec: MarkovConditionalSpec, seed, sweeps: int,
                  init: Configuration | None = None) -> Configuration:
    """Single-site heat-bath sweeps in raster order.

    Neighbours outside the window are fixed at state 0.  Each sweep consumes
    one block of ``window.size`` uniforms from the stream, in order.
    """
    if sweeps < 0:
        raise ValueError(f"sweeps must be >= 0, got {sweeps}")
    if spec.q != window.q or spec.d != window.d:
        raise ValueError("model (q, d) does not match the window")
    config = init.copy() if init is not None else Configuration(window)
    if config.window != window:
        raise ValueError("init configuration lives on a different window")
    if sweeps == 0:
        return config
    rng = _as_generator(seed)
    row_of_code, cum, powers = spec.compiled()
    flat = config.states.reshape(-1)
    shape = np.array(window.shape, dtype=np.int64)
    strides = np.array([int(np.prod(window.shape[ax + 1:])) for ax in range(window.d)],
                       dtype=np.int64)
    for _ in range(sweeps):
        _heat_bath_sweep(flat, shape, strides, row_of_code, cum, powers, rng.random(flat.size))
    return config


def read_model_spec(path):
    """Parse a flat ``key = value`` model file; ``#`` starts a comment.

    ``model = bernoulli`` needs ``p``; ``model = product`` needs ``probs``;
    ``model = ising`` needs ``beta`` (optional ``d``, ``field``);
    ``model = potts`` needs ``beta`` and ``q``; ``model = markov_table``
    needs ``q``, ``d`` and one ``row n0,n1,... = p0, p1, ...`` line per
    neighbour count vector.
    """
    return parse_model_spec(Path(path).read_text())


def parse_model_spec(text: str):
    values, rows = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key.startswith("row "):
            counts = tuple(int(c) for c in key[4:].replace(" ", "").split(","))
            rows[counts] = tuple(float(v) for v in val.split(","))
        else:
            values[key] = val
    model = values.get("model")
    if model == "bernoulli":
        return ProductMeasureSpec.bernoulli(float(values["p"]))
    if model == "product":
        return ProductMeasureSpec(tuple(float(v) for v in values["probs"].split(",")))
    d = int(values.get("d", 2))
    if model == "ising":
        return MarkovConditionalSpec.ising(float(values["beta"]), d, float(values.get("field", 0.0)))
    if model == "potts":
        return MarkovConditionalSpec.potts(float(values["beta"]), int(values["q"]), d)
    if model == "markov_table":
        return MarkovConditionalSpec(int(values["q"]), d, rows)
    raise ValueError(f"unknown model {model!r}")
