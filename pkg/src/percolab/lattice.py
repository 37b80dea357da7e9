"""Rectangular windows of Z^d, q-state configurations and cube geometry.

Sites are integer tuples in absolute lattice coordinates.  A window covers
``lo[i] <= x[i] < hi[i]`` on every axis; everything outside it is vacant.
Arrays are stored row-major, so lexicographic order on sites coincides with
flat-index order.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

Site = tuple[int, ...]

MAX_SITES = 2**40
SNAPSHOT_MAGIC = "percolab-configuration 1"


@dataclass(frozen=True)
class Window:
    lo: tuple[int, ...]
    hi: tuple[int, ...]
    q: int = 2

    def __post_init__(self):
        lo = tuple(int(v) for v in self.lo)
        hi = tuple(int(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi):
            raise ValueError("lo and hi must have the same length")
        if len(lo) < 2:
            raise ValueError(f"dimension must be at least 2, got {len(lo)}")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError(f"empty window: lo={lo}, hi={hi}")
        if not 2 <= self.q <= 256:
            raise ValueError(f"q must lie in [2, 256], got {self.q}")
        if self.size > MAX_SITES:
            raise ValueError(f"window has {self.size} sites, limit is {MAX_SITES}")

    @classmethod
    def box(cls, shape: Sequence[int], q: int = 2) -> "Window":
        """Window ``[0, shape[0]) x ... x [0, shape[d-1])``."""
        return cls(tuple(0 for _ in shape), tuple(shape), q)

    @classmethod
    def centered(cls, half_width: int, d: int = 2, q: int = 2) -> "Window":
        """Window ``[-half_width, half_width]^d``."""
        return cls((-half_width,) * d, (half_width + 1,) * d, q)

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=object))

    def contains(self, x: Sequence[int]) -> bool:
        return len(x) == self.d and all(l <= v < h for v, l, h in zip(x, self.lo, self.hi))

    def contains_box(self, lo: Sequence[int], hi: Sequence[int]) -> bool:
        return all(l0 <= l and h <= h0 for l, h, l0, h0 in zip(lo, hi, self.lo, self.hi))

    def index(self, x: Sequence[int]) -> tuple[int, ...]:
        """Array index of the absolute site ``x``."""
        if not self.contains(x):
            raise IndexError(f"site {tuple(x)} outside window {self.lo}..{self.hi}")
        return tuple(v - l for v, l in zip(x, self.lo))

    def shrink(self, margin: int) -> "Window":
        lo = tuple(l + margin for l in self.lo)
        hi = tuple(h - margin for h in self.hi)
        return Window(lo, hi, self.q)

    def sites(self) -> Iterator[Site]:
        return itertools.product(*(range(l, h) for l, h in zip(self.lo, self.hi)))


@dataclass(eq=False)
class Configuration:
    """A q-state field on a window; sites outside the window are state 0."""

    window: Window
    states: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.states is None:
            self.states = np.zeros(self.window.shape, dtype=np.uint8)
        else:
            states = np.asarray(self.states)
            if states.shape != self.window.shape:
                raise ValueError(f"states shape {states.shape} != window shape {self.window.shape}")
            if states.size and (states.min() < 0 or states.max() >= self.window.q):
                raise ValueError(f"states must lie in [0, {self.window.q})")
            self.states = states.astype(np.uint8, copy=False)

    @classmethod
    def from_sites(cls, window: Window, occupied: Sequence[Site], state: int = 1) -> "Configuration":
        config = cls(window)
        for x in occupied:
            config[x] = state
        return config

    def __getitem__(self, x: Sequence[int]) -> int:
        return int(self.states[self.window.index(x)])

    def __setitem__(self, x: Sequence[int], value: int) -> None:
        if not 0 <= value < self.window.q:
            raise ValueError(f"state {value} outside [0, {self.window.q})")
        self.states[self.window.index(x)] = value

    def get(self, x: Sequence[int]) -> int:
        """State at ``x``, with the vacant-exterior convention."""
        return self[x] if self.window.contains(x) else 0

    def items(self) -> Iterator[tuple[Site, int]]:
        for x, s in zip(self.window.sites(), self.states.ravel()):
            yield x, int(s)

    @property
    def occupied(self) -> np.ndarray:
        return self.states == 1

    def copy(self) -> "Configuration":
        return Configuration(self.window, self.states.copy())

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.window == other.window and np.array_equal(self.states, other.states)


@dataclass(frozen=True)
class CubeGeometry:
    """Offsets of Q, the extended cube, and both boundaries, relative to x."""

    r: int
    d: int
    cube: tuple[Site, ...]
    extended: tuple[Site, ...]
    boundary: tuple[Site, ...]
    outer_boundary: tuple[Site, ...]

    def array(self, name: str) -> np.ndarray:
        return np.array(getattr(self, name), dtype=np.int64).reshape(-1, self.d)


def _block(lo: int, hi: int, d: int) -> list[Site]:
    return list(itertools.product(range(lo, hi), repeat=d))


def cube_geometry(r: int, d: int) -> CubeGeometry:
    if r < 1:
        raise ValueError(f"cube diameter must be >= 1, got {r}")
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    cube = _block(0, r, d)
    extended = _block(-1, r + 1, d)
    twice = _block(-2, r + 2, d)
    inner = set(cube)
    ext = set(extended)
    return CubeGeometry(
        r=r,
        d=d,
        cube=tuple(cube),
        extended=tuple(extended),
        boundary=tuple(y for y in extended if y not in inner),
        outer_boundary=tuple(y for y in twice if y not in ext),
    )


def grid_v_sites(window: Window, r: int, fit: str = "cube") -> list[Site]:
    """Sites of (r+2)Z^d + (1,...,1) whose cube lies in the window.

    ``fit="extended"`` requires the whole extended cube to fit instead, which
    is what occurrence counting needs.
    """
    if fit not in ("cube", "extended"):
        raise ValueError(f"fit must be 'cube' or 'extended', got {fit!r}")
    step = r + 2
    pad = 1 if fit == "extended" else 0
    axes = []
    for l, h in zip(window.lo, window.hi):
        first = l + pad
        start = first + ((1 - first) % step)
        axes.append(range(start, h - pad - r + 1, step))
    return list(itertools.product(*axes))


def write_snapshot(config: Configuration, path) -> None:
    """Header lines followed by one run-length-encoded line per array row.

    A row is the run along the last axis; tokens are ``state*count``.
    """
    w = config.window
    lines = [
        SNAPSHOT_MAGIC,
        f"d {w.d}",
        f"q {w.q}",
        "lo " + " ".join(map(str, w.lo)),
        "hi " + " ".join(map(str, w.hi)),
    ]
    rows = config.states.reshape(-1, w.shape[-1])
    for row in rows:
        change = np.flatnonzero(np.diff(row)) + 1
        starts = np.concatenate(([0], change))
        ends = np.concatenate((change, [row.size]))
        lines.append(" ".join(f"{row[s]}*{e - s}" for s, e in zip(starts, ends)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path) -> Configuration:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a configuration snapshot")
    header = {}
    for ln in lines[1:5]:
        key, *vals = ln.split()
        header[key] = [int(v) for v in vals]
    window = Window(tuple(header["lo"]), tuple(header["hi"]), header["q"][0])
    if window.d != header["d"][0]:
        raise ValueError(f"{path}: d does not match lo/hi")
    body = lines[5:]
    n_rows = window.size // window.shape[-1]
    if len(body) != n_rows:
        raise ValueError(f"{path}: expected {n_rows} data rows, found {len(body)}")
    states = np.empty((n_rows, window.shape[-1]), dtype=np.uint8)
    for i, ln in enumerate(body):
        row = []
        for tok in ln.split():
            s, k = tok.split("*")
            row.extend([int(s)] * int(k))
        if len(row) != window.shape[-1]:
            raise ValueError(f"{path}: row {i} decodes to {len(row)} sites")
        states[i] = row
    return Configuration(window, states.reshape(window.shape))


def export_csv(config: Configuration, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(config.window.d)] + ["state"])
        for x, s in config.items():
            writer.writerow([*x, s])
