"""Experiment configuration files and their validation.

A configuration is an INI file with an ``[experiment]`` section naming the
kind, plus ``[model]``, ``[geometry]``, ``[patterns]`` and ``[run]``
sections as the kind requires.  Validation collects every problem it finds
and reports each with its line number.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .patterns import Pattern, corner_center_pair, read_pattern, single_site_pair
from .sampler import parse_model_spec

KINDS = ("sample", "census", "patterns", "exact", "verify", "estimate", "gumbel")
BUILTIN_PAIRS = {"single_site": single_site_pair, "corner_center": corner_center_pair}

# per kind: section -> {key: (parser, required, default)}
_int = int
_float = float


def _ints(text: str) -> list[int]:
    return [int(v) for v in _split(text)]


def _floats(text: str) -> list[float]:
    return [float(v) for v in _split(text)]


def _split(text: str) -> list[str]:
    items = [v.strip() for v in re.split(r"[,\s]+", text.strip()) if v.strip()]
    if not items:
        raise ValueError("empty list")
    return items


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _mode(text: str) -> str:
    if text not in ("all", "finite_only"):
        raise ValueError("must be 'all' or 'finite_only'")
    return text


_COMMON = {
    "experiment": {"kind": (str, True, None), "seed": (_int, False, 0),
                   "output": (str, False, "out"), "workers": (_int, False, 1)},
}

_RUN_KEYS: dict[str, dict[str, tuple[Callable[[str], Any], bool, Any]]] = {
    "sample": {"configs": (_int, False, 1), "sweeps": (_int, False, 100),
               "snapshots": (_bool, False, True)},
    "census": {"configs": (_int, True, None), "sweeps": (_int, False, 100)},
    "patterns": {"configs": (_int, True, None), "sweeps": (_int, False, 100),
                 "bins_lo": (_int, True, None), "bins_hi": (_int, True, None),
                 "bins_count": (_int, False, 6), "mu": (_float, False, 1.0),
                 "a_grid": (_floats, False, [0.0, 0.05, 0.1, 0.2, 0.5, 1.0])},
    "exact": {"p": (_floats, True, None), "n_max": (_int, False, 12),
              "budget": (_int, False, 12)},
    "verify": {"p": (_floats, True, None), "n": (_ints, True, None),
               "tolerance": (_float, False, 1e-10), "budget": (_int, False, 11)},
    "estimate": {"tail": (str, True, None), "total": (_float, False, None),
                 "stretched": (_bool, False, False), "beta": (_float, False, None)},
    "gumbel": {"p": (_float, True, None), "n": (_ints, True, None),
               "replicates": (_int, True, None), "mode": (_mode, False, "all"),
               "margin": (_int, False, 32), "census_window": (_int, False, 512),
               "census_configs": (_int, False, 500), "census_margin": (_int, False, 16),
               "min_clusters": (_int, False, 1000)},
}

_NEEDS_MODEL = {"sample", "census", "patterns"}
_NEEDS_WINDOW = {"sample", "census", "patterns"}
_NEEDS_PAIR = {"patterns", "verify"}
_GEOMETRY = {"d": (_int, False, 2), "window": (_ints, False, None), "margin": (_int, False, 16)}


@dataclass
class Diagnostic:
    line: int | None
    section: str
    key: str | None
    message: str

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line else ""
        field_name = f"[{self.section}] {self.key}" if self.key else f"[{self.section}]"
        return f"{where}{field_name}: {self.message}"


class ConfigError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("\n".join(map(str, diagnostics)))
        self.diagnostics = diagnostics


@dataclass
class ExperimentConfig:
    path: Path
    kind: str
    seed: int
    output: Path
    workers: int
    d: int = 2
    window: tuple[int, ...] | None = None
    margin: int = 16
    model: Any = None
    model_source: str | None = None
    pair: tuple[Pattern, Pattern] | None = None
    pattern_sources: list[str] = field(default_factory=list)
    run: dict[str, Any] = field(default_factory=dict)

    @property
    def inputs(self) -> list[Path]:
        out = [self.path]
        if self.model_source and self.model_source != "inline":
            out.append(Path(self.model_source))
        out += [Path(p) for p in self.pattern_sources if not p.startswith("builtin:")]
        if self.kind == "estimate":
            out.append(Path(self.run["tail"]))
        return out


def _line_index(text: str) -> dict[tuple[str, str | None], int]:
    """Line numbers of section headers and keys."""
    index: dict[tuple[str, str | None], int] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            index.setdefault((section, None), lineno)
        elif section and re.match(r"[^#;=:]+[=:]", line):
            key = re.split(r"[=:]", line, 1)[0].strip().lower()
            index.setdefault((section, key), lineno)
    return index


class _Collector:
    def __init__(self, text: str):
        self.lines = _line_index(text)
        self.items: list[Diagnostic] = []

    def add(self, section: str, key: str | None, message: str) -> None:
        line = self.lines.get((section, key and key.lower())) or self.lines.get((section, None))
        self.items.append(Diagnostic(line, section, key, message))


def _read_section(parser, diag, section, spec) -> dict[str, Any]:
    values = {}
    present = dict(parser.items(section)) if parser.has_section(section) else {}
    for key in present:
        if key not in spec:
            diag.add(section, key, "unknown key")
    for key, (conv, required, default) in spec.items():
        if key not in present:
            if required:
                diag.add(section, key, "required field missing")
            values[key] = default
            continue
        try:
            values[key] = conv(present[key])
        except (ValueError, TypeError) as exc:
            diag.add(section, key, f"invalid value {present[key]!r}: {exc}")
            values[key] = default
    return values


def _resolve(base: Path, name: str) -> Path:
    path = Path(name)
    return path if path.is_absolute() else base / path


def _check_ranges(kind, run, diag) -> None:
    positive = ("configs", "replicates", "n_max", "census_window", "census_configs",
                "bins_count", "min_clusters", "budget")
    for key in positive:
        if run.get(key) is not None and run[key] < 1:
            diag.add("run", key, "must be at least 1")
    for key in ("sweeps", "margin", "census_margin"):
        if run.get(key) is not None and run[key] < 0:
            diag.add("run", key, "must be non-negative")
    ps = run.get("p")
    if ps is not None:
        for p in ps if isinstance(ps, list) else [ps]:
            if not 0 <= p <= 1:
                diag.add("run", "p", f"probability {p} outside [0, 1]")
    if kind == "verify" and run.get("n"):
        if any(n < 1 for n in run["n"]):
            diag.add("run", "n", "sizes must be positive")
    if kind == "gumbel" and run.get("n"):
        if any(n < 1 for n in run["n"]):
            diag.add("run", "n", "box half-widths must be positive")
    if kind == "patterns" and run.get("bins_lo") is not None and run.get("bins_hi") is not None:
        if not 1 <= run["bins_lo"] < run["bins_hi"]:
            diag.add("run", "bins_hi", "need 1 <= bins_lo < bins_hi")
    if kind == "patterns" and run.get("mu") is not None and not 0 < run["mu"] <= 1:
        diag.add("run", "mu", "mu must lie in (0, 1]")


def load_config(path, seed: int | None = None, output=None, workers: int | None = None
                ) -> tuple[ExperimentConfig | None, list[Diagnostic]]:
    """Parse and validate; returns (config or None, diagnostics)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        return None, [Diagnostic(None, "file", None, f"cannot read {path}: {exc}")]
    diag = _Collector(text)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        return None, [Diagnostic(getattr(exc, "lineno", None), "file", None, str(exc).splitlines()[0])]
    base = path.parent
    known = {"experiment", "model", "geometry", "patterns", "run"}
    for section in parser.sections():
        if section not in known:
            diag.add(section, None, "unknown section")
    if not parser.has_section("experiment"):
        diag.add("experiment", None, "section missing")
        return None, diag.items
    exp = _read_section(parser, diag, "experiment", _COMMON["experiment"])
    kind = exp["kind"]
    if kind is not None and kind not in KINDS:
        diag.add("experiment", "kind", f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
        return None, diag.items
    if kind is None:
        return None, diag.items
    if seed is not None:
        exp["seed"] = seed
    if exp["seed"] is not None and exp["seed"] < 0:
        diag.add("experiment", "seed", f"seed must be non-negative, got {exp['seed']}")
    if workers is not None:
        exp["workers"] = workers
    if exp["workers"] is not None and exp["workers"] < 1:
        diag.add("experiment", "workers", "must be at least 1")
    out_dir = Path(output) if output is not None else _resolve(base, exp["output"])

    geo = _read_section(parser, diag, "geometry", _GEOMETRY)
    if geo["d"] is not None and geo["d"] < 2:
        diag.add("geometry", "d", "dimension must be at least 2")
    window = None
    if geo["window"] is not None:
        sides = geo["window"]
        d = geo["d"] or 2
        if len(sides) == 1:
            sides = sides * d
        if len(sides) != d:
            diag.add("geometry", "window", f"expected 1 or {d} sides, got {len(sides)}")
        elif any(s < 1 for s in sides):
            diag.add("geometry", "window", "sides must be positive")
        else:
            window = tuple(sides)
    elif kind in _NEEDS_WINDOW:
        diag.add("geometry", "window", "required field missing")
    if window is not None and geo["margin"] is not None:
        if kind in ("census", "patterns") and any(2 * geo["margin"] >= s for s in window):
            diag.add("geometry", "margin", "margin leaves an empty census region")

    run = _read_section(parser, diag, "run", _RUN_KEYS[kind])
    _check_ranges(kind, run, diag)
    if kind == "estimate" and run.get("tail"):
        tail_path = _resolve(base, run["tail"])
        if not tail_path.is_file():
            diag.add("run", "tail", f"file not found: {tail_path}")
        run["tail"] = str(tail_path)

    model, model_source = None, None
    if kind in _NEEDS_MODEL:
        model, model_source = _load_model(parser, diag, base, geo["d"] or 2)
    elif parser.has_section("model"):
        diag.add("model", None, f"not used by kind {kind!r}")

    pair, sources = None, []
    if kind in _NEEDS_PAIR:
        pair, sources = _load_pair(parser, diag, base, geo["d"] or 2)
        if pair is not None and model is not None and pair[0].q != model.q:
            diag.add("patterns", "P", f"pattern has q={pair[0].q} but the model has q={model.q}")
        if pair is not None and kind == "verify" and geo["d"] != 2:
            diag.add("geometry", "d", "exact verification is implemented for d = 2")

    if diag.items:
        return None, diag.items
    cfg = ExperimentConfig(path=path, kind=kind, seed=exp["seed"], output=out_dir,
                           workers=exp["workers"], d=geo["d"], window=window,
                           margin=geo["margin"], model=model, model_source=model_source,
                           pair=pair, pattern_sources=sources, run=run)
    return cfg, []


def _load_model(parser, diag, base, d):
    if not parser.has_section("model"):
        diag.add("model", None, "section missing")
        return None, None
    items = dict(parser.items("model"))
    if "file" in items:
        source = _resolve(base, items.pop("file"))
        if items:
            diag.add("model", next(iter(items)), "inline keys cannot be combined with 'file'")
        if not source.is_file():
            diag.add("model", "file", f"file not found: {source}")
            return None, None
        text, label = source.read_text(), str(source)
    else:
        text = "\n".join(f"{k} = {v}" for k, v in items.items())
        label = "inline"
    try:
        model = parse_model_spec(text)
    except KeyError as exc:
        diag.add("model", "file" if label != "inline" else "model", f"missing model field {exc}")
        return None, None
    except (ValueError, TypeError) as exc:
        diag.add("model", "file" if label != "inline" else "model", str(exc))
        return None, None
    model_d = getattr(model, "d", None)
    if model_d is not None and model_d != d:
        diag.add("model", "d", f"model dimension {model_d} differs from geometry d={d}")
    return model, label


def _load_pair(parser, diag, base, d):
    if not parser.has_section("patterns"):
        diag.add("patterns", None, "section missing")
        return None, []
    items = dict(parser.items("patterns"))
    if "pair" in items:
        name = items.pop("pair")
        for extra in items:
            diag.add("patterns", extra, "cannot be combined with 'pair'")
        if name not in BUILTIN_PAIRS:
            diag.add("patterns", "pair", f"unknown pair {name!r}; expected one of "
                                         f"{', '.join(BUILTIN_PAIRS)}")
            return None, []
        return BUILTIN_PAIRS[name](d), [f"builtin:{name}"]
    pats, sources = [], []
    for key in ("p", "p_prime"):
        label = "P" if key == "p" else "P_prime"
        if key not in items:
            diag.add("patterns", label, "required field missing")
            continue
        path = _resolve(base, items[key])
        if not path.is_file():
            diag.add("patterns", label, f"file not found: {path}")
            continue
        try:
            pats.append(read_pattern(path))
            sources.append(str(path))
        except ValueError as exc:
            diag.add("patterns", label, str(exc))
    for extra in set(items) - {"p", "p_prime"}:
        diag.add("patterns", extra, "unknown key")
    if len(pats) != 2:
        return None, sources
    P, Pp = pats
    if (P.r, P.d, P.q) != (Pp.r, Pp.d, Pp.q):
        diag.add("patterns", "P_prime", "P and P_prime must share r, d and q")
        return None, sources
    if P.d != d:
        diag.add("patterns", "P", f"pattern dimension {P.d} differs from geometry d={d}")
    return (P, Pp), sources
