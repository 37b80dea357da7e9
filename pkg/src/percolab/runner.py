"""Execute one experiment and write its artifacts atomically."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import platform
import shutil
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .clusters import extract_clusters, size_census
from .config import ExperimentConfig
from .estimators import (CensusAccumulator, conditional_pattern_stats, geometric_bins,
                         occurrence_density, ratio_limit_report, tail_report)
from .exact import exact_tail, verify_swap_identity
from .gumbel import choose_un, gumbel_compare, simulate_max_clusters
from .harvest import PatternRecords, harvest_patterns
from .lattice import Window, write_snapshot
from .patterns import cluster_contribution, pattern_pair
from .sampler import (MarkovConditionalSpec, ProductMeasureSpec, RngPolicy, sample_markov,
                      sample_product)


class VerificationFailed(RuntimeError):
    """An exact identity exceeded its tolerance."""


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(obj) else float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _fmt(v):
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Artifacts:
    """Files staged in a temporary directory and moved into place on commit."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self._created = not self.out_dir.exists()
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.out_dir))
        self.names: list[str] = []

    def csv(self, name: str, header: Iterable[str], rows: Iterable[Iterable]) -> None:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
        self._write(name, buf.getvalue())

    def json(self, name: str, obj) -> None:
        self._write(name, json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")

    def path(self, name: str) -> Path:
        self.names.append(name)
        return self.stage / name

    def _write(self, name: str, text: str) -> None:
        self.path(name).write_text(text)

    def commit(self) -> list[Path]:
        final = []
        for name in self.names:
            dest = self.out_dir / name
            os.replace(self.stage / name, dest)
            final.append(dest)
        shutil.rmtree(self.stage, ignore_errors=True)
        return final

    def abort(self) -> None:
        shutil.rmtree(self.stage, ignore_errors=True)
        if self._created and not any(self.out_dir.iterdir()):
            self.out_dir.rmdir()


def _tag(value: float) -> str:
    return f"{value:g}"


def _sample(model, window: Window, gen, sweeps: int):
    if isinstance(model, ProductMeasureSpec):
        return sample_product(window, model, gen)
    if isinstance(model, MarkovConditionalSpec):
        return sample_markov(window, model, gen, sweeps)
    raise TypeError(f"unsupported model {type(model).__name__}")


def _parallel_map(fn, items: list, workers: int) -> list:
    """Ordered map; the result order is the input order for any worker count."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


class _CensusJob:
    def __init__(self, cfg: ExperimentConfig):
        self.model, self.window = cfg.model, Window.box(cfg.window, cfg.model.q)
        self.margin, self.seed, self.sweeps = cfg.margin, cfg.seed, cfg.run.get("sweeps", 100)

    def __call__(self, k: int):
        config = _sample(self.model, self.window, RngPolicy(self.seed).generator(k), self.sweeps)
        return size_census(extract_clusters(config), margin=self.margin)


class _PatternJob(_CensusJob):
    def __init__(self, cfg: ExperimentConfig, size_range):
        super().__init__(cfg)
        self.pair, self.size_range = cfg.pair, size_range

    def __call__(self, k: int):
        config = _sample(self.model, self.window, RngPolicy(self.seed).generator(k), self.sweeps)
        return harvest_patterns(config, list(self.pair), self.size_range)


def _census_tail(cfg: ExperimentConfig):
    configs = list(range(cfg.run["configs"]))
    censuses = _parallel_map(_CensusJob(cfg), configs, cfg.workers)
    acc = CensusAccumulator(censuses[0].region_sites)
    total = censuses[0]
    acc.add(censuses[0])
    for c in censuses[1:]:
        acc.add(c)
        total = total.merge(c)
    return total, acc


def run_sample(cfg: ExperimentConfig, art: Artifacts) -> dict:
    window = Window.box(cfg.window, cfg.model.q)
    policy = RngPolicy(cfg.seed)
    rows = []
    for k in range(cfg.run["configs"]):
        config = _sample(cfg.model, window, policy.generator(k), cfg.run["sweeps"])
        counts = np.bincount(config.states.ravel(), minlength=cfg.model.q) / window.size
        rows.append((k, *counts))
        if cfg.run["snapshots"]:
            write_snapshot(config, art.path(f"configuration_{k:04d}.txt"))
    art.csv("state_fractions.csv", ("config", *[f"state_{s}" for s in range(cfg.model.q)]), rows)
    return {"configs": len(rows)}


def run_census(cfg: ExperimentConfig, art: Artifacts) -> dict:
    total, acc = _census_tail(cfg)
    art.csv("census.csv", ("n", "count", "excluded"), total.rows())
    et = acc.estimate()
    art.csv("tail.csv", ("n", "cstar", "cstar_se", "c_n", "c_n_se", "p_n", "p_n_se",
                         "le_tail", "le_tail_se"),
            zip(et.ns, et.cstar, et.cstar_se, et.cn, et.cn_se, et.tail, et.tail_se,
                et.le_tail, et.le_tail_se))
    return {"configs": et.n_configs, "region_sites": et.region_sites,
            "boundary_touching": total.boundary_touching}


def run_patterns(cfg: ExperimentConfig, art: Artifacts) -> dict:
    run = cfg.run
    bins = geometric_bins(run["bins_lo"], run["bins_hi"], run["bins_count"])
    job = _PatternJob(cfg, (bins[0][0], bins[-1][1] - 1))
    records = PatternRecords.concat(_parallel_map(job, list(range(run["configs"])), cfg.workers))
    ctx = pattern_pair(*cfg.pair, cfg.model, run["mu"]) if isinstance(
        cfg.model, ProductMeasureSpec) else None
    report = conditional_pattern_stats(records, bins, (0, 1), ctx.gamma if ctx else None,
                                       run["a_grid"])
    art.csv("concentration.csv", report.header, report.rows())
    art.csv("pattern_theorem.csv", report.theorem.header, report.theorem.rows())
    summary = report.summary()
    summary["occurrence_density_last_bin"] = occurrence_density(records, 0, bins[-1])
    summary["records"] = len(records)
    if ctx is not None:
        summary.update(c_P=ctx.c_P, c_P_prime=ctx.c_P_prime, box_P=ctx.box_P,
                       box_P_prime=ctx.box_P_prime)
    art.json("concentration.json", summary)
    return {"records": len(records), "bins": len(bins)}


def run_exact(cfg: ExperimentConfig, art: Artifacts) -> dict:
    out = {}
    for p in cfg.run["p"]:
        tail = exact_tail(p, cfg.run["n_max"], cfg.run["budget"])
        art.csv(f"exact_tail_p{_tag(p)}.csv", ("n", "c_n", "cstar_n", "p_n"), tail.rows())
        rep = tail_report(tail.ns, tail.cn[1:], pn=tail.tail[1:], source="exact")
        art.json(f"exact_tail_p{_tag(p)}.json", rep.summary())
        out[_tag(p)] = rep.summary()
    return out


def run_verify(cfg: ExperimentConfig, art: Artifacts) -> dict:
    P, Pp = cfg.pair
    # the identity swaps P for P' with c_P' = c_P + 1; orient the pair that way
    flipped = cluster_contribution(Pp) - cluster_contribution(P) == -1
    if flipped:
        P, Pp = Pp, P
    rows, worst = [], 0.0
    for p in cfg.run["p"]:
        for n in cfg.run["n"]:
            err = verify_swap_identity(n, p, P, Pp, cfg.run["budget"])
            worst = max(worst, err)
            rows.append((n, p, err))
    art.csv("swap_identity.csv", ("n", "p", "max_relative_error"), rows)
    ok = worst <= cfg.run["tolerance"]
    art.json("swap_identity.json", {"max_relative_error": worst,
                                    "tolerance": cfg.run["tolerance"], "passed": ok,
                                    "pair_reversed": flipped})
    if not ok:
        raise VerificationFailed(f"swap identity error {worst:.3e} exceeds "
                                 f"{cfg.run['tolerance']:.1e}")
    return {"max_relative_error": worst}


def read_tail_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols: dict[str, list] = {k: [] for k in reader.fieldnames or []}
        for row in reader:
            for k, v in row.items():
                cols[k].append(float(v))
    if "n" not in cols or "c_n" not in cols:
        raise ValueError(f"{path}: tail CSV needs columns 'n' and 'c_n'")
    return {k: np.array(v) for k, v in cols.items()}


def run_estimate(cfg: ExperimentConfig, art: Artifacts) -> dict:
    cols = read_tail_csv(cfg.run["tail"])
    keep = cols["c_n"] > 0
    ns, cn = cols["n"][keep].astype(np.int64), cols["c_n"][keep]
    se = cols.get("c_n_se", cols.get("stderr"))
    se = se[keep] if se is not None else None
    pn = None
    if "p_n" in cols and cfg.run["total"] is None:
        pn = np.append(cols["p_n"][keep], math.nan)
    rep = tail_report(ns, cn, se, pn=pn, total=cfg.run["total"], source="input",
                      stretched=cfg.run["stretched"])
    art.csv("tail_report.csv", rep.header, rep.rows())
    ratio = ratio_limit_report(ns, cn, pn=pn, total=cfg.run["total"], beta=cfg.run["beta"])
    art.csv("ratio_limit.csv", ratio.header, ratio.rows())
    summary = rep.summary()
    summary["mu_ref"] = ratio.mu_ref
    art.json("tail_report.json", summary)
    return summary


def run_gumbel(cfg: ExperimentConfig, art: Artifacts) -> dict:
    run = cfg.run
    p = run["p"]
    census_cfg = ExperimentConfig(cfg.path, "census", cfg.seed, cfg.output, cfg.workers,
                                  window=(run["census_window"],) * cfg.d,
                                  margin=run["census_margin"],
                                  model=ProductMeasureSpec.bernoulli(p),
                                  run={"configs": run["census_configs"]})
    _, acc = _census_tail(census_cfg)
    et = acc.estimate()
    mu, mu_se, n_ref = et.ratio_mu(run["min_clusters"])
    reports = []
    for n in run["n"]:
        centering = choose_un(et.ns, et.le_tail, n, cfg.d)
        sample = simulate_max_clusters(p, n, run["replicates"], cfg.seed + 1 + n, run["mode"],
                                       cfg.d, run["margin"], cfg.workers)
        art.csv(f"max_clusters_n{n}.csv", sample.header, sample.rows())
        rep = gumbel_compare(sample, centering.u, mu)
        art.csv(f"gumbel_cdf_n{n}.csv", rep.header, rep.rows())
        summary = rep.summary()
        summary.update(mu_se=mu_se, mu_reference_n=n_ref, u_n_saturated=centering.saturated)
        art.json(f"gumbel_n{n}.json", summary)
        reports.append(summary)
    return {"mu": mu, "mu_se": mu_se, "reports": reports}


RUNNERS = {"sample": run_sample, "census": run_census, "patterns": run_patterns,
           "exact": run_exact, "verify": run_verify, "estimate": run_estimate,
           "gumbel": run_gumbel}


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _versions() -> dict:
    import numba
    import scipy
    return {"percolab": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def execute(cfg: ExperimentConfig) -> dict:
    """Run ``cfg``; on any error the staged outputs are discarded."""
    art = Artifacts(cfg.output)
    start = time.perf_counter()
    try:
        result = RUNNERS[cfg.kind](cfg, art)
        manifest = {
            "kind": cfg.kind,
            "seed": cfg.seed,
            "workers": cfg.workers,
            "inputs": {str(p): _sha256(p) for p in cfg.inputs},
            "outputs": sorted(art.names),
            "versions": _versions(),
            "wall_time_s": time.perf_counter() - start,
            "result": result,
        }
        art.json("manifest.json", manifest)
        art.commit()
    except BaseException:
        art.abort()
        raise
    return manifest
