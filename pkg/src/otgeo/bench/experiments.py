"""Experiment pipelines driven by :class:`ExperimentConfig`.

Each repeat owns seeds derived from ``(config seed, repeat, slot)`` and every
CSV row records them, so a single row can be reproduced in isolation.
Repeats may run on several threads; rows are always emitted in repeat order.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .._parallel import ordered_map
from ..debias import (combine, divergence_terms, estimate_w2, make_schedule, richardson_weights,
                      diagonal_richardson)
from ..dimension import DegenerateRatio, discrete_w1_dimension_baseline, estimate_dimension
from ..discretization import nested_discretization_errors
from ..measure import CostSpec, SeedSpec
from ..nearest import build_index
from ..synth import named_manifold, named_pair, sample_brenier_pair
from .config import ExperimentConfig, load_config
from .stats import fit_decay_slope, median_iqr, variance_overhead
from .svg import line_plot

_SLOT = 1 << 16


def stream_id(*parts: int) -> int:
    """Pack small non-negative labels into one stream id."""
    sid = 0
    for p in parts:
        if not 0 <= p < _SLOT:
            raise ValueError(f"stream label {p} out of range")
        sid = sid * _SLOT + p
    return sid


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


@dataclass
class RunRecord:
    kind: str
    config_hash: str
    header: list[str]
    rows: list[list]
    summary: dict = field(default_factory=dict)
    wall_time_s: float = 0.0
    plot: dict = field(default_factory=dict, repr=False)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([fmt(v) for v in row])
        return buf.getvalue()

    def summary_text(self) -> str:
        lines = [f"kind: {self.kind}", f"config_hash: {self.config_hash}"]
        for key, value in self.summary.items():
            lines.append(f"{key}: {fmt(value) if isinstance(value, float) else value}")
        return "\n".join(lines) + "\n"

    def write(self, output: Path, svg: bool = False) -> list[Path]:
        output.parent.mkdir(parents=True, exist_ok=True)
        output.write_text(self.csv_text())
        summary = output.with_suffix(".summary.txt")
        summary.write_text(self.summary_text())
        written = [output, summary]
        if svg and self.plot:
            path = output.with_suffix(".svg")
            path.write_text(line_plot(**self.plot))
            written.append(path)
        return written


class _Clock:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.t0 = time.perf_counter()

    def ms(self):
        return round(1000.0 * (time.perf_counter() - self.t0), 3) if self.enabled else None


def _fig1(cfg: ExperimentConfig, threads) -> RunRecord:
    p = cfg.params
    header = ["manifold", "repeat", "n", "eta", "N", "ot_n", "ot_eta_n", "d_hat", "band_lo", "band_hi",
              "low_dim_flag", "baseline_d_hat", "wall_time_ms", "seed", "stream"]

    def job(task):
        c, name, r = task
        sampler = named_manifold(name)
        sup = SeedSpec(cfg.seed, stream_id(c, r, 0))
        mc = SeedSpec(cfg.seed, stream_id(c, r, 1))
        clock = _Clock(cfg.timing)
        try:
            e = estimate_dimension(sampler, p["n"], p["eta"], p["mc_n"], p["delta"], (sup, mc))
            vals = [e.ot_n.value, e.ot_eta_n.value, e.d_hat, *e.propagated_band, e.low_dimension]
        except DegenerateRatio:
            vals = [None] * 6
        ms = clock.ms()
        base = None
        if p["baseline"]:
            try:
                base = discrete_w1_dimension_baseline(sampler, p["baseline_n"], p["eta"],
                                                      SeedSpec(cfg.seed, stream_id(c, r, 2)))
            except DegenerateRatio:
                base = None
        return [name, r, p["n"], p["eta"], p["mc_n"], *vals, base, ms, cfg.seed, sup.stream_id]

    tasks = [(c, name, r) for c, name in enumerate(p["manifolds"]) for r in range(cfg.repeats)]
    rows = ordered_map(job, tasks, threads)
    summary, series = {}, {}
    for name in p["manifolds"]:
        d = [row[7] if row[7] is not None else math.nan for row in rows if row[0] == name]
        med, q1, q3 = median_iqr(d)
        summary[f"{name}.median_d_hat"] = med
        summary[f"{name}.iqr"] = q3 - q1
        summary[f"{name}.missing"] = int(np.isnan(d).sum())
        if p["baseline"]:
            b = [row[11] if row[11] is not None else math.nan for row in rows if row[0] == name]
            summary[f"{name}.median_baseline"] = median_iqr(b)[0]
        series[name] = (list(range(len(d))), d)
    plot = {"series": series, "title": "dimension estimates per repeat", "xlabel": "repeat",
            "ylabel": "d_hat"}
    return RunRecord(cfg.kind, cfg.config_hash, header, rows, summary, plot=plot)


def _fig2(cfg: ExperimentConfig, threads) -> RunRecord:
    p = cfg.params
    pair = named_pair(p["pair"])
    header = ["repeat", "d", "eps_hi", "eps_lo", "s_hi", "estimate", "truth", "abs_error", "converged",
              "seed", "stream"]

    def job(r):
        data = SeedSpec(cfg.seed, stream_id(r, 0))
        bags = SeedSpec(cfg.seed, stream_id(r, 1))
        X, Y, truth = sample_brenier_pair(pair, p["n"], data)
        out = []
        for d in p["d_grid"]:
            sched = make_schedule(d, p["eps0"], X, Y)
            rep = diagonal_richardson(X, Y, sched, seed=bags, tol=p["tol"], max_iter=p["max_iter"])
            m = rep.meta
            out.append([r, d, m["eps_hi"], m["eps_lo"], m["s_hi"], rep.value, truth,
                        abs(rep.value - truth), m["converged"], cfg.seed, data.stream_id])
        return out

    rows = [row for part in ordered_map(job, range(cfg.repeats), threads) for row in part]
    grid = list(p["d_grid"])
    mae = [float(np.mean([row[7] for row in rows if row[1] == d])) for d in grid]
    summary = {f"d={d}.mean_abs_error": e for d, e in zip(grid, mae)}
    summary["argmin_d"] = grid[int(np.argmin(mae))]
    plot = {"series": {"diagonal Richardson": (grid, mae)}, "title": "error vs schedule dimension",
            "xlabel": "d", "ylabel": "mean |error|"}
    return RunRecord(cfg.kind, cfg.config_hash, header, rows, summary, plot=plot)


def _fig3(cfg: ExperimentConfig, threads) -> RunRecord:
    p = cfg.params
    pair = named_pair(p["pair"])
    bags = list(p["bags"])
    header = ["repetition", "run", "K", "s_hi", "estimate", "converged", "seed", "stream"]

    def job(task):
        r, j = task
        data = SeedSpec(cfg.seed, stream_id(r, j, 0))
        bag = SeedSpec(cfg.seed, stream_id(r, j, 1))
        X, Y, _ = sample_brenier_pair(pair, p["n"], data)
        sched = make_schedule(p["d_int"], p["eps0"], X, Y)
        w = richardson_weights(sched.gamma)
        hi, lo = divergence_terms(X, Y, sched, bags[-1], seed=bag, tol=p["tol"], max_iter=p["max_iter"])
        out = []
        for K in bags:
            conv = hi.converged and all(x.converged for x in lo[:K])
            out.append([r, j, K, hi.value, combine(w, hi.value, [x.value for x in lo[:K]]), conv,
                        cfg.seed, data.stream_id])
        return out

    tasks = [(r, j) for r in range(cfg.repeats) for j in range(p["runs"])]
    rows = [row for part in ordered_map(job, tasks, threads) for row in part]
    ratios = {K: [] for K in bags}
    for r in range(cfg.repeats):
        ref = [row[3] for row in rows if row[0] == r and row[2] == bags[0]]
        for K in bags:
            est = [row[4] for row in rows if row[0] == r and row[2] == K]
            ratios[K].append(variance_overhead(est, ref))
    med = [median_iqr(ratios[K])[0] for K in bags]
    summary = {f"K={K}.median_overhead": m for K, m in zip(bags, med)}
    summary["strictly_decreasing"] = all(b < a for a, b in zip(med, med[1:]))
    try:
        summary["slope"] = fit_decay_slope(bags, med)
    except ValueError:
        summary["slope"] = math.nan
    plot = {"series": {"median overhead": (bags, med)}, "title": "variance overhead vs bags",
            "xlabel": "K", "ylabel": "Var ratio - 1", "logx": True, "logy": True}
    return RunRecord(cfg.kind, cfg.config_hash, header, rows, summary, plot=plot)


def _table1(cfg: ExperimentConfig, threads) -> RunRecord:
    p = cfg.params
    pair = named_pair(p["pair"])
    header = ["method", "repeat", "n", "d_int_used", "eps_hi", "eps_lo", "estimate", "truth", "abs_error",
              "converged", "wall_time_ms", "seed", "stream"]

    def job(r):
        data = SeedSpec(cfg.seed, stream_id(r, 0))
        est_seed = SeedSpec(cfg.seed, stream_id(r, 1))
        X, Y, truth = sample_brenier_pair(pair, p["n"], data)
        out = []
        for method in p["methods"]:
            clock = _Clock(cfg.timing)
            rep = estimate_w2(method, X, Y, p["d_int"], p["eps0"], p["bags"], seed=est_seed,
                              tol=p["tol"], max_iter=p["max_iter"])
            m = rep.meta
            out.append([method, r, p["n"], m["d_int_used"], m["eps_hi"], m["eps_lo"], rep.value, truth,
                        abs(rep.value - truth), m["converged"], clock.ms(), cfg.seed, data.stream_id])
        return out

    rows = [row for part in ordered_map(job, range(cfg.repeats), threads) for row in part]
    summary = {}
    for method in p["methods"]:
        summary[f"{method}.mean_abs_error"] = float(np.mean([row[8] for row in rows if row[0] == method]))
    return RunRecord(cfg.kind, cfg.config_hash, header, rows, summary)


def _curve(cfg: ExperimentConfig, threads) -> RunRecord:
    p = cfg.params
    sampler = named_manifold(p["manifold"], p["ambient_d"])
    grid = list(p["grid"])
    header = ["repeat", "n", "N", "value", "half_width", "sigma2", "C_rho", "seed", "stream"]

    def job(r):
        sup = SeedSpec(cfg.seed, stream_id(r, 0))
        mc = SeedSpec(cfg.seed, stream_id(r, 1))
        support = sampler(grid[-1], sup.rng())
        index = build_index(support, CostSpec.P1, seed=sup)
        ests = nested_discretization_errors(index, sampler, grid, p["mc_n"], p["delta"], seed=mc)
        return [[r, e.n, e.N, e.value, e.half_width, e.sample_variance, e.band.meta["C_rho"],
                 cfg.seed, sup.stream_id] for e in ests]

    rows = [row for part in ordered_map(job, range(cfg.repeats), threads) for row in part]
    means = [float(np.mean([row[3] for row in rows if row[1] == m])) for m in grid]
    summary = {f"n={m}.mean_value": v for m, v in zip(grid, means)}
    summary["slope"] = fit_decay_slope(grid, means) if len(grid) >= 3 else math.nan
    plot = {"series": {"mean error": (grid, means)}, "title": "discretization error vs support size",
            "xlabel": "n", "ylabel": "error", "logx": True, "logy": True}
    return RunRecord(cfg.kind, cfg.config_hash, header, rows, summary, plot=plot)


_PIPELINES = {
    "fig1_dim_benchmark": _fig1,
    "fig2_d_sensitivity": _fig2,
    "fig3_bagging_variance": _fig3,
    "table1_w2_benchmark": _table1,
    "discr_error_curve": _curve,
}


def run_experiment(cfg: ExperimentConfig | str | Path, threads: int | None = None,
                   write: bool = True) -> RunRecord:
    """Execute one configured experiment, writing CSV, summary and optional SVG."""
    if not isinstance(cfg, ExperimentConfig):
        cfg = load_config(cfg)
    t0 = time.perf_counter()
    record = _PIPELINES[cfg.kind](cfg, threads)
    record.wall_time_s = time.perf_counter() - t0
    if write:
        record.write(cfg.output, cfg.svg)
    return record
