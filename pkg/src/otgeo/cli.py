"""Command-line interface: ``otgeo <subcommand>``.

Every subcommand writes CSV to ``--output`` (default stdout).  Wall-clock
columns are left empty unless ``--timing`` is given, which keeps reruns with
the same arguments byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
import warnings
from pathlib import Path

from . import __version__
from .bench.config import ConfigError
from .bench.experiments import fmt, run_experiment, stream_id
from .debias import AUTO, AUTO_MIN, METHODS, estimate_w2
from .dimension import (DEFAULT_ETA, DegenerateRatio, dimension_profile, estimate_dimension,
                        estimate_dimension_from_cloud)
from .discretization import estimate_discretization_error
from .entropic import DEFAULT_MAX_ITER, DEFAULT_TOL, sinkhorn, sinkhorn_divergence
from .io import read_points
from .measure import CostSpec, SeedSpec
from .nearest import Acceleration, build_index
from .synth import MANIFOLDS, PAIRS, named_manifold, named_pair, sample_brenier_pair


def _dint(text: str):
    return AUTO_MIN if text == AUTO_MIN else _auto_or_float(text)


def _auto_or_float(text: str):
    if text == AUTO:
        return AUTO
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return v


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _emit(header, rows, output) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    if output is None or str(output) == "-":
        sys.stdout.write(buf.getvalue())
    else:
        Path(output).write_text(buf.getvalue())


def _ms(t0: float, enabled: bool):
    return round(1000.0 * (time.perf_counter() - t0), 3) if enabled else None


def _sampler(args):
    return named_manifold(args.synth, args.ambient_d)


def cmd_discr_error(args) -> int:
    spec = CostSpec.parse(args.cost)
    sup_seed = SeedSpec(args.seed, 0)
    mc_seed = SeedSpec(args.seed, 1)
    if args.input:
        support = read_points(args.input)
        if not args.mc_input:
            raise SystemExit("discr-error: --input needs --mc-input with points drawn from the measure")
        mc, N, mc_seed_arg = read_points(args.mc_input).points, args.mc_n, None
    else:
        if not args.synth:
            raise SystemExit("discr-error: give --input/--mc-input or --synth")
        sampler = _sampler(args)
        support = sampler(args.n, sup_seed.rng())
        mc, N, mc_seed_arg = sampler, args.mc_n, mc_seed
    index = build_index(support, spec, args.accel, seed=sup_seed)
    est = estimate_discretization_error(index, mc, N, args.delta, seed=mc_seed_arg, c_rho=args.c_rho)
    m = est.band.meta
    _emit(["n", "N", "delta", "value", "half_width", "sigma2", "C_rho", "seed"],
          [[est.n, est.N, args.delta, est.value, est.half_width, est.sample_variance, m["C_rho"], args.seed]],
          args.output)
    return 0


def cmd_dim(args) -> int:
    rows = []
    if args.profile_grid:
        if not args.synth:
            raise SystemExit("dim: --profile-grid needs --synth")
        sampler = _sampler(args)
        header = ["repeat", "n", "ot", "half_width", "d_hat_to_next", "wall_time_ms", "seed", "stream"]
        for r in range(args.repeats):
            t0 = time.perf_counter()
            seeds = (SeedSpec(args.seed, stream_id(r, 0)), SeedSpec(args.seed, stream_id(r, 1)))
            prof = dimension_profile(sampler, args.profile_grid, args.mc_n, args.delta, seeds)
            ms = _ms(t0, args.timing)
            for i, (m, e) in enumerate(zip(prof.grid, prof.ot)):
                dh = prof.d_hat[i] if i < len(prof.d_hat) else math.nan
                rows.append([r, m, e.value, e.half_width, dh, ms, args.seed, seeds[0].stream_id])
        _emit(header, rows, args.output)
        return 0
    header = ["repeat", "n", "eta", "N", "ot_n", "ot_eta_n", "d_hat", "band_lo", "band_hi", "low_dim_flag",
              "wall_time_ms", "seed", "stream"]
    cloud = read_points(args.input) if args.input else None
    if cloud is None and not args.synth:
        raise SystemExit("dim: give --input or --synth")
    for r in range(args.repeats):
        t0 = time.perf_counter()
        sup = SeedSpec(args.seed, stream_id(r, 0))
        try:
            if cloud is not None:
                e = estimate_dimension_from_cloud(cloud, args.n, args.eta, args.delta, seed=sup)
            else:
                mc = SeedSpec(args.seed, stream_id(r, 1))
                e = estimate_dimension(_sampler(args), args.n, args.eta, args.mc_n, args.delta, (sup, mc))
            vals = [e.n, e.eta, e.N, e.ot_n.value, e.ot_eta_n.value, e.d_hat, *e.propagated_band,
                    e.low_dimension]
        except DegenerateRatio:
            vals = [args.n, args.eta, args.mc_n, None, None, None, None, None, None]
        rows.append([r, *vals, _ms(t0, args.timing), args.seed, sup.stream_id])
    _emit(header, rows, args.output)
    return 0


def cmd_sinkhorn(args) -> int:
    X, Y = read_points(args.source), read_points(args.target)
    res = sinkhorn(X, Y, args.cost, args.epsilon, args.tol, args.max_iter, eps_scaling=args.eps_scaling)
    div = sinkhorn_divergence(X, Y, args.cost, args.epsilon, args.tol, args.max_iter)
    _emit(["epsilon", "tol", "iterations", "converged", "ot_eps", "s_eps"],
          [[args.epsilon, args.tol, res.state.iterations, res.converged and div.converged, res.ot_eps,
            div.value]], args.output)
    return 0


def cmd_w2(args) -> int:
    header = ["method", "n", "d_int_used", "eps_hi", "eps_lo", "estimate", "truth", "abs_error",
              "wall_time_ms", "seed", "stream"]
    rows = []
    for r in range(args.repeats):
        data = SeedSpec(args.seed, stream_id(r, 0))
        est_seed = SeedSpec(args.seed, stream_id(r, 1))
        if args.source:
            X, Y, truth = read_points(args.source), read_points(args.target), None
        else:
            X, Y, truth = sample_brenier_pair(named_pair(args.pair), args.n, data)
        t0 = time.perf_counter()
        rep = estimate_w2(args.method, X, Y, args.dint, args.eps0, args.bags, seed=est_seed,
                          tol=args.tol, max_iter=args.max_iter)
        m = rep.meta
        err = None if truth is None else abs(rep.value - truth)
        rows.append([args.method, X.n // 2, m["d_int_used"], m["eps_hi"], m["eps_lo"], rep.value, truth, err,
                     _ms(t0, args.timing), args.seed, data.stream_id])
    _emit(header, rows, args.output)
    return 0


def cmd_bench(args) -> int:
    try:
        record = run_experiment(args.config, threads=args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(record.summary_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otgeo", description="Solver-free discretization error, "
                                     "intrinsic dimension and debiased Sinkhorn estimates of W2^2.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--output", "-o", default=None, help="CSV destination (default stdout)")
        if seed:
            p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--timing", action="store_true", help="fill the wall_time_ms column")

    def synth_args(p):
        p.add_argument("--synth", choices=sorted(MANIFOLDS) + ["uniform_cube"], help="synthetic measure")
        p.add_argument("--ambient-d", type=int, default=None, help="dimension for uniform_cube")

    p = sub.add_parser("discr-error", help="Monte Carlo discretization error with Bernstein band")
    p.add_argument("--input", help="support points (CSV or binary)")
    p.add_argument("--mc-input", help="MC points drawn from the measure, independent of the support")
    synth_args(p)
    p.add_argument("--n", type=int, default=1000, help="support size for --synth")
    p.add_argument("--mc-n", type=int, default=None, help="number of MC points")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--cost", default="p1", help="p1 or p2")
    p.add_argument("--accel", default="auto", choices=[a.value for a in Acceleration])
    p.add_argument("--c-rho", type=float, default=None, help="cost bound; default is the sample diameter")
    common(p)
    p.set_defaults(func=cmd_discr_error)

    p = sub.add_parser("dim", help="two-scale intrinsic dimension estimate")
    p.add_argument("--input", help="point cloud (CSV or binary)")
    synth_args(p)
    p.add_argument("--n", type=int, default=None, help="smaller support size (default 2000 for --synth)")
    p.add_argument("--eta", type=float, default=DEFAULT_ETA)
    p.add_argument("--mc-n", type=int, default=20_000)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--profile-grid", type=_int_list, default=None, help="e.g. 100,200,400,800")
    common(p)
    p.set_defaults(func=cmd_dim)

    p = sub.add_parser("sinkhorn", help="entropic OT and Sinkhorn divergence between two clouds")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--cost", default="p2")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--eps-scaling", type=float, default=None, help="annealing factor in (0, 1) for small epsilon")
    common(p, seed=False)
    p.set_defaults(func=cmd_sinkhorn)

    p = sub.add_parser("w2", help="W2^2 estimate, plain or Richardson-debiased")
    p.add_argument("--source", help="source cloud; otherwise a synthetic --pair is sampled")
    p.add_argument("--target")
    p.add_argument("--pair", choices=sorted(PAIRS), default="gaussian_translation")
    p.add_argument("--n", type=int, default=2000, help="sample size 2n per cloud for --pair")
    p.add_argument("--method", choices=METHODS, default="diag-rich")
    p.add_argument("--dint", type=_dint, default=AUTO,
                   help="schedule dimension: a number, auto (source cloud) or auto-min (min over both)")
    p.add_argument("--eps0", type=_auto_or_float, default=AUTO)
    p.add_argument("--bags", type=int, default=8)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    common(p)
    p.set_defaults(func=cmd_w2)

    p = sub.add_parser("bench", help="run a configured experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--threads", type=int, default=None, help="overrides OTGEO_THREADS")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "dim" and args.n is None:
        args.n = None if args.input else 2000
    if args.command == "w2" and bool(args.source) != bool(args.target):
        parser.error("--source and --target go together")
    if args.command == "sinkhorn" and not args.epsilon > 0:
        parser.error("--epsilon must be positive")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            return args.func(args)
        except (ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2


if __name__ == "__main__":
    sys.exit(main())
