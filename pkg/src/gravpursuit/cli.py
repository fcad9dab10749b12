"""Command-line front end: synthesize datasets, run solves and lambda
sweeps, and evaluate expansions against reference models.

Every command writes a JSON run manifest next to its artifacts with the
fully resolved configuration, input digests, timings, and termination
status, so a run can be reproduced exactly from the manifest alone.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time

import numpy as np

from . import fileio, metrics
from .basis import Dictionary
from .forward import DataSet, NoiseSpec, generate_dataset
from .geometry import BallPoint, driscoll_healy, reuter, reuter_with_min_points
from .solver import SolverConfig, solve

__all__ = ["main"]


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(path, command, config, inputs, artifacts, timings, status, seed=None):
    doc = {
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "seed": seed,
        "artifacts": [str(a) for a in artifacts],
        "timings": timings,
        "status": status,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _limit_threads(n):
    if n is None:
        return
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(limits=n)
    except ImportError:
        print("threadpoolctl not installed; --threads ignored", file=sys.stderr)


def cmd_synth(args) -> int:
    t0 = time.monotonic()
    model = fileio.read_coefficients(args.model, fmt=args.model_format,
                                     min_degree=args.min_degree)
    orbit = fileio.read_orbit(args.orbit, reference_radius=args.reference_radius)
    ds = generate_dataset(model, orbit, NoiseSpec(level=args.noise, seed=args.seed))
    fileio.write_dataset_csv(ds, args.out)
    config = {
        "model": args.model, "model_format": args.model_format, "orbit": args.orbit,
        "reference_radius": args.reference_radius, "noise": args.noise,
        "seed": args.seed, "min_degree": args.min_degree, "out": args.out,
        "rejected_orbit_rows": orbit.rejected,
    }
    _write_manifest(args.out + ".manifest.json", "synth", config,
                    [args.model, args.orbit], [args.out],
                    {"seconds": time.monotonic() - t0}, "ok", seed=args.seed)
    print(f"wrote {ds.size} samples to {args.out}"
          + (f" ({orbit.rejected} orbit rows rejected)" if orbit.rejected else ""))
    return 0


def _solver_config_from_args(args) -> SolverConfig:
    return SolverConfig(
        lam=args.lam,
        max_iterations=args.iterations,
        rde_threshold=args.rde,
        sh_max_degree=args.sh_degree,
        learning=not args.no_learning,
        global_evals=args.global_evals,
        local_evals=args.local_evals,
        seed_radius=args.seed_radius,
    )


def _build_dictionary(args, cfg: SolverConfig) -> Dictionary | None:
    if args.seed_grid_gamma is None:
        return None
    grid = reuter(args.seed_grid_gamma)
    seeds = tuple(BallPoint(cfg.seed_radius, d) for d in grid.points)
    return Dictionary(sh_max_degree=cfg.sh_max_degree, kernel_seeds=seeds,
                      learning_enabled=cfg.learning)


def _run_solve(args, ds: DataSet, out_path: str):
    cfg = _solver_config_from_args(args)
    dictionary = _build_dictionary(args, cfg)
    approx, history, status = solve(cfg, ds, dictionary)
    fileio.write_expansion(approx, history, out_path)
    hist_path = out_path + ".history.csv"
    with open(hist_path, "w") as fh:
        fh.write("iteration,type,params,alpha,rde,tikhonov\n")
        for row in history:
            el = row.element
            if hasattr(el, "n"):
                params = f"n={el.n};j={el.j}"
            else:
                x = el.x.to_cartesian()
                params = f"x={x[0]!r};{x[1]!r};{x[2]!r}"
            fh.write(f"{row.iteration},{type(el).__name__},{params},"
                     f"{row.alpha!r},{row.rde!r},{row.tikhonov!r}\n")
    return approx, history, status, hist_path, cfg


def cmd_solve(args) -> int:
    t0 = time.monotonic()
    ds = fileio.read_dataset_csv(args.data)
    approx, history, status, hist_path, cfg = _run_solve(args, ds, args.out)
    config = {
        "data": args.data, "lambda": args.lam, "iterations": args.iterations,
        "rde": args.rde, "sh_degree": args.sh_degree, "learning": not args.no_learning,
        "seed_grid_gamma": args.seed_grid_gamma, "seed_radius": args.seed_radius,
        "global_evals": args.global_evals, "local_evals": args.local_evals,
        "out": args.out,
    }
    _write_manifest(args.out + ".manifest.json", "solve", config, [args.data],
                    [args.out, hist_path], {"seconds": time.monotonic() - t0}, status)
    final_rde = history[-1].rde if history else 1.0
    print(f"{status}: {len(history)} iterations, final RDE {final_rde:.6g}")
    return 0


def cmd_eval(args) -> int:
    t0 = time.monotonic()
    approx, _ = fileio.read_expansion(args.expansion)
    model = fileio.read_coefficients(args.reference_model, fmt=args.model_format,
                                     min_degree=args.min_degree)
    grid = driscoll_healy(args.grid_lat, args.grid_lon)
    fa = metrics.evaluate_approx(approx, grid)
    fr = metrics.evaluate_model(model, grid)
    err = metrics.abs_error_field(fa, fr)
    value = metrics.rrmse(fa, fr)
    paths = [args.out_prefix + suffix for suffix in (".approx.csv", ".reference.csv",
                                                     ".abserr.csv")]
    fileio.write_grid_csv(fa, paths[0])
    fileio.write_grid_csv(fr, paths[1])
    fileio.write_grid_csv(err, paths[2])
    config = {
        "expansion": args.expansion, "reference_model": args.reference_model,
        "model_format": args.model_format, "min_degree": args.min_degree,
        "grid_lat": args.grid_lat, "grid_lon": args.grid_lon,
        "out_prefix": args.out_prefix, "rrmse": value,
    }
    _write_manifest(args.out_prefix + ".manifest.json", "eval", config,
                    [args.expansion, args.reference_model], paths,
                    {"seconds": time.monotonic() - t0}, "ok")
    print(f"RRMSE {value:.6g}")
    return 0


def cmd_sweep(args) -> int:
    t0 = time.monotonic()
    ds = fileio.read_dataset_csv(args.data)
    lambdas = [float(s) for s in args.lambdas.split(",") if s]
    if not lambdas:
        raise ValueError("no lambda values given")
    reference = None
    grid = None
    if args.reference_model is not None:
        reference = fileio.read_coefficients(args.reference_model, fmt=args.model_format,
                                             min_degree=args.min_degree)
        grid = driscoll_healy(args.grid_lat, args.grid_lon)
        fr = metrics.evaluate_model(reference, grid)
    rows = []
    artifacts = []
    for lam in lambdas:
        args.lam = lam
        out_path = f"{args.out_prefix}.lambda{lam:g}.json"
        approx, history, status, hist_path, _ = _run_solve(args, ds, out_path)
        artifacts.extend([out_path, hist_path])
        final_rde = history[-1].rde if history else 1.0
        if reference is not None:
            fa = metrics.evaluate_approx(approx, grid)
            value = metrics.rrmse(fa, fr)
        else:
            value = math.nan
        rows.append((lam, final_rde, value, status))
    table_path = args.out_prefix + ".table.csv"
    with open(table_path, "w") as fh:
        fh.write("lambda,rde,rrmse,status\n")
        for lam, r, v, status in rows:
            fh.write(f"{lam!r},{r!r},{v!r},{status}\n")
    artifacts.append(table_path)
    print("lambda      rde         rrmse")
    for lam, r, v, _ in rows:
        print(f"{lam:<11g} {r:<11.5g} {v:.5g}" if math.isfinite(v)
              else f"{lam:<11g} {r:<11.5g} -")
    config = {
        "data": args.data, "lambdas": lambdas, "iterations": args.iterations,
        "rde": args.rde, "sh_degree": args.sh_degree, "learning": not args.no_learning,
        "seed_grid_gamma": args.seed_grid_gamma, "seed_radius": args.seed_radius,
        "global_evals": args.global_evals, "local_evals": args.local_evals,
        "reference_model": args.reference_model, "out_prefix": args.out_prefix,
    }
    inputs = [args.data] + ([args.reference_model] if args.reference_model else [])
    _write_manifest(args.out_prefix + ".manifest.json", "sweep", config, inputs,
                    artifacts, {"seconds": time.monotonic() - t0}, "ok")
    return 0


def _add_model_args(p):
    p.add_argument("--model-format", choices=("simple", "gfc"), default="simple")
    p.add_argument("--min-degree", type=int, default=3)


def _add_solve_args(p):
    p.add_argument("--lambda", dest="lam", type=float, default=1e-8)
    p.add_argument("--iterations", type=int, default=1600)
    p.add_argument("--rde", type=float, default=0.05)
    p.add_argument("--sh-degree", type=int, default=96)
    p.add_argument("--no-learning", action="store_true")
    p.add_argument("--seed-grid-gamma", type=int, default=None)
    p.add_argument("--seed-radius", type=float, default=0.94)
    p.add_argument("--global-evals", type=int, default=1000)
    p.add_argument("--local-evals", type=int, default=200)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gravpursuit",
                                     description="Greedy regularized sparse approximation "
                                                 "of satellite gravity data")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS/worker thread count")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a noisy dataset along an orbit")
    p.add_argument("--model", required=True)
    _add_model_args(p)
    p.add_argument("--orbit", required=True)
    p.add_argument("--reference-radius", type=float, default=fileio.DEFAULT_REFERENCE_RADIUS)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("solve", help="run the greedy solver on a dataset")
    p.add_argument("--data", required=True)
    _add_solve_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="evaluate an expansion against a reference model")
    p.add_argument("--expansion", required=True)
    p.add_argument("--reference-model", required=True)
    _add_model_args(p)
    p.add_argument("--grid-lat", type=int, default=181)
    p.add_argument("--grid-lon", type=int, default=361)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="solve once per regularization parameter")
    p.add_argument("--data", required=True)
    p.add_argument("--lambdas", required=True, help="comma-separated values")
    _add_solve_args(p)
    p.add_argument("--reference-model", default=None)
    _add_model_args(p)
    p.add_argument("--grid-lat", type=int, default=181)
    p.add_argument("--grid-lon", type=int, default=361)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _limit_threads(args.threads)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
