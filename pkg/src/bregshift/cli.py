"""Command-line entry point.

    bregshift dre   --d 1 --sizes 200,3000 --reps 20 --out dre.csv
    bregshift shift --nu 0.1 --sizes 500,3000 --out shift.csv
    bregshift flow  --sizes 500,2000,5000 --out flow.csv
    bregshift run   --experiment dre --config exp.cfg
    bregshift dataset --d 5 --n 1000 --out data.csv
    bregshift sample --n-train 2000 --x -0.5,0.5 --n 500 --out samples.csv

Exit codes: 0 success, 1 config error, 2 more than 10% of replications
failed, 3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time

import numpy as np

from .bench import ConfigError, full_scale, load_config, parse_config_text, run_experiment, write_csv
from .core import RngStream
from .flow import FlowTrainConfig, OdeConfig, fit_velocity, gaussian_toy, sample_ode, write_samples
from .kernels import backend_name
from .scenarios import (SOURCE, DomainSample, GammaShiftSpec, RegressionSpec, gen_gamma_shift,
                        gen_regression, gen_domain, write_dataset)

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_IO = 0, 1, 2, 3


def _add_run_flags(p: argparse.ArgumentParser, with_experiment: bool) -> None:
    if with_experiment:
        p.add_argument("--experiment", choices=["dre", "shift", "flow"])
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--reps", type=int, help="replications per cell (default 20)")
    p.add_argument("--full", action="store_true", help="100 replications per cell")
    p.add_argument("--out", help="summary CSV path")
    p.add_argument("--sizes", help="comma-separated sample sizes")
    p.add_argument("--d", help="comma-separated covariate dimensions (dre)")
    p.add_argument("--nu", help="comma-separated noise levels (shift)")
    p.add_argument("--loss", choices=["ls", "lr"], help="Bregman objective (dre)")
    p.add_argument("--parallel", type=int, help="worker processes")
    p.add_argument("--iterations", type=int, help="override training iterations")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="any other config key, repeatable")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bregshift", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("dre", "shift", "flow"):
        _add_run_flags(sub.add_parser(name, help=f"run the {name} experiment"), False)
    _add_run_flags(sub.add_parser("run", help="run the experiment named by --experiment or the config"), True)
    ds = sub.add_parser("dataset", help="dump a synthetic dataset as CSV")
    ds.add_argument("--d", type=int, default=1)
    ds.add_argument("--n", type=int, default=1000)
    ds.add_argument("--n-target", type=int)
    ds.add_argument("--nu", type=float, help="add regression responses (d must be 5)")
    ds.add_argument("--seed", type=int, default=0)
    ds.add_argument("--out", required=True)
    sp = sub.add_parser("sample", help="train a flow on the Gaussian toy and dump generated samples")
    sp.add_argument("--n-train", type=int, default=2000)
    sp.add_argument("--iterations", type=int, default=5000)
    sp.add_argument("--sigma", type=float, default=0.5)
    sp.add_argument("--x", default="0.0", help="comma-separated covariate values")
    sp.add_argument("--n", type=int, default=1000, help="samples per covariate value")
    sp.add_argument("--steps", type=int, default=100)
    sp.add_argument("--integrator", choices=["euler", "rk4"], default="rk4")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    return parser


def _overrides(args) -> dict:
    ov = {
        "base_seed": args.seed,
        "replications": args.reps,
        "output_path": args.out,
        "loss": args.loss,
        "parallel": args.parallel,
        "iterations": args.iterations,
    }
    text = [f"sample_sizes={args.sizes}" if args.sizes else "",
            f"d={args.d}" if args.d else "",
            f"nu={args.nu}" if args.nu else ""]
    text.extend(args.set)
    ov.update(parse_config_text("\n".join(text)))
    if getattr(args, "experiment", None):
        ov["experiment"] = args.experiment
    return ov


def _run(args) -> int:
    try:
        ov = _overrides(args)
        if args.command != "run":
            ov["experiment"] = args.command
        cfg = load_config(args.config, **ov)
        if args.full:
            cfg = full_scale(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    logging.info("running %s with %d replications per cell, backend=%s",
                 cfg.experiment, cfg.replications, backend_name())
    result = run_experiment(cfg)
    try:
        write_csv(result.rows, cfg.output_path)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.info("wrote %d rows to %s in %.1fs", len(result.rows), cfg.output_path,
                 time.perf_counter() - t0)
    if result.failures:
        print(f"{len(result.failures)}/{result.total} replications failed", file=sys.stderr)
    return EXIT_PARTIAL if result.partial_failure else EXIT_OK


def _dataset(args) -> int:
    if args.n < 1 or args.d < 1:
        print("config error: n and d must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    rng = RngStream(args.seed)
    n_target = args.n_target or args.n
    if args.nu is not None:
        if args.d != 5:
            print("config error: regression responses need d = 5", file=sys.stderr)
            return EXIT_CONFIG
        spec = RegressionSpec(args.nu)
        src = gen_regression(spec, args.n, SOURCE, rng.child(1))
        tgt = gen_domain(spec.covariates, n_target, "target", rng.child(2))
        sample = DomainSample(src.X, tgt, src.Y)
    else:
        sample = gen_gamma_shift(GammaShiftSpec(args.d), args.n, n_target, rng)
    try:
        write_dataset(sample, args.out)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _sample(args) -> int:
    try:
        xs = [float(v) for v in args.x.split(",") if v.strip()]
        ode = OdeConfig(args.steps, args.integrator)
        if args.n < 1 or args.n_train < 1 or not xs:
            raise ValueError("need n, n-train >= 1 and at least one x")
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rng = RngStream(args.seed)
    X, Y = gaussian_toy(args.n_train, rng.child(1), args.sigma)
    model = fit_velocity(X, Y, cfg=FlowTrainConfig(iterations=args.iterations, seed=args.seed))
    xs_rows, zs = [], []
    for i, x in enumerate(xs):
        z = sample_ode(model, [x], args.n, ode, rng.child(10 + i))
        xs_rows.append(np.full((args.n, 1), x))
        zs.append(z)
    try:
        write_samples(np.vstack(xs_rows), np.vstack(zs), args.out)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "dataset":
        return _dataset(args)
    if args.command == "sample":
        return _sample(args)
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
