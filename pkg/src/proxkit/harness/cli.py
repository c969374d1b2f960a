"""``proxkit`` command line: prox | optimize | sample | bench | validate."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .. import apbm, prox, sampler
from ..problems import holder_spec_of, make_oracle, read_instance
from .experiments import KINDS, ConfigError, ExperimentConfig, run_experiment

EXIT_OK, EXIT_FAIL, EXIT_INNER = 0, 1, 2


def _vector(text: str | None, d: int) -> np.ndarray:
    if text is None:
        return np.zeros(d)
    v = np.array([float(t) for t in text.split(",")], dtype=float)
    if v.shape != (d,):
        raise SystemExit(f"expected {d} comma-separated values, got {v.shape[0]}")
    return v


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("PROXKIT_SEED")
    return int(env) if env else 0


def cmd_prox(args) -> int:
    inst = read_instance(args.instance)
    oracle = make_oracle(inst)
    y = _vector(args.y, inst.dim)
    res = prox.solve_prox(oracle, y, prox.ProxParams(args.eta, args.delta, args.max_iters),
                          holder=holder_spec_of(inst))
    if args.trace:
        prox.write_trace_csv(res, args.trace)
    print(f"J={res.iters} delta_J={res.delta_trajectory[-1]:.6e} f_eta={res.f_eta_best:.12g} "
          f"oracle_calls={res.oracle_calls}")
    if not res.converged:
        print(res.message, file=sys.stderr)
        return EXIT_INNER
    return EXIT_OK


def cmd_optimize(args) -> int:
    inst = read_instance(args.instance)
    oracle = make_oracle(inst)
    params = apbm.ApbmParams(args.eta0, args.beta0, args.epsilon, args.max_outer)
    status = EXIT_OK
    try:
        trace = apbm.apbm_run(oracle, _vector(args.y0, inst.dim), params)
    except apbm.InnerSolveError as exc:
        print(str(exc), file=sys.stderr)
        trace, status = exc.trace, EXIT_INNER
    if args.trace:
        apbm.write_trace_csv(trace, args.trace)
    print(f"cycles={len(trace.outer)} best_value={trace.best_value:.12g} "
          f"final_eta={trace.etas[-1] if trace.outer else args.eta0:g} inner_iters={trace.total_inner_iters}")
    return status


def cmd_sample(args) -> int:
    inst = read_instance(args.instance)
    spec = holder_spec_of(inst)
    if args.eta == "auto":
        eta = sampler.stepsize_holder(spec, inst.dim) if spec.is_single else sampler.stepsize_hybrid(spec, inst.dim)
    else:
        eta = float(args.eta)
    runs = sampler.run_chains(make_oracle(inst), np.zeros(inst.dim), eta, args.delta, args.steps, args.chains,
                              _seed(args))
    sampler.write_chains_csv(runs, args.out)
    trials = np.concatenate([r.trials for r in runs])
    print(f"eta={eta:.6g} chains={args.chains} steps={args.steps} mean_trials={trials.mean():.4f}")
    return EXIT_OK


def _run(kind: str, args) -> int:
    params = {}
    for item in args.param or []:
        key, _, value = item.partition("=")
        params[key] = json.loads(value)
    if args.seed is not None or os.environ.get("PROXKIT_SEED"):
        params.setdefault("seed", _seed(args))
    try:
        cfg = ExperimentConfig(kind, Path(args.out_dir), args.instance, params)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    res = run_experiment(cfg)
    for f in res.files:
        print(f)
    for msg in res.failures:
        print(f"FAILED {msg}", file=sys.stderr)
    return res.status


def cmd_bench(args) -> int:
    return _run(args.kind, args)


def cmd_validate(args) -> int:
    return _run("validate", args)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="proxkit", description="Proximal bundle optimization and sampling.")
    ap.add_argument("--config", help="JSON file whose keys override the per-flag values")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prox", help="solve one proximal subproblem")
    p.add_argument("--instance", required=True)
    p.add_argument("--y", help="comma-separated center (default: origin)")
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--trace", help="CSV trace of delta_j")
    p.set_defaults(func=cmd_prox)

    p = sub.add_parser("optimize", help="adaptive proximal bundle method")
    p.add_argument("--instance", required=True)
    p.add_argument("--y0", help="comma-separated start (default: origin)")
    p.add_argument("--eta0", type=float, default=1.0)
    p.add_argument("--beta0", type=float, default=0.1)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument("--max-outer", type=int, default=100)
    p.add_argument("--trace", help="CSV trace of outer cycles")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sample", help="run proximal sampler chains")
    p.add_argument("--instance", required=True)
    p.add_argument("--eta", default="auto", help="'auto' or a positive stepsize")
    p.add_argument("--delta", type=float, default=sampler.DEFAULT_DELTA)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    for name, func in (("bench", cmd_bench), ("validate", cmd_validate)):
        p = sub.add_parser(name, help="run an experiment" if name == "bench" else "run the validation oracles")
        if name == "bench":
            p.add_argument("--kind", choices=KINDS, required=True)
        p.add_argument("--instance")
        p.add_argument("--out-dir", default="out")
        p.add_argument("--seed", type=int)
        p.add_argument("--param", action="append", help="key=value (value parsed as JSON)")
        p.set_defaults(func=func)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
        for key, value in overrides.items():
            key = key.replace("-", "_")
            if not hasattr(args, key):
                ap.error(f"config key {key!r} is not an option of '{args.command}'")
            setattr(args, key, value)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
