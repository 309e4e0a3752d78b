"""Command-line driver for the experiment pipeline.

Subcommands chain dataset generation, training, encoding and the built-in
MILP solver, and write the table-style reports the sweep experiments need.
Exit codes: 0 success, 2 usage error, 3 infeasible model, 4 solver limit
reached without an incumbent, 1 anything else.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .data import Dataset, generate_dataset, load_dataset, save_dataset
from .encode import compute_activation_bounds
from .milp.bnb import SolveConfig, solve_milp
from .milp.lpfile import export_lp_format
from .mlp import (DivergenceError, LossSpec, Topology, TrainConfig, evaluate,
                  load_model, save_model, train)
from .sim import SimConfig
from .system import SystemSpec, load_system_spec
from .uc import (attach_frequency_constraints, build_uc, extract_solution,
                 render_schedule_grid, write_schedule_csv)

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_NO_INCUMBENT = 4

_DEFAULT_EPOCHS = 3000
_DEFAULT_LR = 0.02
_DEFAULT_BATCH = 16


class UsageError(ValueError):
    pass


def _read_spec(path: str) -> SystemSpec:
    with open(path) as fh:
        return load_system_spec(fh.read())


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _parse_hidden(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(v) for v in text.replace("[", "").replace("]", "")
                      .split(",") if v.strip())
    except ValueError as exc:
        raise UsageError(f"bad hidden-layer list {text!r}") from exc
    if not sizes or any(s < 1 for s in sizes):
        raise UsageError(f"bad hidden-layer list {text!r}")
    return sizes


def cmd_gen_data(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    spec = _read_spec(args.spec)
    out = _outdir(args)
    ds = generate_dataset(spec, args.n, args.seed,
                          cfg=SimConfig(dt=args.dt, horizon=args.horizon))
    save_dataset(ds, os.path.join(out, "dataset.csv"),
                 os.path.join(out, "dataset.json"))
    print(f"wrote {len(ds)} samples ({args.n} requested) to {out}/dataset.csv")
    return EXIT_OK


def _train_once(ds: Dataset, hidden, loss: LossSpec, epochs: int, seed: int):
    n_inputs = len(ds.samples[0].features)
    topo = Topology(hidden_sizes=hidden, input_dim=n_inputs)
    cfg = TrainConfig(epochs=epochs, batch_size=_DEFAULT_BATCH,
                      learning_rate=_DEFAULT_LR, seed=seed)
    params, history = train(ds, topo, loss, cfg)
    return params, evaluate(params, ds, "test")


def cmd_train(args) -> int:
    ds = load_dataset(args.data, args.data.replace(".csv", ".json"))
    loss = LossSpec(family=args.loss, c_plus=args.cplus, c_minus=args.cminus)
    params, metrics = _train_once(ds, _parse_hidden(args.hidden), loss,
                                  args.epochs, args.seed)
    out = _outdir(args)
    save_model(params, os.path.join(out, "model.json"), loss_spec=loss,
               train_seed=args.seed)
    print(f"{metrics.mae!r},{metrics.r2!r},{metrics.conservative_proportion!r}")
    return EXIT_OK


def _solve_uc_model(spec, params, nadir_floor, time_limit, node_limit, log):
    model = build_uc(spec)
    if params is not None:
        bounds = compute_activation_bounds(params)
        attach_frequency_constraints(model, spec, params, bounds,
                                     nadir_floor=nadir_floor)
    cfg = SolveConfig(time_limit=time_limit, node_limit=node_limit,
                      log_interval=10)
    result = solve_milp(model, cfg, log=log)
    return model, result


def cmd_solve_uc(args) -> int:
    spec = _read_spec(args.spec)
    params = None
    if args.model:
        params, _, _ = load_model(args.model)
    floor = -math.inf if args.nadir_floor is not None and args.nadir_floor <= 0 \
        else args.nadir_floor
    out = _outdir(args)
    with open(os.path.join(out, "solver.log"), "w") as log:
        model, result = _solve_uc_model(spec, params, floor, args.time_limit,
                                        args.node_limit, log)
    if result.status == "infeasible":
        print("model infeasible: no schedule satisfies the constraints",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    if result.x is None:
        print("solver hit its limit without finding a schedule", file=sys.stderr)
        return EXIT_NO_INCUMBENT
    sol = extract_solution(model, result.x)
    write_schedule_csv(sol, spec, os.path.join(out, "schedule.csv"))
    with open(os.path.join(out, "schedule.txt"), "w") as fh:
        fh.write(render_schedule_grid(sol, spec))
    with open(os.path.join(out, "model.lp"), "w") as fh:
        fh.write(export_lp_format(model))
    print(f"status={result.status} cost={sol.total_cost:.2f} "
          f"gap={result.mip_gap:.4g} nodes={result.nodes} "
          f"committed_unit_hours={sol.committed_unit_hours()}")
    return EXIT_OK


def _sweep_one(payload):
    """One sweep configuration; top-level function so it can cross a
    process boundary."""
    (label, spec_text, n, seed, epochs, hidden, loss_args, floor,
     time_limit, node_limit, dt, horizon) = payload
    try:
        spec = load_system_spec(spec_text)
        ds = generate_dataset(spec, n, seed, cfg=SimConfig(dt=dt, horizon=horizon))
        loss = LossSpec(**loss_args)
        params, metrics = _train_once(ds, hidden, loss, epochs, seed)
        model, result = _solve_uc_model(spec, params, floor, time_limit,
                                        node_limit, log=None)
        gap = "inf" if not math.isfinite(result.mip_gap) else repr(result.mip_gap)
        cost = "n/a" if result.x is None else repr(
            float(model.objective_value(result.x)))
        return (label, "ok", repr(metrics.mae), repr(metrics.r2),
                repr(metrics.conservative_proportion),
                f"{result.wall_time:.3f}", gap, cost)
    except Exception as exc:  # a failed configuration must not kill the sweep
        return (label, f"error:{type(exc).__name__}", "n/a", "n/a", "n/a",
                "n/a", "n/a", "n/a")


def cmd_sweep(args) -> int:
    spec = _read_spec(args.spec)
    from .system import emit_system_spec
    spec_text = emit_system_spec(spec)

    configs = []
    if args.mode == "size":
        grid = args.grid or "2,4,8,32"
        for tok in grid.split(","):
            size = int(tok)
            configs.append((f"size={size}", (size,),
                            dict(family="l2", c_plus=1.0, c_minus=1.0)))
    elif args.mode == "topology":
        grid = args.grid or "[32];[16,16];[8,24];[16,8,8]"
        for tok in grid.split(";"):
            hidden = _parse_hidden(tok)
            configs.append((f"topology={list(hidden)}", hidden,
                            dict(family="l2", c_plus=1.0, c_minus=1.0)))
    elif args.mode == "loss":
        grid = args.grid or "l1:1;l1:5;l2:1;l2:5"
        for tok in grid.split(";"):
            fam, _, ratio = tok.partition(":")
            ratio = float(ratio or 1.0)
            if fam not in ("l1", "l2"):
                raise UsageError(f"bad loss grid entry {tok!r}")
            configs.append((f"loss={fam}:{ratio:g}", _parse_hidden(args.hidden),
                            dict(family=fam, c_plus=ratio, c_minus=1.0)))
    else:
        raise UsageError(f"unknown sweep mode {args.mode!r}")

    floor = -math.inf if args.nadir_floor is not None and args.nadir_floor <= 0 \
        else args.nadir_floor
    payloads = [(label, spec_text, args.n, args.seed, args.epochs, hidden,
                 loss_args, floor, args.time_limit, args.node_limit,
                 args.dt, args.horizon)
                for label, hidden, loss_args in configs]

    workers = int(os.environ.get("FREQSEC_THREADS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, payloads))
    else:
        rows = [_sweep_one(p) for p in payloads]

    out = _outdir(args)
    report = os.path.join(out, "report.csv")
    with open(report, "w") as fh:
        fh.write(f"# mode={args.mode} n={args.n} seed={args.seed} "
                 f"epochs={args.epochs} node_limit={args.node_limit} "
                 f"time_limit={args.time_limit}\n")
        fh.write("config,status,mae,r2,conservative_proportion,"
                 "solve_time_s,mip_gap,total_cost\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    print(f"wrote {len(rows)} rows to {report}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="freqsec",
                                 description="frequency-security UC pipeline")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="sample, simulate and label a dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--dt", type=float, default=0.02)
    p.add_argument("--horizon", type=float, default=40.0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a nadir predictor")
    p.add_argument("--data", required=True, help="dataset CSV path")
    p.add_argument("--hidden", default="32", help="comma list, e.g. 16,16")
    p.add_argument("--loss", choices=("l1", "l2"), default="l2")
    p.add_argument("--cplus", type=float, default=1.0)
    p.add_argument("--cminus", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=_DEFAULT_EPOCHS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve-uc", help="build and solve the commitment MILP")
    p.add_argument("--spec", required=True)
    p.add_argument("--model", default=None,
                   help="model JSON; omit for the unconstrained case")
    p.add_argument("--nadir-floor", type=float, default=None,
                   help="security threshold in Hz; <= 0 disables the limit")
    p.add_argument("--time-limit", type=float, default=1000.0)
    p.add_argument("--node-limit", type=int, default=1_000_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve_uc)

    p = sub.add_parser("sweep", help="train/encode/solve over a config grid")
    p.add_argument("--mode", choices=("loss", "size", "topology"), required=True)
    p.add_argument("--grid", default=None)
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=_DEFAULT_EPOCHS)
    p.add_argument("--hidden", default="32", help="fixed topology for loss mode")
    p.add_argument("--nadir-floor", type=float, default=None)
    p.add_argument("--time-limit", type=float, default=1000.0)
    p.add_argument("--node-limit", type=int, default=60)
    p.add_argument("--dt", type=float, default=0.02)
    p.add_argument("--horizon", type=float, default=40.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_OTHER
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
