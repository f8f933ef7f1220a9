"""Command-line front end.

Subcommands: simulate (one configuration), sweep (experiment spec), validate
(oracle suites), gen-topology and gen-workload (JSON artifacts). Exit codes:
0 success, 1 configuration error, 2 validation-suite failure.
RELPLACE_OUTPUT_DIR sets the default output directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import experiments, validation
from .simulator import SimConfig, run_batch, write_summary_json, write_timeseries_csv
from .topology import InfrastructureNetwork, generate_er_topology
from .workload import WorkloadRanges, generate_arrivals, generate_request

_CONFIG_FLAGS = [
    ("node_count", int), ("edge_prob", float), ("request_count", int),
    ("arrival_rate", float), ("algorithm", str), ("mechanism", str),
    ("omega", float), ("k", int), ("delta", int), ("repetitions", int),
    ("cpu_multiplier", float), ("bw_multiplier", float), ("rng_seed", int),
    ("rrsp_candidates", int), ("backup_mode", str), ("jobs", int),
]


def _out_dir(args) -> str:
    return args.out_dir or os.environ.get("RELPLACE_OUTPUT_DIR", ".")


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with simulation settings")
    for name, typ in _CONFIG_FLAGS:
        p.add_argument(f"--{name.replace('_', '-')}", type=typ, dest=name)


def _build_config(args) -> SimConfig:
    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    cfg = SimConfig.from_json(data)
    overrides = {name: getattr(args, name) for name, _t in _CONFIG_FLAGS
                 if getattr(args, name, None) is not None}
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def _cmd_simulate(args) -> int:
    cfg = _build_config(args)
    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    batch = run_batch(cfg)
    write_timeseries_csv(os.path.join(out, "timeseries.csv"),
                         batch.mean_failures, batch.mean_bandwidth_series)
    write_summary_json(os.path.join(out, "summary.json"), cfg, batch)
    print(f"{cfg.algorithm} ({cfg.mechanism}): mean failures {batch.mean_total_failures:.3f}, "
          f"mean bandwidth {batch.mean_bandwidth:.3f} MBps, "
          f"success rate {batch.placement_success_rate:.3f}")
    print(f"artifacts in {out}")
    return 0


def _cmd_sweep(args) -> int:
    with open(args.spec) as fh:
        data = json.load(fh)
    if args.out_dir:
        data["output_dir"] = args.out_dir
    elif "output_dir" not in data:
        data["output_dir"] = os.environ.get("RELPLACE_OUTPUT_DIR", ".")
    spec = experiments.ExperimentSpec.from_json(data)
    experiments.run_experiment(spec)
    print(f"summary.csv in {spec.output_dir}")
    return 0


def _cmd_validate(args) -> int:
    suites = []
    if args.suite in ("all", "operators"):
        suites.append(validation.run_operator_suite(args.trials, seed=args.seed))
    if args.suite in ("all", "matrix"):
        suites.append(validation.run_matrix_suite(args.graphs, seed=args.seed + 1))
    if args.suite in ("all", "model"):
        suites.append(validation.run_model_suite(
            args.cases, args.samples, seed=args.seed + 2, perturb=args.perturb))
    ok = True
    for rep in suites:
        status = "PASS" if rep.passed else "FAIL"
        print(f"[{status}] {rep.name}: {rep.detail}")
        ok = ok and rep.passed
    return 0 if ok else 2


def _cmd_gen_topology(args) -> int:
    net = generate_er_topology(args.nodes, args.edge_prob, rng_seed=args.seed,
                               access_fraction=args.access_fraction)
    payload = json.dumps(net.to_json(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
        print(f"wrote {args.out}")
    else:
        print(payload)
    return 0


def _cmd_gen_workload(args) -> int:
    import numpy as np

    net = InfrastructureNetwork.load(args.topology)
    if not net.access_nodes:
        print("topology has no access nodes", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    arrivals = generate_arrivals(args.count, args.rate, rng)
    ranges = WorkloadRanges(backup_mode=args.backup_mode)
    reqs = [generate_request(ranges, net.access_nodes, rng, i, arrivals[i])
            for i in range(args.count)]
    payload = json.dumps([r.to_json() for r in reqs], indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
        print(f"wrote {args.out}")
    else:
        print(payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relplace",
                                description="network-aware microservice placement simulator")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one configuration")
    _add_config_flags(sim)
    sim.add_argument("--out-dir")
    sim.set_defaults(func=_cmd_simulate)

    sw = sub.add_parser("sweep", help="run an experiment spec across a sweep axis")
    sw.add_argument("spec", help="experiment spec JSON")
    sw.add_argument("--out-dir")
    sw.set_defaults(func=_cmd_sweep)

    va = sub.add_parser("validate", help="run the oracle validation suites")
    va.add_argument("--suite", choices=["all", "operators", "matrix", "model"], default="all")
    va.add_argument("--trials", type=int, default=100_000)
    va.add_argument("--graphs", type=int, default=50)
    va.add_argument("--cases", type=int, default=8)
    va.add_argument("--samples", type=int, default=50_000)
    va.add_argument("--perturb", type=float, default=0.0)
    va.add_argument("--seed", type=int, default=0)
    va.set_defaults(func=_cmd_validate)

    gt = sub.add_parser("gen-topology", help="emit a random topology as JSON")
    gt.add_argument("--nodes", type=int, default=50)
    gt.add_argument("--edge-prob", type=float, default=0.2)
    gt.add_argument("--access-fraction", type=float, default=0.2)
    gt.add_argument("--seed", type=int, default=0)
    gt.add_argument("--out")
    gt.set_defaults(func=_cmd_gen_topology)

    gw = sub.add_parser("gen-workload", help="emit a request stream as JSON")
    gw.add_argument("--topology", required=True, help="topology JSON file")
    gw.add_argument("--count", type=int, default=100)
    gw.add_argument("--rate", type=float, default=1.0)
    gw.add_argument("--backup-mode", choices=["full", "random", "none"], default="full")
    gw.add_argument("--seed", type=int, default=0)
    gw.add_argument("--out")
    gw.set_defaults(func=_cmd_gen_workload)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
