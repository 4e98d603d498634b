"""Command-line front end.

Subcommands:
  run       simulate the configured experiment and write curves/results
  baseline  same but forcing the centralized mode
  check     run the invariant suite; nonzero exit on any failure
  graph     sample the configured graph ensemble and print a summary
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .diagnostics import run_invariant_suite
from .experiment import graph_seed, load_config, run_experiment, write_results
from .network import GraphSpec, contraction_power, sample_er_irreducible, tau1, weights_from_graph
from .records import TrialConfig


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bisectnet",
        description="Decentralized noisy 20-questions simulation and checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the configured experiment")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--workers", type=int, default=None)

    p_base = sub.add_parser("baseline", help="run the centralized baseline")
    p_base.add_argument("--config", required=True)
    p_base.add_argument("--out", required=True)
    p_base.add_argument("--workers", type=int, default=None)

    p_check = sub.add_parser("check", help="run the invariant suite")
    p_check.add_argument("--config", default=None,
                         help="optional config; only its master seed is used")
    p_check.add_argument("--seed", type=int, default=None)

    p_graph = sub.add_parser("graph", help="summarize the graph ensemble")
    p_graph.add_argument("--config", required=True)
    return parser


def _load(path: str) -> TrialConfig:
    try:
        return load_config(path)
    except FileNotFoundError:
        print(f"error: config file not found: {path}", file=sys.stderr)
        raise SystemExit(2)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        print(f"error: bad config {path}: {exc}", file=sys.stderr)
        raise SystemExit(2)


def _cmd_run(args, mode_override=None) -> int:
    config = _load(args.config)
    if mode_override:
        config = TrialConfig.from_dict({**config.to_dict(), "mode": mode_override})
    result = run_experiment(config, workers=args.workers)
    paths = write_results(result, args.out)
    final = result.curves.rmse_avg[-1]
    print(f"{result.n_trials} trials, final rmse_avg={final:.6g}")
    for name, path in paths.items():
        print(f"wrote {name}: {path}")
    return 0


def _cmd_check(args) -> int:
    seed = args.seed
    if seed is None and args.config:
        seed = _load(args.config).master_seed
    reports = run_invariant_suite(**({"seed": seed} if seed is not None else {}))
    width = max(len(r.name) for r in reports)
    print(f"{'check':<{width}}  {'residual':>12}  {'tolerance':>10}  status")
    for r in reports:
        status = "pass" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {r.residual:>12.3e}  {r.tolerance:>10.1e}  {status}")
    failed = [r for r in reports if not r.passed]
    print(f"{len(reports) - len(failed)}/{len(reports)} checks passed")
    return 1 if failed else 0


def _cmd_graph(args) -> int:
    config = _load(args.config)
    print("graph  nodes  edges  mean_degree  tau1  contraction_r")
    for g in range(config.graph_samples):
        spec = GraphSpec(config.num_agents, config.edge_prob,
                         graph_seed(config.master_seed, g))
        adj = sample_er_irreducible(spec)
        matrix = weights_from_graph(adj, config.self_reliances)
        r, tau_r = contraction_power(matrix, r_max=2 * config.num_agents)
        degrees = adj.sum(axis=1)
        print(f"{g:>5d}  {config.num_agents:>5d}  {int(adj.sum() // 2):>5d}  "
              f"{float(np.mean(degrees)):>11.3f}  {tau1(matrix):.4f}  "
              f"r={r} tau1(A^r)={tau_r:.4f}")
    return 0


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "baseline":
            return _cmd_run(args, mode_override="centralized")
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "graph":
            return _cmd_graph(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
