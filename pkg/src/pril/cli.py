"""Command-line entry point: ``pril run | aggregate | heatmap | attack``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace

from pril.errors import PrilError, ZeroVector
from pril.gridworld import RewardTable, build_mdp
from pril.harness import (aggregate_by, aggregate_header, emit_aggregate, emit_heatmap, format_cell,
                          load_config, load_policy, load_reward_vector, read_results, resolve_map,
                          run_sweep, spearman_trend, write_outputs)
from pril.irl import IrlConfig, policy_agreement, reconstruct_reward
from pril.metrics import distance_report
from pril.planning import value_iteration

log = logging.getLogger("pril")


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.out:
        config = replace(config, out_dir=args.out)
    if args.workers:
        config = replace(config, workers=args.workers)
    n_cells = len(config.maps) * len(config.policy_classes) * len(config.epsilons) * config.repeats
    log.info("running %d cells with %d worker(s)", n_cells, config.workers)
    records = run_sweep(config)
    paths = write_outputs(config, records)
    failed = sum(r.status != "ok" for r in records)
    log.info("%d records, %d not ok", len(records), failed)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def _cmd_aggregate(args) -> int:
    keys = [k.strip() for k in args.by.split(",") if k.strip()] if args.by else []
    table = aggregate_by(read_results(args.inp), keys)
    out = args.out or sys.stdout
    if out is sys.stdout:
        header = aggregate_header(keys)
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        for row in table:
            w.writerow([format_cell(row[k]) for k in header])
    else:
        emit_aggregate(table, keys, out)
    if "epsilon" in keys and args.trend:
        rho, p = spearman_trend(table, f"{args.trend}_mean")
        print(f"# spearman(epsilon, {args.trend}_mean) = {rho:.6g} (p = {p:.6g})", file=sys.stderr)
    return 0


def _parse_where(items) -> dict:
    where = {}
    for item in items or []:
        if "=" not in item:
            raise PrilError(f"--where expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        where[k.strip()] = v.strip()
    return where


def _cmd_heatmap(args) -> int:
    grid = resolve_map(args.map)
    R = load_reward_vector(args.rewards, _parse_where(args.where))
    emit_heatmap(R, grid, args.out)
    print(args.out)
    return 0


def _cmd_attack(args) -> int:
    grid = resolve_map(args.map)
    mdp = build_mdp(grid, wind=args.wind, rewards=RewardTable(), gamma=args.gamma)
    policy = load_policy(args.policy)
    if policy.n_states != mdp.n_states or policy.n_actions != mdp.n_actions:
        raise PrilError(f"policy is {policy.n_states}x{policy.n_actions}, "
                        f"map needs {mdp.n_states}x{mdp.n_actions}")
    released = policy.determinized()
    config = IrlConfig(r_max=args.r_max, l1_penalty=args.l1_penalty, gamma=args.gamma)
    res = reconstruct_reward(mdp.P, released, config, terminal=mdp.terminal)
    report = {"status": res.solver_status, "lp_objective": res.lp_objective if res.ok else None,
              "pivots": res.pivots}
    if res.ok:
        report["rewards"] = [float(x) for x in res.rewards]
        try:
            report["distances"] = distance_report(mdp.R, res.rewards).as_dict()
        except ZeroVector:
            report["distances"] = None
        replanned = value_iteration(mdp.with_rewards(res.rewards)).policy
        report["policy_agreement"] = policy_agreement(released, replanned, mask=~mdp.terminal)
        if args.heatmap:
            emit_heatmap(res.rewards, grid, args.heatmap)
    print(json.dumps(report, indent=2))
    return 0 if res.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pril", description="Reward-reconstruction attacks on private RL policies.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--workers", type=int, help="override the worker count")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("aggregate", help="group a results CSV and report means and std")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--by", default="", help="comma-separated keys: class, epsilon, grid_size, map")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.add_argument("--trend", choices=("l1", "l2", "linf"), default="l2",
                   help="metric for the epsilon rank correlation (needs epsilon in --by)")
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("heatmap", help="write a PGM heatmap of a reward vector")
    p.add_argument("--map", required=True, help="map file or bundled map id")
    p.add_argument("--rewards", required=True, help="CSV of rewards (flat or long format)")
    p.add_argument("--out", required=True)
    p.add_argument("--where", action="append", metavar="KEY=VALUE",
                   help="row filter for long-format reward files; repeatable")
    p.set_defaults(func=_cmd_heatmap)

    p = sub.add_parser("attack", help="reconstruct the reward behind one policy file")
    p.add_argument("--map", required=True, help="map file or bundled map id")
    p.add_argument("--policy", required=True, help="policy JSON (n_states, n_actions, probs)")
    p.add_argument("--wind", type=float, default=0.0001)
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--r-max", type=float, default=IrlConfig.r_max)
    p.add_argument("--l1-penalty", type=float, default=IrlConfig.l1_penalty)
    p.add_argument("--heatmap", help="also write the reconstruction as a PGM")
    p.set_defaults(func=_cmd_attack)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (PrilError, OSError, ValueError) as exc:
        print(f"pril: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
