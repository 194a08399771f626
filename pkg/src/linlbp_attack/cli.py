"""Command-line entry point: ``linlbp-attack {attack,sweep,baseline,scenario,report}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .attack import read_flips
from .graph import GraphError
from .harness import (DEFAULTS, REPORT_COLUMNS, ConfigError, ExperimentConfig, format_value,
                      read_config_file, read_report, report_overlap, run_experiment)

COMMAND_METHODS = {
    "attack": "none,ours",
    "sweep": "none,ours",
    "baseline": "none,random,del-add",
    "scenario": "none,ours",
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", help="edge-list file, or surrogate:facebook[:SEED] (default)")
    p.add_argument("--labels", help="label file ('node_id P|N'); skips positive synthesis")
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads for target rows and sweep points")
    p.add_argument("--cost", choices=["equal", "uniform", "categorical"])
    p.add_argument("--K", type=int, dest="K", help="per-node modification budget")
    p.add_argument("--target-method", choices=["rand", "cc", "close"])
    p.add_argument("--methods", help="comma list from none,random,del-add,ours")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linlbp-attack",
                                     description="Structural attacks on LinLBP collective classification")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("attack", help="single full-knowledge attack run"))
    sp = sub.add_parser("sweep", help="run the pipeline once per value of one parameter")
    _common(sp)
    sp.add_argument("--axis", help="K, AE, target_count, lambda, eta, tau or substitute_w")
    sp.add_argument("--values", help="comma-separated sweep values")
    _common(sub.add_parser("baseline", help="Random and Del-Add baselines"))
    sc = sub.add_parser("scenario", help="attack with partial knowledge")
    _common(sc)
    sc.add_argument("--sub-theta", type=float)
    sc.add_argument("--sub-weight", type=float)
    sc.add_argument("--random-params", action="store_true")
    sc.add_argument("--sub-train-size", type=int)
    sc.add_argument("--tau", type=float, help="percent of negative nodes known to the attacker")
    rp = sub.add_parser("report", help="print a finished run's table and render figures")
    rp.add_argument("--out", required=True, help="output directory of a finished run")
    rp.add_argument("--overlap", nargs=2, metavar=("FLIPS_A", "FLIPS_B"),
                    help="also print how many modified pairs two flip files share")
    rp.add_argument("--no-figures", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values: dict[str, str] = {"methods": COMMAND_METHODS[args.command]}
    if args.config:
        values.update(read_config_file(args.config))
    flag_map = {
        "graph": "dataset", "labels": "labels", "seed": "seed", "out": "out", "threads": "threads",
        "cost": "cost", "K": "K", "target_method": "target_method", "methods": "methods",
        "axis": "sweep_axis", "values": "sweep_values", "sub_theta": "sub_theta",
        "sub_weight": "sub_weight", "sub_train_size": "sub_train_size", "tau": "tau",
    }
    for attr, key in flag_map.items():
        val = getattr(args, attr, None)
        if val is not None:
            values[key] = str(val)
    if getattr(args, "random_params", False):
        values["random_params"] = "true"
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = (x.strip() for x in item.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = val
    cfg = ExperimentConfig.from_mapping(values)
    if args.command == "sweep" and not cfg.sweep_axis:
        raise ConfigError("sweep needs an axis (--axis or sweep_axis in the config)")
    return cfg


def _print_table(rows: list[dict], out=None) -> None:
    out = out or sys.stdout
    out.write(",".join(REPORT_COLUMNS) + "\n")
    for r in rows:
        out.write(",".join(str(r[c]) for c in REPORT_COLUMNS) + "\n")


def cmd_report(args) -> int:
    out = Path(args.out)
    _print_table(read_report(out / "report.csv"))
    if not args.no_figures:
        from .plotting import render_report
        for path in render_report(out):
            print(f"figure: {path}", file=sys.stderr)
    if args.overlap:
        a = read_flips(args.overlap[0])
        b = read_flips(args.overlap[1])
        n = report_overlap(zip(a[0].tolist(), a[1].tolist()), zip(b[0].tolist(), b[1].tolist()))
        print(f"overlap,{n}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args)
        cfg = config_from_args(args)
        rows = run_experiment(cfg)
        _print_table([{k: format_value(v) for k, v in r.items()} for r in rows])
        print(f"outputs written to {cfg.out}", file=sys.stderr)
        return 0
    except (ConfigError, GraphError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
