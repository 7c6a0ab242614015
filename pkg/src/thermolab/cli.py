"""Command line entry point: ``thermolab <command> [--config PATH] ...``.

Exit codes: 0 success, 1 assertion or estimator failure, 2 config error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .config import SCHEMA, ConfigError, ExperimentConfig
from .experiments import EstimatorError, combine, execute, plan

# subcommand -> (estimator, config section whose keys become flags)
COMMANDS = {
    "entropy": ("entropy", "pressure"),
    "pressure": ("pressure", "pressure"),
    "uentropy": ("uentropy", "uentropy"),
    "lyapunov": ("lyapunov", "lyapunov"),
    "decompose": ("decompose", "decompose"),
    "spec": ("spec", "spec"),
    "gapcheck": ("gapcheck", "uentropy"),
    "equilibrium": ("equilibrium", "equilibrium"),
    "bset": ("bset", "bset"),
}


def _common(p):
    p.add_argument("--config", help="config file, or the name of a bundled config")
    p.add_argument("--seed", type=int, help="seed (overrides [run] seed)")
    p.add_argument("--workers", type=int, help="worker processes (overrides [run] workers)")
    p.add_argument("--out", help="output directory (overrides [run] out)")


def build_parser():
    parser = argparse.ArgumentParser(prog="thermolab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, section) in COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {name} estimator")
        _common(p)
        for key in SCHEMA[section]:
            p.add_argument(f"--{key.replace('_', '-')}", dest=f"set:{section}:{key}",
                           metavar="VALUE", help=f"override [{section}] {key}")
    p = sub.add_parser("run", help="run the estimators listed in the config")
    _common(p)
    p = sub.add_parser("verify", help="run the closed-form oracle suite")
    _common(p)
    p.add_argument("--tamper", action="append", default=[], metavar="NAME=VALUE",
                   help="replace a fixture's expected value (negative control)")
    p.add_argument("--only", metavar="NAMES", help="comma-separated subset of fixtures")
    return parser


def load_config(args):
    if args.config is None:
        cfg = ExperimentConfig()
    elif os.path.isfile(args.config):
        cfg = ExperimentConfig.load(args.config)
    else:
        cfg = ExperimentConfig.bundled(args.config)
    for key in ("seed", "workers", "out"):
        val = getattr(args, key, None)
        if val is not None:
            cfg.set("run", key, val)
    for dest, val in vars(args).items():
        if dest.startswith("set:") and val is not None:
            _, section, key = dest.split(":")
            cfg.set(section, key, val)
    return cfg


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _map_tasks(fn, args_list, workers):
    """Results in submission order; exceptions are returned, not raised."""
    out = []
    if workers > 1 and len(args_list) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(fn, *a) for a in args_list]
            for fut in futures:
                try:
                    out.append(fut.result())
                except Exception as exc:  # reported per task
                    out.append(exc)
    else:
        for a in args_list:
            try:
                out.append(fn(*a))
            except Exception as exc:
                out.append(exc)
    return out


def run_experiment(cfg, stream=None):
    stream = sys.stdout if stream is None else stream
    out_dir = cfg.get("run", "out")
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.cfg"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_text())
    tasks = plan(cfg)
    results = _map_tasks(execute, [(cfg, n, p) for n, p in tasks], cfg.get("run", "workers"))
    grouped = {}
    for (name, _), res in zip(tasks, results):
        grouped.setdefault(name, []).append(res)
    lines, failed = [], False
    for name, parts in grouped.items():
        errors = [p for p in parts if isinstance(p, Exception)]
        if errors:
            failed = True
            print(f"error: {name}: {errors[0]}", file=sys.stderr)
            continue
        output = combine(name, parts)
        write_csv(os.path.join(out_dir, f"{name}.csv"), output.header, output.rows)
        if cfg.get("run", "figures"):
            from .plots import render
            render(name, output.plot, out_dir)
        for check in output.checks:
            lines.append(check.line())
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("".join(line + "\n" for line in lines))
    for line in lines:
        print(line, file=stream)
    return 1 if failed else 0


def run_verify(cfg, tamper, only=None, stream=None):
    stream = sys.stdout if stream is None else stream
    from .oracles import FIXTURES, NAMES, run_fixture
    overrides = {}
    for item in tamper:
        name, sep, value = item.partition("=")
        if not sep or name not in NAMES:
            raise ConfigError(f"--tamper expects NAME=VALUE with NAME one of the fixtures: {item!r}")
        try:
            overrides[name] = float(value)
        except ValueError as exc:
            raise ConfigError(f"--tamper value must be a number: {item!r}") from exc
    chosen = list(FIXTURES)
    if only:
        names = [v.strip() for v in only.split(",") if v.strip()]
        unknown = [n for n in names if n not in NAMES]
        if unknown:
            raise ConfigError(f"unknown fixtures: {', '.join(unknown)}")
        chosen = [f for f in FIXTURES if f.name in names]
    seed = cfg.get("run", "seed")
    args = [(FIXTURES.index(f), seed, overrides.get(f.name)) for f in chosen]
    results = _map_tasks(run_fixture, args, cfg.get("run", "workers"))
    rows, bad = [], 0
    for fx, res in zip(chosen, results):
        if isinstance(res, Exception):
            print(f"{fx.name}: raised {res!r}", file=sys.stderr)
            res = {"fixture": fx.name, "expected": overrides.get(fx.name, fx.expected),
                   "actual": float("nan"), "tolerance": fx.tolerance, "status": "ERROR"}
        rows.append((res["fixture"], repr(float(res["expected"])), repr(float(res["actual"])),
                     repr(float(res["tolerance"])), res["status"]))
        if res["status"] != "PASS":
            bad += 1
            print(f"FAIL {res['fixture']}: expected {res['expected']!r} "
                  f"+- {res['tolerance']!r}, actual {res['actual']!r}", file=stream)
    out_dir = cfg.get("run", "out")
    os.makedirs(out_dir, exist_ok=True)
    write_csv(os.path.join(out_dir, "verify.csv"),
              ("fixture", "expected", "actual", "tolerance", "status"), rows)
    print(f"{len(rows) - bad}/{len(rows)} fixtures passed", file=stream)
    return 1 if bad else 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "verify":
            return run_verify(cfg, args.tamper, args.only)
        if args.command != "run":
            cfg.set("run", "estimators", COMMANDS[args.command][0])
        return run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except EstimatorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
