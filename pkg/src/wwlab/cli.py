"""Command-line front end: ``wwlab run <config> [--assert] [--out DIR]`` and ``wwlab list``."""
from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

from . import io
from .experiments import ConfigError, EXPERIMENTS, catalog, config_echo, load_config, run_experiment

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ASSERT = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wwlab", description="Numerical experiments for water-wave operators.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment named in a config file")
    run.add_argument("config", help="path to an INI experiment config")
    run.add_argument("--assert", dest="check", action="store_true",
                     help="exit with status 3 if any acceptance check fails")
    run.add_argument("--out", default=None, help="output directory (default: out/<experiment>)")
    sub.add_parser("list", help="list the available experiments")
    return p


def write_outputs(out: Path, cfg, result) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "experiment": result.name,
        "passed": result.passed,
        "measured": result.measured,
        "checks": [c.as_dict() for c in result.checks],
    }
    io.write_json(out / "summary.json", summary)
    io.write_experiment_csv(out / f"{result.name}.csv", result.rows)
    io.write_json(out / "config_echo.json", config_echo(cfg))
    if result.trajectory is not None:
        io.write_trajectory_csv(out / "trajectory.csv", result.trajectory)
    return summary


def _diagnostic(result) -> str:
    lines = [f"experiment {result.name}: acceptance checks failed"]
    for c in result.checks:
        flag = "ok  " if c.passed else "FAIL"
        lines.append(f"{flag} {c.name}: {c.value!r} (needs {c.relation} {c.threshold!r})")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.command == "list":
        print(catalog())
        return EXIT_OK
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"wwlab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out) if args.out else Path("out") / cfg.experiment
    try:
        result = run_experiment(cfg)
    except ConfigError as exc:
        print(f"wwlab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # numerical failure: report it and leave a diagnostic behind
        out.mkdir(parents=True, exist_ok=True)
        (out / "diagnostic.txt").write_text(f"{type(exc).__name__}: {exc}\n\n{traceback.format_exc()}")
        print(f"wwlab: {cfg.experiment} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ASSERT if args.check else 1
    write_outputs(out, cfg, result)
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {result.name}: {c.name} = {c.value:.6g} ({c.relation} {c.threshold:g})")
    if args.check and not result.passed:
        (out / "diagnostic.txt").write_text(_diagnostic(result))
        return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["main", "EXPERIMENTS"]
