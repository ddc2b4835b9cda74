"""Command line entry point: ``esd-lab <experiment>`` and ``esd-lab recompile``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import EXPERIMENTS, ConfigError, load_config, run_experiment
from .recompile import GATE_SETS, Template, alternating_placements, default_template, recompile


def _experiment_parser(sub, name: str) -> None:
    p = sub.add_parser(name, help=f"run the {name} experiment")
    p.add_argument("--config", help="YAML or JSON file with experiment keys")
    p.add_argument("--seed", type=int, default=None, help="master seed (default: config 'seed' or 0)")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--workers", type=int, default=1, help="worker processes for independent cells")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esd-lab", description="Error suppression by derangement experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        _experiment_parser(sub, name)
    r = sub.add_parser("recompile", help="recompile the controlled-SWAP into a native gate set")
    r.add_argument("--gateset", required=True, choices=sorted(GATE_SETS))
    r.add_argument("--type", dest="eq_type", required=True, choices=["A", "B", "C"])
    r.add_argument("--entangling", type=int, default=None,
                   help="entangler count (single-kind gate sets only; default: reference count)")
    r.add_argument("--restarts", type=int, default=50)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default=None, help="write the JSON report here as well")
    return parser


def _run_recompile(args) -> int:
    gs = GATE_SETS[args.gateset]
    template = default_template(args.gateset, args.eq_type)
    if args.entangling is not None and args.entangling != template.entangling_count:
        if len(gs.entangling) != 1:
            raise ConfigError(f"{args.gateset} mixes entangler kinds; --entangling is not supported")
        if args.entangling < 1:
            raise ConfigError("--entangling must be positive")
        template = Template(args.gateset, alternating_placements(gs, (args.entangling,)), gs.single)
    if args.restarts < 1:
        raise ConfigError("--restarts must be positive")
    report = recompile(args.gateset, args.eq_type, template=template, restarts=args.restarts, seed=args.seed)
    text = report.to_json()
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def _run_experiment(args) -> int:
    config = load_config(args.config) if args.config else {}
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    if args.workers < 1:
        raise ConfigError("--workers must be positive")
    table = run_experiment(args.command, config, seed=seed, workers=args.workers)
    csv_path, json_path = table.write(args.out)
    print(f"{args.command}: {len(table.rows)} rows -> {csv_path}, {json_path} "
          f"({table.metadata['wall_time_s']:.1f} s)")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "recompile":
            return _run_recompile(args)
        return _run_experiment(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"esd-lab: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # yaml parse errors and similar bad input
        if type(exc).__module__.startswith("yaml"):
            print(f"esd-lab: error: invalid config: {exc}", file=sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
