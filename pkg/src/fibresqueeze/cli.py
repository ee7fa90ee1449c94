"""Command-line front end: ``fibresqueeze run|list|describe``."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import List, Optional

from . import scenarios
from .errors import SimulationError, UndefinedError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _registry(config_dir: Optional[str]):
    registry = scenarios.builtin_scenarios()
    if config_dir:
        for path in sorted(Path(config_dir).glob("*.y*ml")):
            for s in scenarios.load_scenario_file(path, scenarios.builtin_scenarios()):
                if s.name in registry:
                    raise scenarios.ConfigError(
                        f"scenario name {s.name!r} collides with an existing scenario",
                        s.lines.get(("name",)), str(path))
                registry[s.name] = s
    return registry


def _resolve(target: str, registry) -> List[scenarios.Scenario]:
    if target in registry:
        return [registry[target]]
    path = Path(target)
    if not path.is_file():
        raise scenarios.ConfigError(f"no scenario or config file named {target!r}", None, target)
    return scenarios.load_scenario_file(path, registry)


def _override(s: scenarios.Scenario, seed, grid_samples) -> scenarios.Scenario:
    params = {k: dict(v) for k, v in s.params.items()}
    if grid_samples is not None:
        params["grid"]["n_samples"] = grid_samples
    new = dataclasses.replace(s, params=params, seed=s.seed if seed is None else seed)
    scenarios.build_objects(new)
    return new


def _cmd_run(args) -> int:
    registry = _registry(args.config_dir)
    todo = [_override(s, args.seed, args.grid_samples) for s in _resolve(args.config, registry)]
    out = Path(args.out)
    for s in todo:
        files = scenarios.run_scenario(s, out)
        for path in files.values():
            print(path)
    return EXIT_OK


def _cmd_list(args) -> int:
    for name, description in sorted((n, s.description) for n, s in _registry(args.config_dir).items()):
        print(f"{name}\t{description}")
    return EXIT_OK


def _cmd_describe(args) -> int:
    registry = _registry(args.config_dir)
    if args.scenario not in registry:
        raise scenarios.ConfigError(f"unknown scenario {args.scenario!r}", None, "<command line>")
    sys.stdout.write(scenarios.manifest_text(registry[args.scenario]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fibresqueeze",
                                     description="Fibre soliton squeezing experiments.")
    parser.add_argument("--config-dir", help="directory of extra scenario YAML files")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a built-in scenario or a YAML config")
    run.add_argument("config", help="scenario name or path to a YAML config")
    run.add_argument("--out", default="results", help="output directory (default: results)")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--grid-samples", type=int, help="override the number of grid samples")
    run.set_defaults(func=_cmd_run)

    lst = sub.add_parser("list", help="list available scenarios")
    lst.set_defaults(func=_cmd_list)

    desc = sub.add_parser("describe", help="print a scenario's resolved parameters")
    desc.add_argument("scenario")
    desc.set_defaults(func=_cmd_describe)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except scenarios.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, UndefinedError) as exc:
        print(f"simulation error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
