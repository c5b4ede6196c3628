"""Command-line interface.

Subcommands:
    estimate    noise estimation only: lambda_state.json
    sample      estimation (isgd) + chain: samples.csv
    evaluate    full pipeline: predictive grids + metrics.json
    toy-demo    evaluate with the built-in toy regression defaults
    stable-fit  tail-index fit for draws in a CSV: alpha_fit.json
    fpe-check   stationarity residual verification: fpe.json

Every subcommand takes --config PATH, --seed INT (overrides the config),
and --out DIR. Exit codes: 0 success, 2 configuration error, 3 diverged
chain (partial outputs are still written).
"""

from __future__ import annotations

import argparse
import sys

from artifact.harness import (TOY_DEFAULTS, ConfigError, parse_config,
                              raw_pairs, run_experiment, run_fpe_check,
                              run_stable_fit)

__all__ = ["main"]

COMMANDS = ("estimate", "sample", "evaluate", "toy-demo", "stable-fit",
            "fpe-check")

_STAGES = {"estimate": "estimate", "sample": "sample", "evaluate": "full",
           "toy-demo": "full"}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="artifact",
        description="stochastic-gradient MCMC experiments with analytic checks")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "estimate": "run noise estimation and write lambda_state.json",
        "sample": "run estimation and sampling, write samples.csv",
        "evaluate": "run the full pipeline and write metrics",
        "toy-demo": "full pipeline on the built-in toy regression",
        "stable-fit": "fit a tail index to draws from stable.input",
        "fpe-check": "verify the stationary-density residual contracts",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory (default: config 'out')")
    return parser


def _load_config(args) -> tuple:
    """(config, out_dir) for the parsed CLI arguments."""
    text = ""
    if args.config is not None:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    elif args.command not in ("toy-demo", "fpe-check"):
        raise ConfigError("this command requires --config")

    seed_override = args.seed
    explicit = raw_pairs(text)
    if seed_override is None and "seed" not in explicit \
            and args.command in ("toy-demo", "fpe-check"):
        seed_override = 0
    config = parse_config(text, seed_override=seed_override)
    if args.command == "toy-demo":
        for key, value in TOY_DEFAULTS.items():
            if key not in explicit:
                config = config.with_value(key, value)
    out_dir = args.out if args.out is not None else config["out"]
    return config, out_dir


def _summarize(manifest: dict) -> None:
    files = ", ".join(sorted(manifest["files"]))
    print(f"{manifest['command']}: status={manifest['status']} files=[{files}]")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config, out_dir = _load_config(args)
        if args.command == "stable-fit":
            manifest = run_stable_fit(config, out_dir)
        elif args.command == "fpe-check":
            manifest = run_fpe_check(config, out_dir)
        else:
            manifest = run_experiment(config, out_dir, command=args.command,
                                      stages=_STAGES[args.command])
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _summarize(manifest)
    return 0 if manifest["status"] == "ok" else 3


if __name__ == "__main__":
    sys.exit(main())
