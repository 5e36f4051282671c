"""Command-line entry point: ``risce run`` and ``risce certify``."""

from __future__ import annotations

import argparse
import sys

import yaml

from .harness import (
    ConfigError,
    certify_designs,
    emit_csv,
    emit_plot_data,
    load_config,
    preset_config,
    sweep,
)


def _grid(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated numbers, got {text!r}") from None


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="risce", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded Monte Carlo sweep")
    run.add_argument("--config", help="YAML scenario file")
    run.add_argument("--preset", choices=["scenario1", "scenario2"], help="preset to start from")
    run.add_argument("--sweep", help="K_dB, d_R, rho_dB, tau_2 or sigma_e")
    run.add_argument("--grid", type=_grid, help="comma-separated sweep values")
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--out", required=True, help="CSV output path")
    run.add_argument("--plot-data", help="optional JSON series output path")
    run.add_argument("--zero-noise", action="store_true")
    run.add_argument("--pure-los", action="store_true")
    run.add_argument("--blocked-direct", action="store_true")
    run.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")

    cert = sub.add_parser("certify", help="rank training designs by error variance")
    cert.add_argument("--n", type=int, required=True, help="number of active RIS elements N'")
    cert.add_argument("--m", type=int, required=True, help="BS antennas")
    cert.add_argument("--random-designs", type=int, default=1000)
    cert.add_argument("--seed", type=int, default=0)
    cert.add_argument("--out", required=True)
    return p


def _resolve(args):
    if args.config:
        config = load_config(args.config, preset=args.preset)
    elif args.preset:
        config = preset_config(args.preset)
    else:
        raise ConfigError("run needs --config or --preset")
    over: dict = {}
    mc = {k: v for k, v in (("trials", args.trials), ("seed", args.seed), ("workers", args.workers))
          if v is not None}
    if mc:
        over["monte_carlo"] = mc
    if args.zero_noise:
        over["estimation"] = {"zero_noise": True}
    if args.pure_los:
        over["large_scale"] = {"K_dB": None}
    if args.blocked_direct:
        over["evaluation"] = {"blocked_direct": True}
    sw = {}
    if args.sweep:
        sw["variable"] = args.sweep
    if args.grid is not None:
        sw["grid"] = args.grid
    if sw:
        over["sweep"] = sw
    return config.with_overrides(over) if over else config


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            config = _resolve(args)
            if args.dump_config:
                sys.stdout.write(yaml.safe_dump(config.to_dict(), sort_keys=True))
                return 0
            rows = sweep(config)
            emit_csv(rows, args.out)
            if args.plot_data:
                emit_plot_data(rows, args.plot_data)
        else:
            rows = certify_designs(args.n, args.m, args.random_designs, args.seed)
            emit_csv(rows, args.out)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"risce: error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
