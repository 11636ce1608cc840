"""Command-line entry point: ``rydberg-reservoir <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from . import experiments
from .exceptions import ReservoirError
from .experiments import ExperimentConfig

# flag dest -> config key, per subcommand
_OVERRIDES = {
    "phase-diagram": {"v": "v", "delta_points": "pd_delta_points", "omega_points": "pd_omega_points"},
    "hysteresis": {"omega": "cut_omega", "delta_points": "cut_delta_points", "delta_min": "cut_delta_min", "delta_max": "cut_delta_max"},
    "relax-times": {"omega": "cut_omega", "delta_points": "cut_delta_points", "delta_min": "cut_delta_min", "delta_max": "cut_delta_max"},
    "predict-sweep": {"task": "task", "csv": "csv_path", "column": "csv_column", "noise": "noise",
                      "delta_min": "delta_min", "delta_max": "delta_max", "delta_points": "delta_points",
                      "n_seeds": "n_seeds"},
    "relax-fit": {"delta": "relax_delta", "omega": "omega"},
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--workers", type=int, help="parallel worker processes")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                        help="override any configuration key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rydberg-reservoir", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phase-diagram", parents=[common], help="stationary-state count map")
    p.add_argument("--v", type=float)
    p.add_argument("--delta-points", type=int)
    p.add_argument("--omega-points", type=int)

    for name, text in (("hysteresis", "up/down quasi-static detuning sweeps"),
                       ("relax-times", "relaxation time along a detuning cut")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--omega", type=float, help="Rabi frequency of the cut")
        p.add_argument("--delta-min", type=float)
        p.add_argument("--delta-max", type=float)
        p.add_argument("--delta-points", type=int)

    p = sub.add_parser("predict-sweep", parents=[common], help="prediction MSE versus detuning")
    p.add_argument("--task", choices=["lorenz", "csv"])
    p.add_argument("--csv", metavar="PATH", help="input CSV for --task csv")
    p.add_argument("--column", help="value column of the input CSV")
    p.add_argument("--noise", type=float, help="noise strength D")
    p.add_argument("--delta-min", type=float)
    p.add_argument("--delta-max", type=float)
    p.add_argument("--delta-points", type=int)
    p.add_argument("--n-seeds", type=int)

    p = sub.add_parser("relax-fit", parents=[common], help="exponential fits to a square-wave response")
    p.add_argument("--input", metavar="PATH", help="CSV with time/value columns (default: simulate)")
    p.add_argument("--time-column", default="time")
    p.add_argument("--value-column", default="value")
    p.add_argument("--delta", type=float)
    p.add_argument("--omega", type=float)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then the config file, then command-line flags."""
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    pairs = {}
    for item in args.set:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()
    for dest, key in _OVERRIDES[args.command].items():
        value = getattr(args, dest, None)
        if value is not None:
            pairs[key] = value
    for key in ("out", "seed", "workers"):
        value = getattr(args, key)
        if value is not None:
            pairs[key] = value
    return config.override(pairs)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
        if args.command == "phase-diagram":
            _, summary = experiments.cmd_phase_diagram(config)
            print(summary)
        elif args.command == "hysteresis":
            _, _, interval = experiments.cmd_hysteresis(config)
            print("hysteresis interval:", "none" if interval is None else f"[{interval[0]:.6g}, {interval[1]:.6g}]")
        elif args.command == "relax-times":
            _, window = experiments.cmd_relax_times(config)
            print("spinodals:", "none" if window is None else f"{window[0]:.9g}, {window[1]:.9g}")
        elif args.command == "predict-sweep":
            result = experiments.cmd_predict_sweep(config)
            for de, mean, std in zip(result.deltas, result.mean_mse(), result.std_mse()):
                print(f"delta={de:8.4f}  mean_mse={mean:.6e}  std_mse={std:.6e}")
            if result.errors:
                print(f"{len(result.errors)} sweep point(s) failed; see predict_sweep.csv", file=sys.stderr)
        elif args.command == "relax-fit":
            for r in experiments.cmd_relax_fit(config, args.input, args.time_column, args.value_column):
                print(f"segment {r.period} ({r.level}): tau={r.fit.tau:.6g} residual={r.fit.residual:.3g}"
                      + ("" if r.tau_linear is None else f" tau_linear={r.tau_linear:.6g}"))
    except (ReservoirError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
