"""Command-line entry point: one subcommand per experiment scenario.

Exit codes: 0 on success, 1 when a protocol invariant fails mid-scenario,
2 for configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .core import ConfigurationError, ProtocolError
from .harness import SCENARIOS, VARIANTS, ExperimentConfig, run_scenario


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config file; flags override its values")
    parser.add_argument("--seed", dest="master_seed", help="master seed string")
    parser.add_argument("--trials", type=int)
    parser.add_argument("-n", dest="n", type=int, help="participant count")
    parser.add_argument("--gamma", type=float, help="slot-to-participant ratio")
    parser.add_argument("--m", type=int, help="explicit slot count (overrides gamma)")
    parser.add_argument("--variant", choices=VARIANTS)
    parser.add_argument("--output", dest="output_path", help="CSV output path")
    parser.add_argument("--l-srm", dest="l_srm", type=int)
    parser.add_argument("--l-msg", dest="l_msg", type=int)
    parser.add_argument("--lambda-bits", dest="lambda_bits", type=int)
    parser.add_argument("--beta", type=int)
    parser.add_argument("--max-rounds", dest="max_rounds", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qadr",
        description="Deterministic simulator and analytics for an anonymous "
        "XOR-aggregation data-reporting protocol",
    )
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        sp = sub.add_parser(name, help=f"run the {name} scenario")
        _add_common_flags(sp)
        if name in ("collision_sweep", "optimal_gamma"):
            sp.add_argument("--n-values", dest="n_values", type=_int_list)
            sp.add_argument("--gamma-values", dest="gamma_values", type=_float_list)
        if name == "cost_compare":
            sp.add_argument("--n-min", dest="n_min", type=int)
            sp.add_argument("--n-max", dest="n_max", type=int)
        if name == "coalition_attack":
            sp.add_argument("--honest-count", dest="honest_count", type=int)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = vars(build_parser().parse_args(argv))
    scenario = args.pop("scenario")
    config_path = args.pop("config", None)
    try:
        if config_path:
            config = ExperimentConfig.from_file(config_path)
            if config.scenario != scenario:
                config = config.with_overrides(scenario=scenario)
        else:
            config = ExperimentConfig(scenario=scenario)
        config = config.with_overrides(**args)
        result = run_scenario(config)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ProtocolError, AssertionError) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return 1
    print(result.summary)
    print(f"wrote {result.csv_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
