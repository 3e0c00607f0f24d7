"""Command line interface.

Exit codes: 0 success, 1 a validation check failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .channel import dump_channels
from .optimizer import OptimizerOptions, optimize_maxmin, write_trace
from .rng import U64_MAX, stream
from .scenario import Scenario, ScenarioError, derive_link_budget, load_config
from .schemes import SCHEME_IDS

EXIT_OK, EXIT_FAILED, EXIT_BAD_INPUT = 0, 1, 2


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty value list")
    return values


def _emit_list(text: str) -> list[str]:
    formats = [v.strip() for v in text.split(",") if v.strip()]
    bad = set(formats) - {"csv", "json", "plot"}
    if bad or not formats:
        raise argparse.ArgumentTypeError(f"--emit takes csv,json,plot; got {text!r}")
    return formats


def _load(config) -> tuple[Scenario, OptimizerOptions]:
    if config is None:
        scenario, opt_section = Scenario().validate(), {}
    else:
        scenario, opt_section = load_config(config)
    try:
        opts = OptimizerOptions.from_dict(opt_section)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad optimizer section: {exc}") from exc
    return scenario, opts


def cmd_run(args) -> int:
    scenario, opts = _load(args.config)
    scenario = harness.resolve_slots(scenario).validate()
    seed = scenario.seed if args.seed is None else args.seed
    record = harness.monte_carlo(scenario, args.scheme, args.drops, seed, opts)
    out = Path(args.out)
    harness.emit_outputs([record], out.parent if str(out.parent) else ".", out.stem, args.emit)
    budget = derive_link_budget(scenario)
    if args.dump_channels:
        drops = []
        for i in range(args.drops):
            users, channels = harness.draw_drop(scenario, budget, seed, i)
            drops.append((i, users, channels))
        dump_channels(args.dump_channels, drops)
    if args.trace:
        _, channels = harness.draw_drop(scenario, budget, seed, 0)
        rows = []
        optimize_maxmin(channels, scenario.n_slots, None, budget, opts,
                        stream(seed, 0, "scheme:sharing"), trace=rows)
        write_trace(args.trace, rows)
    print(f"{record.scheme_id}: mean min rate {record.mean_min_rate:.6g} "
          f"+/- {record.std_error:.3g} bit/s/Hz over {record.n_drops} drops (seed {seed})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario, opts = _load(args.config)
    seed = scenario.seed if args.seed is None else args.seed
    fn = harness.sweep_elements if args.axis == "elements" else harness.sweep_mnos
    records = fn(scenario, args.values, n_drops=args.drops, seed=seed, opts=opts,
                 schemes=args.schemes)
    paths = harness.emit_outputs(records, args.out, f"sweep_{args.axis}", args.emit)
    for r in records:
        print(f"{r.axis_name}={r.axis_value:<5d} {r.scheme_id:<21s} "
              f"{r.mean_min_rate:9.4f} +/- {r.std_error:.4f}")
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_check(args) -> int:
    if args.which == "grad":
        report = harness.check_gradient(args.seed, perturb=args.perturb)
        print(f"gradient check (M={report['M']}, K={report['K']}, N={report['N']}, "
              f"{report['instances']} instances): max relative error "
              f"{report['max_rel_error']:.3e} (tol {report['tolerance']:g})")
    else:
        report = harness.check_oracle(args.seed, max_iters=args.max_iters)
        print(f"oracle check (M={report['M']}, K={report['K']}, N={report['N']}, "
              f"Q={report['Q']}): {report['passed_instances']}/{report['instances']} "
              f"instances within {harness.ORACLE_RATIO:g} of brute force, "
              f"worst ratio {report['worst_ratio']:.4f}")
    if args.json:
        print(json.dumps(report, indent=2))
    print("PASS" if report["passed"] else "FAIL")
    return EXIT_OK if report["passed"] else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irsshare", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Monte Carlo evaluation of one scheme")
    p.add_argument("--config", type=Path)
    p.add_argument("--scheme", required=True, choices=SCHEME_IDS)
    p.add_argument("--drops", type=_positive, default=100)
    p.add_argument("--seed", type=_u64)
    p.add_argument("--out", required=True, help="output file; .json/.svg siblings share its stem")
    p.add_argument("--emit", type=_emit_list, default=["csv", "json"])
    p.add_argument("--dump-channels", metavar="PATH", help="write per-drop channels as JSON lines")
    p.add_argument("--trace", metavar="PATH", help="write the drop-0 sharing optimizer trace as CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep element count or operator count over all schemes")
    p.add_argument("--axis", required=True, choices=harness.AXES)
    p.add_argument("--values", required=True, type=_int_list)
    p.add_argument("--config", type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--drops", type=_positive, default=100)
    p.add_argument("--seed", type=_u64)
    p.add_argument("--schemes", type=lambda t: t.split(","), default=None)
    p.add_argument("--emit", type=_emit_list, default=["csv", "json"])
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="run a self-check")
    p.add_argument("which", choices=("grad", "oracle"))
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--json", action="store_true", help="also print the full report")
    p.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)
    p.add_argument("--max-iters", type=_positive, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
