"""Command-line interface.

Verbs:
    validate    parse, validate, and construct a config without running
    run         single experiment run (metrics.csv, meta.json, chart.svg)
    montecarlo  Monte-Carlo saddle-avoidance study
    fig1        EXTRA (constant step) vs DGD (diminishing step) comparison
    bounds      print spectral quantities and step-size bounds, no run

Exit codes: 0 success, 1 config error, 2 runtime/divergence error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from ..errors import ConfigError, ExtraLabError
from .config import load_config
from .runner import (
    bounds_report,
    build_instance,
    reproduce_fig1,
    run_monte_carlo,
    run_single,
)


class _Parser(argparse.ArgumentParser):
    # usage errors are config errors (exit 1), not runtime errors
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="extra-lab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, desc in (
        ("validate", "validate a config file"),
        ("run", "run a single experiment"),
        ("montecarlo", "run the Monte-Carlo study"),
        ("fig1", "run the EXTRA vs DGD comparison"),
        ("bounds", "print spectral facts and step-size bounds"),
    ):
        p = sub.add_parser(verb, help=desc)
        p.add_argument("--config", required=True, help="path to the TOML config")
        if verb in ("run", "montecarlo", "fig1", "bounds"):
            p.add_argument("--out", default=None, help="output directory")
            p.add_argument("--overwrite", action="store_true", help="replace existing outputs")
        if verb in ("run", "montecarlo", "fig1"):
            p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if verb == "montecarlo":
            p.add_argument("--workers", type=int, default=1, help="parallel trial workers")
        if verb == "fig1":
            p.add_argument(
                "--bad-init",
                action="store_true",
                help="start near the saddle's stable direction",
            )
    return parser


def _apply_seed(cfg, seed):
    if seed is None:
        return cfg
    cfg = dataclasses.replace(cfg, seed=seed)
    if cfg.monte_carlo is not None:
        cfg = dataclasses.replace(
            cfg, monte_carlo=dataclasses.replace(cfg.monte_carlo, master_seed=seed)
        )
    return cfg


def _print_bounds(report: dict):
    for key in (
        "lambda1_P",
        "lambda_min_V",
        "L_F",
        "lipschitz_radius",
        "step_bound_thm1",
        "step_bound_thm2",
        "alpha_thm1_applied",
        "alpha_thm2_applied",
    ):
        print(f"{key:22s} = {report[key]:.12g}")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config)
        cfg = _apply_seed(cfg, getattr(args, "seed", None))
        out = getattr(args, "out", None) or cfg.output

        if args.verb == "validate":
            build_instance(cfg, with_targets=False)
            print(f"config ok: {args.config}")
        elif args.verb == "bounds":
            _print_bounds(bounds_report(cfg, out_dir=out, overwrite=args.overwrite))
            if out:
                print(f"outputs written to {out}")
        elif args.verb == "run":
            record = run_single(cfg, out_dir=out, overwrite=args.overwrite)
            final = record.final_sample
            print(
                f"run complete: {len(record.series)} iterations, "
                f"verdict {record.verdict.label}"
            )
            if final is not None:
                print(
                    f"final consensus_error={final.consensus_error:.6g} "
                    f"avg_grad_norm={final.avg_grad_norm:.6g}"
                )
            if record.metadata.get("lipschitz_ball_exceeded"):
                print(
                    "warning: iterates left the ball used for the Lipschitz "
                    "estimate; bounds may be optimistic",
                    file=sys.stderr,
                )
            if out:
                print(f"outputs written to {out}")
        elif args.verb == "montecarlo":
            summary = run_monte_carlo(
                cfg, workers=args.workers, out_dir=out, overwrite=args.overwrite
            )
            print(f"trials: {summary.trials}")
            for label, count in sorted(summary.verdict_counts.items()):
                print(f"  verdict {label}: {count}")
            print(f"saddle-trapped fraction: {summary.saddle_trapped}/{summary.trials}")
            print(
                "second-order-converged fraction: "
                f"{summary.second_order_converged}/{summary.trials}"
            )
            if out:
                print(f"outputs written to {out}")
        elif args.verb == "fig1":
            result = reproduce_fig1(
                cfg, out_dir=out, overwrite=args.overwrite, bad_init=args.bad_init
            )
            de = result.extra_record.series[-1].dist_to_targets
            dd = result.dgd_record.series[-1].dist_to_targets
            print(f"final distance to minimizer set: extra={de:.6g} dgd={dd:.6g}")
            if out:
                print(f"outputs written to {out}")
        return 0
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except ExtraLabError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
