"""Command-line front end.

Verbs:
    run <config.json>      full pipeline: locate, count, fit, report
    oracle <config.json>   1D transfer-matrix resonances of the derived profile
    compare <config.json>  cylinder pipeline vs the 1D oracle (separable only)
    probe <config.json>    discretization refinement report

Exit status is 0 only when the run completes and its verdict is PASS or
COMPLETE (run), the match is bijective (compare), or the probe/oracle
finished (probe, oracle).
"""

from __future__ import annotations

import argparse
import sys

from .errors import PoleProximity
from .experiment import (
    ConfigError,
    compare_separable,
    oracle_run,
    probe_run,
    run_experiment,
)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cylres",
        description="Resonance counting for potential scattering on cylinder ends.",
    )
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, desc in (
        ("run", "execute an experiment configuration"),
        ("oracle", "run the 1D transfer-matrix oracle"),
        ("compare", "compare the cylinder pipeline against the 1D oracle"),
        ("probe", "report determinant changes under grid/mode refinement"),
    ):
        q = sub.add_parser(verb, help=desc)
        q.add_argument("config", help="path to a JSON run configuration")
        q.add_argument("--output", default=None, help="output directory override")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            res = run_experiment(args.config, output=args.output)
            print(f"verdict: {res.verdict}")
            print(f"outputs in: {res.config.output}")
            return 0 if res.passed else 1
        if args.verb == "oracle":
            rlist = oracle_run(args.config, output=args.output)
            print(f"oracle zeros: {len(rlist.zeros)} (winding {rlist.total_winding})")
            return 0
        if args.verb == "compare":
            rep = compare_separable(args.config, output=args.output)
            print(f"bijective: {'yes' if rep.bijective else 'NO'}")
            print(f"max deviation: {rep.max_deviation:.3e}")
            return 0 if rep.bijective else 1
        if args.verb == "probe":
            probe = probe_run(args.config, output=args.output)
            print(f"node change: {probe.node_change:.3e}")
            print(f"mode change: {probe.mode_change:.3e}")
            return 0
    except ConfigError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return 2
    except PoleProximity as e:
        print(f"flagged evaluation: {e}", file=sys.stderr)
        return 3
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
