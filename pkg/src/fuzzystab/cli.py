"""Command-line entry point: ``fuzzystab <verb> --scenario FILE [options]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .pipeline import EXIT_CONFIG, VERBS, run
from .report import emit_report, summary_text
from .scenario import ScenarioError, parse_scenario

DEFAULT_OUT = "fuzzystab-out"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fuzzystab",
        description="Numerical fuzzy stability checks for approximate ring homomorphisms and derivations.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    helps = {
        "axioms": "check the fuzzy norm axioms and the algebra condition",
        "stabilize": "build the approximate map and run the stabilizer",
        "verify": "stabilize, then measure defects, the stability bound and uniqueness",
        "run": "every stage in order",
        "echo-config": "print the resolved scenario and exit",
    }
    for verb in (*VERBS, "echo-config"):
        p = sub.add_parser(verb, help=helps[verb])
        p.add_argument("--scenario", required=True, type=Path, help="scenario TOML file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one scenario field (repeatable)")
        p.add_argument("--seed", type=int, help="override both the grid seed and the noise seed")
        if verb != "echo-config":
            p.add_argument("--out", type=Path, help="report directory (default: outputs.dir or ./fuzzystab-out)")
            p.add_argument("--quiet", action="store_true", help="do not print the summary")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides += [f"grid.seed={args.seed}", f"perturbation.seed={args.seed}"]
    try:
        text = args.scenario.read_text()
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        scenario = parse_scenario(text, overrides)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.verb == "echo-config":
        sys.stdout.write(scenario.echo())
        return 0
    report = run(scenario, VERBS[args.verb])
    out = args.out or Path(scenario.resolved["outputs"]["dir"] or DEFAULT_OUT)
    emit_report(report, out)
    if not args.quiet:
        sys.stdout.write(summary_text(report))
        print(f"report written to {out}")
    return report.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
