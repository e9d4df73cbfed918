"""Command-line front end.

Exit codes: 0 when expectations were met (or nothing was checked), 1 on an
expectation/selftest mismatch, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .policies import PolicySet
from .scenario import ScenarioError, load_scenario, run_matrix, run_scenario
from .trace import emit_trace
from .vectors import run_selftest

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_CONFIG = 2


def _parse_policies(spec: str) -> PolicySet:
    names = [part.strip() for part in spec.split(",") if part.strip()]
    return PolicySet.from_dict({name: True for name in names}, "--policies")


def _cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        result = run_scenario(scenario, seed_override=args.seed)
    except ScenarioError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    if args.trace:
        emit_trace(result.trace, args.trace)

    outcome = result.outcome.to_dict()
    print(f"scenario: {scenario.name}")
    print(f"outcome:  {json.dumps(outcome, sort_keys=True)}")
    print(f"trace:    {len(result.trace)} events (digest {result.trace_digest()[:16]})")
    if result.expectations_ok:
        print(f"expectations: ok ({len(scenario.expectations)} checked)")
        return EXIT_OK
    for failure in result.expectation_failures:
        print(f"expectation mismatch: {failure}")
    return EXIT_MISMATCH


def _cmd_matrix(args) -> int:
    directory = Path(args.directory)
    paths = sorted(directory.glob("*.json"))
    if not paths:
        print(f"config error: no scenario files in {directory}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        scenarios = [load_scenario(p) for p in paths]
        override = _parse_policies(args.policies) if args.policies else None
    except (ScenarioError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    report = run_matrix(scenarios, policy_override=override)
    print(report.render_text(), end="")
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_json_dict(), indent=2) + "\n")
        print(f"report written to {args.report}")
    if report.errors:
        for err in report.errors:
            print(f"scenario error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if override is not None:
        # Bundled expectations describe each scenario's own policy config;
        # they are not checked when the flags are forced from the outside.
        return EXIT_OK
    return EXIT_OK if report.all_expected else EXIT_MISMATCH


def _cmd_kdf_selftest(_args) -> int:
    checks = run_selftest()
    failed = 0
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        detail = f"  ({check.detail})" if check.detail else ""
        print(f"{status}  {check.name}{detail}")
        failed += 0 if check.passed else 1
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctkdsim",
        description="Deterministic BT/BLE cross-transport pairing simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario file")
    run_p.add_argument("scenario", help="scenario JSON file")
    run_p.add_argument("--trace", help="write the JSONL event trace here")
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run_p.set_defaults(func=_cmd_run)

    matrix_p = sub.add_parser("matrix", help="run every scenario in a directory")
    matrix_p.add_argument("directory", help="directory of scenario JSON files")
    matrix_p.add_argument(
        "--policies",
        help="force these defenses on every device (comma list: sig51,c1,c2,c3,c4)",
    )
    matrix_p.add_argument("--report", help="write a JSON report here")
    matrix_p.set_defaults(func=_cmd_matrix)

    selftest_p = sub.add_parser("kdf-selftest", help="run key-derivation vector checks")
    selftest_p.set_defaults(func=_cmd_kdf_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
