"""Command-line entry point: ``fatbots {run,validate,audit,render,stats,gen}``.

Exit codes
    0   success (run: PatternFormed; validate: no violations; audit: clean)
    1   validate found violations, or run was given an invalid scenario
    2   run ended Infeasible (pattern larger than the swarm)
    3   run hit the round limit
    4   collision (run aborted on one, or audit found one)
    5   run stopped on an internal error
    64  usage error: bad flags, unreadable or missing paths
    65  malformed JSON input (scenario or trace)
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .pattern import PatternError, TargetPattern
from .render import render_trace
from .scenarios import KINDS, ScenarioFormatError, generate, parse_scenario, scenario_to_json
from .sim import Scenario, SimConfig, Status, collision_audit, read_trace, run, validate_scenario
from .stats import sweep, write_csv
from .visibility import InvalidConfiguration

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 64
EXIT_DATA = 65

STATUS_EXIT = {
    Status.PATTERN_FORMED: 0,
    Status.INFEASIBLE: 2,
    Status.ROUND_LIMIT: 3,
    Status.COLLISION: 4,
    Status.INTERNAL_ERROR: 5,
    Status.PHASE_COMPLETE: 0,
}

log = logging.getLogger("fatbots")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from e


def _load_json(path: str):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: malformed JSON: {e}") from e


def _load_scenario_doc(path: str):
    obj = _load_json(path)
    if not isinstance(obj, dict):
        raise DataError(f"{path}: scenario must be a JSON object")
    try:
        return parse_scenario(obj)
    except ScenarioFormatError as e:
        raise DataError(f"{path}: {e}") from e


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("robot counts must be positive")
    return vals


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def cmd_run(args) -> int:
    pos, pattern, seed, frames, config = _load_scenario_doc(args.scenario)
    if args.seed is not None:
        seed = args.seed
    problems = validate_scenario(pos, pattern, config)
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return EXIT_INVALID
    scenario = Scenario(pos, TargetPattern.from_list(pattern), seed, frames)
    config.record_memory = args.memory
    trace, outcome = run(scenario, config)
    if args.trace:
        try:
            trace.write(args.trace)
        except OSError as e:
            raise UsageError(f"cannot write {args.trace}: {e.strerror}") from e
    print(json.dumps(outcome.to_json()))
    return STATUS_EXIT[outcome.status]


def cmd_validate(args) -> int:
    obj = _load_json(args.scenario)
    try:
        pos, pattern, _, _, config = parse_scenario(obj) if isinstance(obj, dict) else (None,) * 5
    except ScenarioFormatError as e:
        print(str(e))
        return EXIT_INVALID
    if pos is None:
        print("scenario must be a JSON object")
        return EXIT_INVALID
    problems = validate_scenario(pos, pattern, config)
    for p in problems:
        print(p)
    return EXIT_INVALID if problems else EXIT_OK


def cmd_audit(args) -> int:
    _read_text(args.trace)  # surface missing files as usage errors
    try:
        trace = read_trace(args.trace)
        report = collision_audit(trace)
    except ValueError as e:
        raise DataError(f"{args.trace}: {e}") from e
    where = "none" if report.offending_round is None else str(report.offending_round)
    print(f"min_distance={report.min_distance:.12g} offending_round={where}")
    return EXIT_OK if report.ok else STATUS_EXIT[Status.COLLISION]


def cmd_render(args) -> int:
    _read_text(args.trace)
    try:
        trace = read_trace(args.trace)
    except ValueError as e:
        raise DataError(f"{args.trace}: {e}") from e
    try:
        written = render_trace(trace, args.out, args.every)
    except OSError as e:
        raise UsageError(f"cannot write to {args.out}: {e.strerror}") from e
    print(f"wrote {len(written)} frames to {args.out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    rows = sweep(args.n, args.trials, args.seed, args.k, args.workers)
    try:
        write_csv(rows, args.csv)
    except OSError as e:
        raise UsageError(f"cannot write {args.csv}: {e.strerror}") from e
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        scenario = generate(args.kind, args.n, args.seed, args.k)
    except PatternError as e:
        raise UsageError(str(e)) from e
    text = json.dumps(scenario_to_json(scenario, SimConfig()), indent=1) + "\n"
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as e:
            raise UsageError(f"cannot write {args.out}: {e.strerror}") from e
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fatbots", description="Fat-robot pattern formation simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="simulate a scenario file")
    r.add_argument("scenario", help="scenario JSON path, or - for stdin")
    r.add_argument("--trace", help="write the JSONL trace here")
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.add_argument("--memory", action="store_true", help="record every robot's memory in the trace")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)

    a = sub.add_parser("audit", help="recompute the collision audit of a trace")
    a.add_argument("trace")
    a.set_defaults(func=cmd_audit)

    d = sub.add_parser("render", help="write SVG frames of a trace")
    d.add_argument("trace")
    d.add_argument("--out", required=True, help="output directory")
    d.add_argument("--every", type=_positive, default=1, help="keep every K-th round")
    d.set_defaults(func=cmd_render)

    s = sub.add_parser("stats", help="sweep random scenarios and write per-phase round counts")
    s.add_argument("--n", type=_int_list, required=True, help="comma-separated robot counts")
    s.add_argument("--trials", type=_positive, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--k", type=_positive, help="pattern size (default: n)")
    s.add_argument("--csv", required=True)
    s.add_argument("--workers", type=_positive, default=1)
    s.set_defaults(func=cmd_stats)

    g = sub.add_parser("gen", help="emit a generated scenario file")
    g.add_argument("--n", type=_positive, required=True)
    g.add_argument("--kind", choices=KINDS, default="random")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--k", type=_positive, help="pattern size (default: n)")
    g.add_argument("--out", help="write here instead of stdout")
    g.set_defaults(func=cmd_gen)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"fatbots: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"fatbots: {e}", file=sys.stderr)
        return EXIT_DATA
    except InvalidConfiguration as e:
        print(f"fatbots: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
