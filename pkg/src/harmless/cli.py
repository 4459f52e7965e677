"""Command-line front end.

Exit codes: 0 success, 1 the analysis rejects the program (or the two
satisfiability checks disagree under ``--method both``), 2 parse or I/O
error, 3 unsatisfiable, 4 step limit reached.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from typing import List, Optional, Sequence

from .analysis import analyze
from .chase import DEFAULT_STEP_LIMIT, ChaseStatus, export_dot, run_chase
from .egd import check_satisfiability
from .reason import STEP_LIMIT, UNSATISFIABLE, NOT_CERTIFIED, UnsafeReasoningWarning, answer
from .syntax import ParseError, Program, load_program

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_INPUT = 2
EXIT_UNSAT = 3
EXIT_LIMIT = 4


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harmless", description="Warded rules with harmless EGDs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats):
        p.add_argument("program", help="program file (.dlge)")
        p.add_argument("--facts", metavar="DIR", help="directory of <predicate>.csv files")
        p.add_argument("--format", choices=formats, default=formats[0])

    strict_help = "carry taint through existential variables shared by head atoms"

    p = sub.add_parser("analyze", help="wardedness and safe-taintedness report")
    common(p, ["text", "json"])
    p.add_argument("--strict", action="store_true", help=strict_help)

    p = sub.add_parser("chase", help="run one chase variant and print the result")
    common(p, ["text", "json", "dot"])
    p.add_argument("--variant", choices=["standard", "warded", "relaxed"], default="relaxed")
    p.add_argument("--limit", type=_positive, default=DEFAULT_STEP_LIMIT)
    p.add_argument("--tgd-only", action="store_true", help="ignore EGDs")
    p.add_argument("--clusters", action="store_true", help="group DOT nodes by track")

    p = sub.add_parser("query", help="answer the queries in the program")
    common(p, ["text", "json", "csv"])
    p.add_argument("--limit", type=_positive, default=DEFAULT_STEP_LIMIT)
    p.add_argument("--tgd-only", action="store_true", help="ignore EGDs")
    p.add_argument("--batch-threshold", type=_positive)
    p.add_argument("--constants-only", action="store_true", help="drop tuples containing nulls")
    p.add_argument("--strict", action="store_true", help=strict_help)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--force-unsafe", action="store_true", help="run the pipeline on uncertified programs")
    g.add_argument("--fallback-standard", action="store_true", help="use a bounded standard chase when uncertified")

    p = sub.add_parser("check", help="decide satisfiability")
    common(p, ["text", "json"])
    p.add_argument("--method", choices=["encoding", "direct", "both"], default="encoding")
    p.add_argument("--limit", type=_positive, default=DEFAULT_STEP_LIMIT)
    p.add_argument("--batch-threshold", type=_positive)
    p.add_argument("--force-unsafe", action="store_true")
    p.add_argument("--strict", action="store_true", help=strict_help)
    return parser


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_analyze(args, program: Program) -> int:
    report = analyze(program, strict=args.strict)
    if args.format == "json":
        _emit(json.dumps(report.to_dict(program), indent=2, sort_keys=True))
    else:
        lines = [f"warded: {'yes' if report.wardedness.warded else 'no'}"]
        for rule, vs in report.wardedness.violations:
            lines.append(f"  {rule}: dangerous variables {', '.join(map(str, vs))} not in one atom")
        lines.append("affected: " + ", ".join(sorted(map(str, report.affected))))
        lines.append("tainted: " + ", ".join(sorted(map(str, report.tainted))))
        for pos, cause in sorted(report.taint_cause.items()):
            lines.append(f"  {pos} <- {', '.join(sorted(cause))}")
        lines.append(f"verdict: {report.safety.label}")
        lines.extend(f"  {w}" for w in report.safety.witnesses)
        _emit("\n".join(lines))
    return EXIT_OK if report.accepted else EXIT_REJECTED


def cmd_chase(args, program: Program) -> int:
    if args.tgd_only:
        program = program.without_egds()
    out = run_chase(program, variant=args.variant, limit=args.limit)
    if args.format == "dot":
        _emit(export_dot(out.graph, out.instance, clusters=args.clusters))
    elif args.format == "json":
        doc = {
            "variant": args.variant,
            "status": out.status.value,
            "facts": sorted(str(a) for a in out.instance),
            "assignments": {str(k): str(v) for k, v in out.egd_assignments.items()},
            "steps": out.steps,
            "suppressed": len(out.suppressed),
        }
        if out.violation is not None:
            doc["violation"] = str(out.violation)
        _emit(json.dumps(doc, indent=2, sort_keys=True))
    else:
        _emit("\n".join(f"{a}." for a in sorted(out.instance, key=str)))
    if out.status is ChaseStatus.FAILED:
        print(f"chase failed: {out.violation}", file=sys.stderr)
        return EXIT_UNSAT
    if out.status is ChaseStatus.STEP_LIMIT:
        print(f"step limit {args.limit} reached", file=sys.stderr)
        return EXIT_LIMIT
    return EXIT_OK


def cmd_query(args, program: Program) -> int:
    if not program.queries:
        print("no queries in program", file=sys.stderr)
        return EXIT_OK
    policy = "force" if args.force_unsafe else "standard" if args.fallback_standard else "refuse"
    results = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UnsafeReasoningWarning)
        for q in program.queries:
            results.append(
                answer(
                    program, q,
                    on_uncertified=policy,
                    tgd_only=args.tgd_only,
                    limit=args.limit,
                    batch_threshold=args.batch_threshold,
                    constants_only=args.constants_only,
                    strict=args.strict,
                )
            )
    if any(r.status == NOT_CERTIFIED for r in results):
        print(f"not certified: {results[0].notes[0]}", file=sys.stderr)
        print("use --force-unsafe or --fallback-standard to answer anyway", file=sys.stderr)
        return EXIT_REJECTED
    for r in results:
        for note in r.notes:
            print(note, file=sys.stderr)
    if args.format == "json":
        _emit(json.dumps({"results": [r.to_dict() for r in results]}, indent=2, sort_keys=True))
    elif args.format == "csv":
        _emit("\n".join(r.to_csv().rstrip("\n") for r in results))
    else:
        lines = []
        for r in results:
            if r.query.is_boolean:
                lines.append("true" if r.bcq_answer else "false" if r.bcq_answer is False else "unknown")
            elif r.tuples is None:
                lines.append("unsatisfiable")
            else:
                lines.append(f"{r.query.label}: {len(r.tuples)} answer(s)")
                lines.extend("  " + ", ".join(str(t) for t in tup) for tup in r.sorted_tuples())
        _emit("\n".join(lines))
    if any(r.status == STEP_LIMIT for r in results):
        return EXIT_LIMIT
    return EXIT_OK


def cmd_check(args, program: Program) -> int:
    report = analyze(program, strict=args.strict)
    if not report.accepted and not args.force_unsafe:
        print("not certified; use --force-unsafe to check anyway", file=sys.stderr)
        for w in report.safety.witnesses:
            print(f"  {w}", file=sys.stderr)
        return EXIT_REJECTED
    from .chase import relaxed_warded_chase

    base = relaxed_warded_chase(program, limit=args.limit)
    if base.status is ChaseStatus.STEP_LIMIT:
        print(f"step limit {args.limit} reached", file=sys.stderr)
        return EXIT_LIMIT
    res = check_satisfiability(program, method=args.method, chased=base)
    if args.format == "json":
        doc = {"satisfiable": res.satisfiable, "method": res.method, "witness": res.witness}
        if res.agree is not None:
            doc["agree"] = res.agree
        _emit(json.dumps(doc, indent=2, sort_keys=True))
    else:
        _emit("satisfiable" if res.satisfiable else f"unsatisfiable: {res.witness}")
    if res.agree is False:
        print("encoding and direct checks disagree", file=sys.stderr)
        return EXIT_REJECTED
    return EXIT_OK if res.satisfiable else EXIT_UNSAT


COMMANDS = {"analyze": cmd_analyze, "chase": cmd_chase, "query": cmd_query, "check": cmd_check}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        program = load_program(args.program, args.facts)
    except ParseError as exc:
        print(f"{args.program}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return COMMANDS[args.command](args, program)


if __name__ == "__main__":
    sys.exit(main())
