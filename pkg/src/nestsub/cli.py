"""Command-line front end.

Exit codes: 0 every query is a subtype, 1 some query is refuted, 2 some
query is inconclusive, 3 the input is malformed or an eqtype is invalid.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import bpa
from .rename import RenamedProgram, internal_rename
from .subtype import NO, UNKNOWN, YES, Checker, InvalidSeed, Verdict, format_trace, validate_eqtypes
from .syntax import NestsubError, Program, format_type, parse_program
from .variance import CO, ValidityError, check_signature_valid, check_type_valid, format_definition_header

EXIT_OK, EXIT_REFUTED, EXIT_UNKNOWN, EXIT_ERROR = 0, 1, 2, 3


class PipelineError(NestsubError):
    def __init__(self, messages: list[str]):
        super().__init__("\n".join(messages))
        self.messages = messages


@dataclass
class Loaded:
    program: Program
    renamed: RenamedProgram


def load(text: str, depth: int | None = None) -> Loaded:
    """Parse, validate, rename and validate eqtypes; raise PipelineError on failure."""
    program = parse_program(text)
    renamed = internal_rename(program)
    errors = check_signature_valid(renamed.original) or check_signature_valid(renamed.sig)
    for decl in program.decls:
        for t in decl.types:
            try:
                check_type_valid(decl.vars, (), t, CO, renamed.original, (f"decl {decl.name}",))
            except ValidityError as e:
                errors.append(e)
    if errors:
        raise PipelineError([str(e) for e in errors])
    try:
        validate_eqtypes(renamed.sig, renamed.seeds, depth=depth)
    except InvalidSeed as e:
        raise PipelineError([f"invalid eqtype {c.origin}: {v.kind}" for c, v in e.failures])
    return Loaded(program, renamed)


@dataclass
class RunReport:
    file: str
    records: list[dict] = field(default_factory=list)
    exit_code: int = EXIT_OK

    def summary(self) -> dict[str, int]:
        counts = {YES: 0, NO: 0, UNKNOWN: 0}
        for r in self.records:
            if r["kind"] == "check":
                counts[r["verdict"]] += 1
        return counts

    def to_json(self) -> str:
        doc = {"file": self.file, "records": self.records,
               "summary": self.summary(), "exit_code": self.exit_code}
        return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False)


def _record(kind: str, goal: str, verdict: Verdict, trace: bool) -> dict:
    rec = {"kind": kind, "goal": goal, "verdict": verdict.kind,
           "depth_used": verdict.depth_used, "seeds_used": list(verdict.seeds_used)}
    if verdict.kind != YES:
        rec["reason"] = getattr(verdict, "reason", "")
    if trace:
        rec["trace"] = verdict.trace.to_dict()
    return rec


def run_check(text: str, file: str = "<input>", depth: int | None = None,
              trace: bool = False) -> RunReport:
    loaded = load(text, depth)
    r = loaded.renamed
    report = RunReport(file)
    checker = Checker(r.sig, r.seeds, depth=depth)
    for e in r.eqtypes:
        for cl in e.closures:
            v = checker.check(cl.lhs, cl.rhs, cl.vars, force_expand=True)
            report.records.append(_record("eqtype", e.text, v, trace))
    for q in r.queries:
        v = checker.check(q.lhs, q.rhs)
        report.records.append(_record("check", q.text, v, trace))
    counts = report.summary()
    if counts[NO]:
        report.exit_code = EXIT_REFUTED
    elif counts[UNKNOWN]:
        report.exit_code = EXIT_UNKNOWN
    return report


def _print_report(report: RunReport, traces: dict[str, str] | None = None) -> None:
    labels = {YES: "subtype", NO: "not a subtype", UNKNOWN: "unknown"}
    for rec in report.records:
        line = f"{rec['kind']:6} {rec['goal']}: {labels[rec['verdict']]}"
        if rec.get("reason"):
            line += f" ({rec['reason']})"
        print(line)
        if "trace" in rec:
            print(_trace_text(rec["trace"], 1))
    s = report.summary()
    print(f"{s[YES]} subtype, {s[NO]} not subtype, {s[UNKNOWN]} unknown")


def _trace_text(node: dict, indent: int) -> str:
    mark = {YES: "✓", NO: "✗", UNKNOWN: "?"}[node["status"]]
    line = f"{'  ' * indent}{mark} [{node['rule']}] {node['goal']}"
    if node.get("note"):
        line += f"  ({node['note']})"
    return "\n".join([line] + [_trace_text(c, indent + 1) for c in node.get("children", [])])


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _error(messages: Sequence[str], as_json: bool, file: str) -> int:
    if as_json:
        print(json.dumps({"file": file, "errors": list(messages), "exit_code": EXIT_ERROR},
                         sort_keys=True, indent=2, ensure_ascii=False))
    else:
        for m in messages:
            print(f"error: {m}", file=sys.stderr)
    return EXIT_ERROR


def cmd_check(args: argparse.Namespace) -> int:
    try:
        report = run_check(_read(args.file), args.file, args.depth, args.trace)
    except (NestsubError, OSError) as e:
        msgs = e.messages if isinstance(e, PipelineError) else [str(e)]
        return _error(msgs, args.json, args.file)
    if args.json:
        print(report.to_json())
    else:
        _print_report(report)
    return report.exit_code


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        loaded = load(_read(args.file))
    except (NestsubError, OSError) as e:
        msgs = e.messages if isinstance(e, PipelineError) else [str(e)]
        return _error(msgs, args.json, args.file)
    sig = loaded.renamed.sig if args.internal else {
        n: loaded.renamed.sig[n] for n in loaded.renamed.original}
    headers = [format_definition_header(d) for d in sig.values()]
    eqtypes = [e.text for e in loaded.renamed.eqtypes]
    if args.json:
        print(json.dumps({"file": args.file, "definitions": headers, "eqtypes": eqtypes,
                          "exit_code": EXIT_OK}, sort_keys=True, indent=2, ensure_ascii=False))
    else:
        for h, d in zip(headers, sig.values()):
            print(f"{h} = {format_type(d.body)}" if args.internal else h)
        for e in eqtypes:
            print(f"eqtype {e}: valid")
    return EXIT_OK


def cmd_bpa_translate(args: argparse.Namespace) -> int:
    try:
        system = bpa.parse_bpa(_read(args.file))
        if args.root:
            system = bpa.BpaSystem(system.equations, args.root)
        sig, _ = bpa.translate(system)
    except (NestsubError, OSError) as e:
        return _error([str(e)], False, args.file)
    checks = [tuple(args.check)] if args.check else []
    for name in (c for pair in checks for c in pair):
        if name not in sig:
            return _error([f"unknown process variable {name}"], False, args.file)
    sys.stdout.write(f"% root {format_type(bpa.root_type(system.root))}\n")
    sys.stdout.write(bpa.to_surface(sig, checks))
    return EXIT_OK


def cmd_bpa_include(args: argparse.Namespace) -> int:
    try:
        system = bpa.parse_bpa(_read(args.file))
        bpa.check_system(system)
        for name in (args.lhs, args.rhs):
            if name not in system.env:
                raise bpa.UnboundVariable(f"unknown process variable {name}")
    except (NestsubError, OSError) as e:
        return _error([str(e)], False, args.file)
    result = bpa.bounded_inclusion(system, args.lhs, args.rhs, args.bound)
    if isinstance(result, bpa.Witness):
        print(f'witness "{result.text}"')
        return EXIT_REFUTED
    print(f"included up to length {args.bound}")
    return EXIT_OK


def cmd_bpa_gen(args: argparse.Namespace) -> int:
    system = bpa.gen_random(args.seed, args.vars, args.branches, args.seqlen)
    sys.stdout.write(bpa.format_bpa(system))
    return EXIT_OK


def cmd_bpa_fuzz(args: argparse.Namespace) -> int:
    report = bpa.fuzz(args.n, args.seed, bound=args.bound, depth=args.depth)
    counts = report.counts()
    summary = ", ".join(f"{counts.get(k, 0)} {k}" for k in (YES, NO, UNKNOWN))
    print(f"{len(report.cases)} pairs: {summary}")
    for c in report.violations:
        print(f"violation: case {c.index} {c.lhs} <= {c.rhs} "
              f"(inclusion {c.inclusion} {c.witness}, simulation {c.sim})")
        print(bpa.format_bpa(c.system), end="")
    print(f"{len(report.violations)} violations")
    return EXIT_OK if not report.violations else EXIT_REFUTED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nestsub", description=(
        "Subtyping for nested polymorphic session types."))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run every check query in a file")
    p.add_argument("file")
    p.add_argument("--depth", type=int, default=None,
                   help="expansion budget per path (default 50, or NESTSUB_DEPTH)")
    p.add_argument("--trace", action="store_true", help="print derivation trees")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("validate", help="validate definitions and eqtypes, print variances")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.add_argument("--internal", action="store_true", help="include generated names")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bpa", help="basic process algebra tools")
    bsub = p.add_subparsers(dest="bpa_command", required=True)

    b = bsub.add_parser("translate", help="emit the nested session type encoding")
    b.add_argument("file")
    b.add_argument("--root")
    b.add_argument("--check", nargs=2, metavar=("LHS", "RHS"))
    b.set_defaults(func=cmd_bpa_translate)

    b = bsub.add_parser("include", help="bounded language inclusion")
    b.add_argument("file")
    b.add_argument("lhs")
    b.add_argument("rhs")
    b.add_argument("--bound", type=int, required=True)
    b.set_defaults(func=cmd_bpa_include)

    b = bsub.add_parser("gen", help="generate a random normed deterministic system")
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--vars", type=int, default=3)
    b.add_argument("--branches", type=int, default=2)
    b.add_argument("--seqlen", type=int, default=3)
    b.set_defaults(func=cmd_bpa_gen)

    b = bsub.add_parser("fuzz", help="soundness fuzzing against both oracles")
    b.add_argument("--n", type=int, default=200)
    b.add_argument("--seed", type=int, default=7)
    b.add_argument("--bound", type=int, default=10)
    b.add_argument("--depth", type=int, default=None)
    b.set_defaults(func=cmd_bpa_fuzz)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
