"""Command-line front end.

Exit codes: 0 equivalent/solvable/ok, 1 inequivalent/unsolvable, 2 unknown,
3 parse error, 4 sort or alphabet error, 5 capacity exceeded, 6 other error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .botfree import botfree_transform, run_stage
from .coengine import Status, solve_goal
from .core import CapacityError, SortError, check_program
from .encoder import encode
from .equiv import Certificate, EquivVerdict, Outcome, build_instances, decide_equiv, recheck
from .hors import Hors, generate_prefix, sort_check_hors
from .syntax import ParseError, parse_goal, parse_hors, parse_program, print_hors, print_program, show_sort
from .trees import AlphabetError, TreeSyntaxError, is_bisimulation, parse_tree, prefix, render_ascii, show_tree

SCHEMA = "hochc-report/1"

EXIT_OK, EXIT_NO, EXIT_UNKNOWN = 0, 1, 2
EXIT_PARSE, EXIT_SORT, EXIT_CAPACITY, EXIT_OTHER = 3, 4, 5, 6


class CliError(Exception):
    pass


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def format_report(fields: dict) -> str:
    """One ``key: value`` line per field, values JSON-encoded."""
    lines = [f"schema: {json.dumps(SCHEMA)}", f"tool: {json.dumps('hochc ' + __version__)}"]
    lines += [f"{k}: {json.dumps(v, sort_keys=True)}" for k, v in fields.items()]
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        key, sep, value = line.partition(": ")
        if not sep:
            raise ParseError("expected 'key: value'", lineno)
        out[key] = json.loads(value)
    if out.get("schema") != SCHEMA:
        raise ParseError(f"unsupported report schema {out.get('schema')!r}", 1)
    return out


def equiv_fields(h1: Hors, h2: Hors, v: EquivVerdict) -> dict:
    fields: dict = {"command": "equiv", "verdict": v.outcome.value, "depth_explored": v.depth}
    if v.outcome is Outcome.INEQUIVALENT:
        fields.update(path=v.path, label1=v.label1, label2=v.label2)
    if v.certificate is not None:
        c = v.certificate
        fields["certificate"] = c.kind
        if c.kind == "rational-bisimulation":
            fields.update(tree1=show_tree(c.tree1), tree2=show_tree(c.tree2),
                          relation=sorted([a, b] for a, b in c.relation))
    fields["notes"] = v.notes
    fields["timing_s"] = {k: round(t, 6) for k, t in v.timing.items()}
    fields["input1"] = print_hors(h1)
    fields["input2"] = print_hors(h2)
    return fields


def recheck_report(text: str) -> bool:
    """Validate an equivalence report from its own contents."""
    r = parse_report(text)
    h1, h2 = parse_hors(r["input1"]), parse_hors(r["input2"])
    outcome = Outcome(r["verdict"])
    if outcome is Outcome.EQUIVALENT and r.get("certificate") == "rational-bisimulation":
        t1, t2 = parse_tree(r["tree1"]), parse_tree(r["tree2"])
        if not is_bisimulation(t1, t2, [tuple(p) for p in r["relation"]]):
            return False
        inst = build_instances(h1, h2)
        d = max(r["depth_explored"], 1)
        return generate_prefix(inst.g1, d) == prefix(t1, d) and generate_prefix(inst.g2, d) == prefix(t2, d)
    cert = Certificate(r["certificate"]) if "certificate" in r else None
    v = EquivVerdict(outcome, r["depth_explored"], r.get("path"), r.get("label1"), r.get("label2"), cert)
    return recheck(h1, h2, v)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from e


def _load_hors(path: str) -> Hors:
    return parse_hors(_read(path))


def _emit(args, text: str, fields: dict):
    if args.format == "structured":
        sys.stdout.write(format_report(fields))
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_check(args) -> int:
    text = _read(args.file)
    if args.file.endswith(".hors"):
        h = parse_hors(text)
        sort_check_hors(h)
        sorts = {f: show_sort(s) for f, s in h.nonterminals.items()}
        body = "\n".join(f"{f} : {s}" for f, s in sorts.items())
        _emit(args, f"ok: order {h.order()}\n{body}", {"command": "check", "verdict": "OK", "order": h.order(),
                                                    "sorts": sorts})
    else:
        pt = parse_program(text)
        check_program(pt.program)
        sorts = {r: show_sort(s) for r, s in pt.program.env.items()}
        body = "\n".join(f"{r} : {s}" for r, s in sorts.items())
        _emit(args, f"ok\n{body}", {"command": "check", "verdict": "OK", "sorts": sorts})
    return EXIT_OK


def cmd_tree(args) -> int:
    h = _load_hors(args.file)
    t = generate_prefix(h, args.depth)
    _emit(args, render_ascii(t), {"command": "tree", "depth": args.depth, "tree": show_tree(t)})
    return EXIT_OK


def cmd_botfree(args) -> int:
    h = _load_hors(args.file)
    if args.stage is None:
        staged = botfree_transform(h, max_variants=args.max_variants)
    else:
        staged = run_stage(h, args.stage, max_variants=args.max_variants)
    out = print_hors(staged.hors)
    _emit(args, out, {"command": "botfree", "stage": args.stage or 3, "div": staged.div,
                      "step": staged.step, "identity": staged.identity, "grammar": out})
    return EXIT_OK


def cmd_encode(args) -> int:
    hs = [_load_hors(f) for f in args.files]
    p = encode(hs[0])
    for h in hs[1:]:
        p = p.union(encode(h))
    out = print_program(p)
    _emit(args, out, {"command": "encode", "program": out})
    return EXIT_OK


def cmd_solve(args) -> int:
    pt = parse_program(_read(args.file))
    check_program(pt.program)
    goal = parse_goal(args.goal, pt.program.env) if args.goal else pt.goal
    if goal is None:
        raise CliError("no goal: give --goal or a 'goal:' item in the file")
    t0 = time.perf_counter()
    v = solve_goal(pt.program, goal, args.fuel)
    elapsed = time.perf_counter() - t0
    verdict = {Status.SAT: "SOLVABLE", Status.UNSAT: "UNSOLVABLE", Status.UNKNOWN: "UNKNOWN"}[v.status]
    fields = {"command": "solve", "verdict": verdict, "budget": v.budget, "reason": v.reason,
              "timing_s": {"symbolic": round(elapsed, 6)}}
    _emit(args, f"{verdict} (budget {v.budget}{', ' + v.reason if v.reason else ''})", fields)
    return {Status.SAT: EXIT_OK, Status.UNSAT: EXIT_NO, Status.UNKNOWN: EXIT_UNKNOWN}[v.status]


def _schedule(text: str) -> list[int]:
    try:
        out = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad schedule {text!r}") from None
    if not out or any(n < 1 for n in out) or out != sorted(set(out)):
        raise argparse.ArgumentTypeError("schedule must be increasing positive integers")
    return out


def cmd_equiv(args) -> int:
    h1, h2 = _load_hors(args.file1), _load_hors(args.file2)
    v = decide_equiv(h1, h2, schedule=args.schedule, symbolic_eq0=args.symbolic_eq0,
                     max_variants=args.max_variants)
    if v.outcome is Outcome.INEQUIVALENT:
        text = f"INEQUIVALENT at depth {v.depth}: path {v.path}: {v.label1} vs {v.label2}"
    elif v.outcome is Outcome.EQUIVALENT:
        text = f"EQUIVALENT ({v.certificate.kind})"
    else:
        text = f"UNKNOWN (explored to depth {v.depth})"
    _emit(args, text, equiv_fields(h1, h2, v))
    return {Outcome.EQUIVALENT: EXIT_OK, Outcome.INEQUIVALENT: EXIT_NO, Outcome.UNKNOWN: EXIT_UNKNOWN}[v.outcome]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "structured"), default="text")
    common.add_argument("--max-variants", type=int, default=10_000)

    ap = argparse.ArgumentParser(prog="hochc", description="Recursion schemes, Horn clauses and tree equivalence.")
    ap.add_argument("--version", action="version", version=f"hochc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="sort-check a grammar (.hors) or a program")
    p.add_argument("file")
    p.set_defaults(run=cmd_check)

    p = sub.add_parser("tree", parents=[common], help="print the generated tree up to a depth")
    p.add_argument("file")
    p.add_argument("--depth", type=int, default=4)
    p.set_defaults(run=cmd_tree)

    p = sub.add_parser("botfree", parents=[common], help="emit the bottom-free transform")
    p.add_argument("file")
    p.add_argument("--stage", type=int, choices=(1, 2, 3))
    p.set_defaults(run=cmd_botfree)

    p = sub.add_parser("encode", parents=[common], help="emit the Horn-clause encoding of grammars")
    p.add_argument("files", nargs="+")
    p.set_defaults(run=cmd_encode)

    p = sub.add_parser("solve", parents=[common], help="run the coinductive solver on a program")
    p.add_argument("file")
    p.add_argument("--goal")
    p.add_argument("--fuel", type=int, default=16)
    p.set_defaults(run=cmd_solve)

    p = sub.add_parser("equiv", parents=[common], help="compare the trees of two grammars")
    p.add_argument("file1")
    p.add_argument("file2")
    p.add_argument("--schedule", type=_schedule, default=[2, 4, 8, 16, 32, 64])
    p.add_argument("--symbolic-eq0", action="store_true", help="also search for distinct trees symbolically")
    p.set_defaults(run=cmd_equiv)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except (ParseError, TreeSyntaxError) as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (SortError, AlphabetError) as e:
        print(f"sort error: {e}", file=sys.stderr)
        return EXIT_SORT
    except CapacityError as e:
        print(f"capacity exceeded: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    except Exception as e:  # noqa: BLE001 - reported, not swallowed
        print(f"error: {e}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
