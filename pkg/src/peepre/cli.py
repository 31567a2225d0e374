"""Command-line entry point: verify, infer, search, generalize and compare."""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import terms as T
from .dsl import (ParseError, TypeCheckError, check_predicate_types, load, parse_optimizations,
                  parse_predicate, show_optimization, typecheck)
from .driver import (PARTIAL_ONLY, STALLED, TIMEOUT, UNKNOWN, WEAKEST, InferConfig, generalize_with_values,
                     infer, make_backend, search)
from .examples import BackendUnknown
from .verify import CounterExample, Unknown

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_UNKNOWN = 0, 1, 2, 3

_STATUS_EXIT = {WEAKEST: EXIT_OK, PARTIAL_ONLY: EXIT_OK, STALLED: EXIT_UNKNOWN,
                UNKNOWN: EXIT_UNKNOWN, TIMEOUT: EXIT_UNKNOWN}


def _widths(text: str) -> tuple:
    try:
        widths = tuple(int(w) for w in text.split(",") if w.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad width list {text!r}") from None
    if not widths or any(not 1 <= w <= 64 for w in widths):
        raise argparse.ArgumentTypeError("widths must lie in 1..64")
    return widths


def _common(p: argparse.ArgumentParser):
    p.add_argument("--widths", type=_widths, default=(4, 8), help="comma-separated bit widths")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, default=1000.0, help="wall-clock seconds")
    p.add_argument("--backend", choices=("exhaustive", "smt"), default="exhaustive")
    p.add_argument("--smt-cmd", default="z3 -in -smt2", help="solver command line")
    p.add_argument("--json", metavar="PATH", help="write a machine-readable report")
    p.add_argument("--assume", action="append", default=[], metavar="PRED")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peepre", description="Precondition inference for peephole rewrites.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check a rewrite under its precondition")
    p.add_argument("file")
    p.add_argument("--pre", help="precondition overriding the file's Pre: line")
    _common(p)

    for name, text in (("infer", "learn a weakest precondition"),
                       ("search", "enumerate preconditions by size")):
        p = sub.add_parser(name, help=text)
        p.add_argument("file")
        _common(p)
        p.add_argument("--k", type=int, default=1, help="maximum clause size for partial preconditions")
        p.add_argument("--restarts", type=int, default=3)
        p.add_argument("--budget0", type=int, default=32)
        p.add_argument("--budget1", type=int, default=32)
        p.add_argument("--max-iters", type=int, default=100)
        p.add_argument("--hint", action="append", default=[], metavar="PRED")

    p = sub.add_parser("generalize", help="replace source literals by symbolic constants")
    p.add_argument("file")
    p.add_argument("--json", metavar="PATH")

    p = sub.add_parser("compare", help="find an example accepted by A but not by B")
    p.add_argument("a", help="predicate file or predicate text")
    p.add_argument("b", help="predicate file or predicate text")
    p.add_argument("--opt", required=True, help="rewrite giving the constants' types")
    _common(p)
    return parser


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as f:
        return f.read()


def _predicate(arg: str):
    text = _read(arg) if os.path.isfile(arg) else arg
    lines = [ln.split(";", 1)[0].strip() for ln in text.splitlines()]
    return parse_predicate(" ".join(ln for ln in lines if ln))


def _config(args) -> InferConfig:
    kw = dict(widths=args.widths, seed=args.seed, timeout=args.timeout, backend=args.backend,
              smt_cmd=args.smt_cmd, assumptions=tuple(parse_predicate(a) for a in args.assume))
    if hasattr(args, "k"):
        kw.update(K=args.k, restarts=args.restarts, budget0=args.budget0, budget1=args.budget1,
                  max_iters=args.max_iters, hints=tuple(parse_predicate(h) for h in args.hint))
    return InferConfig(**kw)


def _dump(path, payload):
    if path:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")


def _cmd_verify(args, out) -> int:
    config = _config(args)
    backend = make_backend(config)
    code, results = EXIT_OK, []
    for opt in parse_optimizations(_read(args.file)):
        opt = typecheck(opt)
        opt.assumptions = list(opt.assumptions) + list(config.assumptions)
        pre = parse_predicate(args.pre) if args.pre else (opt.pre if opt.pre is not None else T.TRUE)
        check_predicate_types(opt, pre)
        verdict = backend.check_refinement(opt, pre)
        label = opt.name or "rewrite"
        if isinstance(verdict, CounterExample):
            runtime = ", ".join(f"{k}={v}" for k, v in verdict.runtime.items())
            print(f"{label}: counterexample {verdict.example.show(opt)} {runtime} ({verdict.reason})", file=out)
            results.append({"name": opt.name, "verdict": "CounterExample", "reason": verdict.reason,
                            "example": dict(zip(opt.consts, verdict.example.values)),
                            "assignment": list(verdict.example.assignment), "runtime": verdict.runtime})
            code = max(code, EXIT_INVALID)
        elif isinstance(verdict, Unknown):
            print(f"{label}: unknown ({verdict.reason})", file=out)
            results.append({"name": opt.name, "verdict": "Unknown", "reason": verdict.reason})
            code = max(code, EXIT_UNKNOWN)
        else:
            print(f"{label}: valid", file=out)
            results.append({"name": opt.name, "verdict": "Valid"})
    _dump(args.json, {"results": results})
    return code


def _cmd_learn(args, out) -> int:
    opt = load(_read(args.file))
    config = _config(args)
    run = infer if args.command == "infer" else search
    report = run(opt, config, log=lambda msg: print(msg, file=sys.stderr))
    print(f"status: {report.status}", file=out)
    if report.weakest is not None:
        print(f"weakest: {T.show(report.weakest)}", file=out)
    for p, frac in report.partials:
        print(f"partial ({frac:.1%} of positives): {T.show(p)}", file=out)
    if report.message:
        print(f"note: {report.message}", file=out)
    s = report.stats
    print(f"stats: {s.examples_generated} examples ({s.trivial_discarded} trivial), "
          f"{s.predicates_enumerated} predicates enumerated, {s.predicates_learned} learned, "
          f"{s.outer_iterations} iterations, {s.elapsed:.2f}s", file=out)
    _dump(args.json, report.to_json())
    return _STATUS_EXIT[report.status]


def _cmd_generalize(args, out) -> int:
    results = []
    for cr in parse_optimizations(_read(args.file)):
        g = generalize_with_values(typecheck(cr))
        text = show_optimization(g.opt)
        print(text, file=out)
        results.append({"rewrite": text, "values": dict(zip(g.opt.consts, g.values))})
    _dump(args.json, {"results": results})
    return EXIT_OK


def _cmd_compare(args, out) -> int:
    opt = load(_read(args.opt))
    config = _config(args)
    opt.assumptions = list(opt.assumptions) + list(config.assumptions)
    a, b = _predicate(args.a), _predicate(args.b)
    check_predicate_types(opt, a)
    check_predicate_types(opt, b)
    witness = make_backend(config).weaker_than(opt, a, b)
    if witness is None:
        print("no witness: every example accepted by A is accepted by B", file=out)
        _dump(args.json, {"witness": None})
    else:
        print(f"witness: {witness.show(opt)}", file=out)
        _dump(args.json, {"witness": dict(zip(opt.consts, witness.values)),
                          "assignment": list(witness.assignment)})
    return EXIT_OK


_COMMANDS = {"verify": _cmd_verify, "infer": _cmd_learn, "search": _cmd_learn,
             "generalize": _cmd_generalize, "compare": _cmd_compare}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return _COMMANDS[args.command](args, out)
    except (ParseError, TypeCheckError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendUnknown as exc:
        print(f"unknown: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN


if __name__ == "__main__":
    sys.exit(main())
