"""Command-line front end: ``run``, ``compare`` and ``list``.

Exit status: 0 on success, 2 when a probe is inconclusive or two reports
differ, 1 on usage, backend or file errors.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import report
from .backends import BACKEND_NAMES, BackendError, get_backend
from .formats import FORMATS
from .probes import PROBES, RunOptions, resolve_probes, run_all

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ATTENTION = 2

SEED_ENV = "FPCHAR_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; that status is reserved here
    def error(self, message):
        raise UsageError(message)


def _seed(value: str | None) -> int:
    if value is None:
        value = os.environ.get(SEED_ENV)
        if value is None:
            return 0
        source = f"${SEED_ENV}"
    else:
        source = "--seed"
    try:
        seed = int(value, 0)
    except ValueError:
        raise UsageError(f"{source} must be an integer, got {value!r}") from None
    if seed < 0:
        raise UsageError(f"{source} must be non-negative")
    return seed


def _summary_line(r) -> str:
    shown = {k: v for k, v in r.interpretation.items() if not isinstance(v, (dict, list))}
    params = " ".join(f"{k}={v}" for k, v in shown.items())
    line = f"{r.name:24s} {r.status.value:15s} {params}"
    return line.rstrip() if not r.note else f"{line}  # {r.note}"


def cmd_run(args, out=sys.stdout, err=sys.stderr) -> int:
    seed = _seed(args.seed)
    if args.trials is not None and args.trials < 1:
        raise UsageError("--trials must be positive")
    try:
        probes = resolve_probes(args.probes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        be = get_backend(args.backend, args.shader)
        if args.format:
            be = be.format(args.format)
    except BackendError as exc:  # includes a format the backend lacks
        print(f"error: {exc}", file=err)
        return EXIT_ERROR

    opts = RunOptions(seed=seed, trials=args.trials, full_sweep=args.full_sweep)
    char = run_all(be, opts, probes)
    doc = report.ReportDocument.from_characterization(char, opts, probes)
    try:
        report.save(doc, args.output)
    except OSError as exc:
        print(f"error: cannot write {args.output}: {exc.strerror}", file=err)
        return EXIT_ERROR

    for r in doc.probes:
        print(_summary_line(r), file=out)
    status = EXIT_OK
    if char.inconclusive:
        print(f"inconclusive: {', '.join(sorted(char.inconclusive))}", file=err)
        status = EXIT_ATTENTION
    if char.replay and not char.replay["ok"]:
        print(f"derived profile does not replay: {', '.join(char.replay['mismatched'])}", file=err)
        status = EXIT_ATTENTION
    return status


def cmd_compare(args, out=sys.stdout, err=sys.stderr) -> int:
    try:
        a = report.load(args.a)
        b = report.load(args.b)
    except report.ReportError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_ERROR
    deltas = report.compare(a, b)
    for d in deltas:
        print(d.render(), file=out)
    return EXIT_ATTENTION if deltas else EXIT_OK


def cmd_list(args, out=sys.stdout, err=sys.stderr) -> int:
    sections = {
        "backends": list(BACKEND_NAMES) + ["file:<profile.json>"],
        "probes": list(PROBES),
        "formats": [name for name in FORMATS if name != "fp24"],
    }
    if args.what:
        for item in sections[args.what]:
            print(item, file=out)
        return EXIT_OK
    for section, items in sections.items():
        for item in items:
            print(f"{section[:-1]} {item}", file=out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fpchar", description="Characterize floating-point arithmetic through black-box probes.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run probes against a backend and write a report")
    run.add_argument("--backend", required=True, help="backend name or file:<profile.json>")
    run.add_argument("--probes", default="all", help="comma-separated probe names, or 'all'")
    run.add_argument("--format", choices=["fp16", "fp32", "fp64"], help="storage format to probe")
    run.add_argument("--shader", choices=["pixel", "vertex"], default="pixel", help="simulated shader unit")
    run.add_argument("--seed", help=f"seed for random probes (default: ${SEED_ENV} or 0)")
    run.add_argument("--trials", type=int, help="trial count for every random probe")
    run.add_argument("--full-sweep", action="store_true", help="run the bias sweep over every significand")
    run.add_argument("-o", "--output", required=True, help="report path")
    run.set_defaults(func=cmd_run)

    cmp = sub.add_parser("compare", help="list parameter differences between two reports")
    cmp.add_argument("a")
    cmp.add_argument("b")
    cmp.set_defaults(func=cmd_compare)

    ls = sub.add_parser("list", help="list backends, probes and formats, one per line")
    ls.add_argument("what", nargs="?", choices=["backends", "probes", "formats"])
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out, err)
    except UsageError as exc:
        print(f"usage error: {exc}", file=err)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
