"""Command line: ``batchtree verify | bench | fuzz``.

Exit codes: 0 all checks passed, 1 a violation was found, 2 usage error.
Configuration comes from flags only.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from typing import Sequence

from . import bench
from .constants import BOUNDS, suggest
from ..ptree.access import KINDS
from .scenario import Scenario, ScenarioError, check, default_suite, random_scenario

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def parse_int(text: str) -> int:
    """``"4096"`` or ``"2^12"``."""
    text = text.strip()
    try:
        if "^" in text:
            base, exp = text.split("^")
            return int(base) ** int(exp)
        return int(text)
    except ValueError:
        raise UsageError(f"not an integer: {text!r}") from None


def parse_ints(text: str) -> list[int]:
    """Comma list of integers; ``a-b`` spans and ``2^a..2^b`` doubling ranges allowed."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = (parse_int(x) for x in part.split(".."))
            v = lo
            while v <= hi:
                out.append(v)
                v *= 2
        elif "-" in part[1:]:
            lo, hi = (parse_int(x) for x in part.split("-", 1))
            out.extend(range(lo, hi + 1))
        else:
            out.append(parse_int(part))
    return out


def parse_mix(text: str) -> dict:
    """``"insert=0.5,delete=0.3,search=0.2"``."""
    mix = {}
    for part in text.split(","):
        if "=" not in part:
            raise UsageError(f"mix entries look like kind=weight, got {part!r}")
        kind, weight = part.split("=", 1)
        kind = kind.strip()
        if kind not in KINDS:
            raise UsageError(f"unknown op kind {kind!r}")
        try:
            mix[kind] = float(weight)
        except ValueError:
            raise UsageError(f"bad weight {weight!r}") from None
    return mix


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=("recorded", "real"), default=None)
    p.add_argument("--procs", type=int, default=None, help="processor count (recorded backend)")
    p.add_argument("--seeds", default=None, help="scheduler seeds, e.g. 0-49 or 1,5,9")
    p.add_argument("--out", default=None, help="write the report or CSV here")
    p.add_argument("--json", action="store_true", help="emit JSON instead of text/CSV")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="batchtree", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="oracle and validator checks for scenarios")
    v.add_argument("scenario", nargs="?", help="scenario JSON file (default: built-in suite)")
    v.add_argument("--n", default=None, help="initial tree size")
    v.add_argument("--b", default=None, help="batch size")
    v.add_argument("--mix", default=None, help="op mix, e.g. insert=0.5,search=0.5")
    _common(v)

    b = sub.add_parser("bench", help="cost grid as CSV rows")
    b.add_argument("--op", choices=bench.OPS, default="execute")
    b.add_argument("--n", default="2^8..2^12", help="tree sizes, e.g. 256,1024 or 2^8..2^16")
    b.add_argument("--b", default="1,sqrt,n/4,n", help="batch sizes per n (1, sqrt, n/4, n, 32, ...)")
    b.add_argument("--mix", default=None, help="accepted for symmetry; bench ops fix their own mix")
    b.add_argument("--reps", type=int, default=1)
    b.add_argument("--check", action="store_true",
                   help="exit 1 if a row exceeds the frozen calibrated bounds")
    b.add_argument("--calibrate", action="store_true",
                   help="print 1.25x the max counter/formula ratio per bound to stderr")
    _common(b)

    f = sub.add_parser("fuzz", help="random scenarios against the oracle")
    f.add_argument("--count", type=int, default=100)
    f.add_argument("--n", default="256", help="largest initial tree size")
    f.add_argument("--b", default=None, help="largest batch size (default n)")
    f.add_argument("--mix", default=None, help="fixed op mix (default random per scenario)")
    f.add_argument("--start", type=int, default=0, help="first scenario seed")
    _common(f)
    return p


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_verify(a: argparse.Namespace) -> int:
    if a.scenario:
        sc = Scenario.load(a.scenario)
        overrides = {}
        if a.n is not None:
            overrides["n"] = parse_int(a.n)
        if a.b is not None:
            overrides["b"] = parse_int(a.b)
        if a.mix is not None:
            overrides["mix"] = parse_mix(a.mix)
        if a.seeds is not None:
            overrides["seeds"] = parse_ints(a.seeds)
        if a.backend is not None:
            overrides["backend"] = a.backend
        if a.procs is not None:
            overrides["processors"] = a.procs
        scenarios = [Scenario.from_dict({**sc.to_dict(), **overrides})] if overrides else [sc]
    elif any(x is not None for x in (a.n, a.b, a.mix)):
        d: dict = {}
        if a.n is not None:
            d["n"] = parse_int(a.n)
        if a.b is not None:
            d["b"] = parse_int(a.b)
        if a.mix is not None:
            d["mix"] = parse_mix(a.mix)
        if a.seeds is not None:
            d["seeds"] = parse_ints(a.seeds)
        d["backend"] = a.backend or "recorded"
        d["processors"] = a.procs
        scenarios = [Scenario.from_dict(d)]
    else:
        scenarios = default_suite()
        if a.seeds is not None or a.backend is not None or a.procs is not None:
            scenarios = [Scenario.from_dict({
                **s.to_dict(),
                **({"seeds": parse_ints(a.seeds)} if a.seeds is not None else {}),
                **({"backend": a.backend} if a.backend is not None else {}),
                **({"processors": a.procs} if a.procs is not None else {}),
            }) for s in scenarios]
    reports = [check(sc) for sc in scenarios]
    ok = all(r.ok for r in reports)
    if a.json:
        text = json.dumps({"ok": ok, "scenarios": [
            {"scenario": sc.to_dict(), "ok": r.ok, "lines": r.lines}
            for sc, r in zip(scenarios, reports)]}, indent=1) + "\n"
    else:
        text = "".join(r.text() + "\n" for r in reports)
        text += f"{'PASS' if ok else 'FAIL'}: {sum(r.ok for r in reports)}/{len(reports)} scenarios\n"
    _emit(text, a.out)
    return EXIT_OK if ok else EXIT_VIOLATION


def exceeded(report: bench.CostReport) -> list[str]:
    """Frozen bounds a bench row breaks, as messages."""
    out = []
    for name, bound in BOUNDS.items():
        if bound.op != report.op or report.b == 0:
            continue
        limit = bound.limit(report.n, report.b)
        value = bound.value(report)
        if value > limit:
            out.append(f"{name}: n={report.n} b={report.b} value {value} > {limit:.1f}")
    return out


def cmd_bench(a: argparse.Namespace) -> int:
    ns = parse_ints(a.n)
    try:
        cells = bench.grid(ns, a.b)
    except ValueError as e:
        raise UsageError(str(e)) from None
    seeds = parse_ints(a.seeds) if a.seeds is not None else [0]
    backend = a.backend or "recorded"
    reports = []
    for s in seeds:
        reports += bench.run_grid(a.op, cells, reps=a.reps, seed=s, backend=backend,
                                  processors=a.procs)
    buf = io.StringIO()
    if a.json:
        bench.write_json(reports, buf)
    else:
        bench.write_csv(reports, buf)
    _emit(buf.getvalue(), a.out)
    if a.calibrate:
        for name, c in suggest(reports).items():
            print(f"{name} = {c}", file=sys.stderr)
    if a.check and backend == "recorded":
        problems = [m for r in reports for m in exceeded(r)]
        for m in problems:
            print(f"violation: {m}", file=sys.stderr)
        return EXIT_VIOLATION if problems else EXIT_OK
    return EXIT_OK


def cmd_fuzz(a: argparse.Namespace) -> int:
    max_n = parse_int(a.n)
    max_b = parse_int(a.b) if a.b is not None else None
    seeds = parse_ints(a.seeds) if a.seeds is not None else None
    mix = parse_mix(a.mix) if a.mix is not None else None
    failures = []
    for i in range(a.start, a.start + a.count):
        sc = random_scenario(i, max_n, max_b, seeds=seeds, backend=a.backend or "recorded")
        if mix is not None:
            sc = Scenario.from_dict({**sc.to_dict(), "mix": mix})
        if a.procs is not None:
            sc.processors = a.procs
        r = check(sc)
        if not r.ok:
            failures.append((sc, r))
    if a.json:
        text = json.dumps({"ok": not failures, "count": a.count, "failures": [
            {"scenario": sc.to_dict(), "lines": r.lines} for sc, r in failures]}, indent=1) + "\n"
    else:
        text = "".join(r.text() + "\n" for _, r in failures)
        text += f"{'PASS' if not failures else 'FAIL'}: {a.count - len(failures)}/{a.count} " \
                f"random scenarios\n"
    _emit(text, a.out)
    return EXIT_VIOLATION if failures else EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    handlers = {"verify": cmd_verify, "bench": cmd_bench, "fuzz": cmd_fuzz}
    try:
        return handlers[a.command](a)
    except (UsageError, ScenarioError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
