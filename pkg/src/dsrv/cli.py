"""Command line entry point.

Exit codes: 0 ok, 1 usage or input error, 2 specification rejected,
3 oracle mismatch, 4 a regression check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis, harness
from .graphs import classify_spec
from .monitor import SimulationStalled
from .netsim import parse_delay_arg
from .oracle import evaluate
from .specdsl import EvaluationError, SpecError, load

OK, USAGE, REJECTED, MISMATCH, FAILED = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE, f"{self.prog}: error: {message}\n")


def _common(p, spec=True, run=True):
    if spec:
        p.add_argument("--spec", required=True, help="specification file")
    if run:
        p.add_argument("--trace", help="input CSV, one column per input stream; synthetic if omitted")
        p.add_argument("--delays", default="constant:d=1", help="JSON file or kind:key=value,...")
        p.add_argument("--mode", choices=("declared", "eager", "lazy"), default="declared")
        p.add_argument("--length", type=int, default=100, help="length of a synthetic trace")
        p.add_argument("--extend", type=int, default=1, help="repeat the trace this many times")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--no-simplifier", action="store_true", help="only evaluate fully ground terms")
    p.add_argument("--out", help="output directory")


def build_parser():
    p = _Parser(prog="dsrv", description="Decentralized stream runtime verification toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    c = sub.add_parser("check", help="parse and classify a specification")
    _common(c, run=False)
    c = sub.add_parser("oracle", help="centralized evaluation")
    _common(c)
    c = sub.add_parser("run", help="decentralized simulation with metric files")
    _common(c)
    c = sub.add_parser("analyze", help="resolution-time bounds")
    _common(c)
    c.add_argument("--bounds", action="store_true", help="run once and write bounds.csv")
    c = sub.add_parser("compare-sync", help="asynchronous run against a synchronous emulation")
    _common(c)
    c = sub.add_parser("suite", help="regression battery")
    _common(c, spec=False, run=False)
    c.add_argument("--seed", type=int, default=0)
    return p


def _config(args, spec):
    return harness.ExperimentConfig(
        spec, trace=args.trace, length=args.length, seed=args.seed, delays=parse_delay_arg(args.delays),
        mode=args.mode, extend=args.extend, out=args.out, use_simplifier=not args.no_simplifier,
    )


def _emit(obj, args, name):
    text = json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / name).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def _check(args, spec):
    _emit(classify_spec(spec).as_dict(), args, "classification.json")
    return OK


def _oracle(args, spec):
    cfg = _config(args, spec)
    values = evaluate(spec, cfg.load_trace(spec))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        harness.write_outputs_csv(spec, values, Path(args.out) / "outputs.csv")
    else:
        harness.write_outputs(spec, values, sys.stdout)
    return OK


def _run(args, spec):
    report = harness.run_experiment(_config(args, spec))
    report.pop("result")
    _emit(report, args, "report.json")
    return OK


def _analyze(args, spec):
    report = classify_spec(spec)
    out = {"classification": report.as_dict()}
    model = parse_delay_arg(args.delays)
    if model.is_constant():
        bounds = analysis.ttr_sync(spec, model.default.d, args.mode)
        out["ttr_sync"] = {s: (None if v == analysis.UNBOUNDED else v) for s, v in bounds.items()}
    if args.bounds:
        cfg = _config(args, spec)
        cfg.out = None
        result = harness.checked_run(spec, cfg.load_trace(spec), cfg.delays, cfg.mode, cfg.use_simplifier)
        target = Path(args.out) if args.out else Path(".")
        target.mkdir(parents=True, exist_ok=True)
        harness.write_bounds_csv(result, target / "bounds.csv")
        out["bounds"] = str(target / "bounds.csv")
    _emit(out, args, "analysis.json")
    return OK


def _compare(args, spec):
    report = harness.compare_sync_simulation(_config(args, spec))
    report.pop("async")
    report.pop("sync")
    _emit(report, args, "compare.json")
    return OK if report["async_ttr_dominated"] else FAILED


def _suite(args):
    results = harness.suite(args.out, args.seed)
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['check']}")
    return OK if all(r["passed"] for r in results) else FAILED


COMMANDS = {"check": _check, "oracle": _oracle, "run": _run, "analyze": _analyze, "compare-sync": _compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "suite":
            return _suite(args)
        try:
            spec = load(args.spec)
        except SpecError as exc:
            print(exc, file=sys.stderr)
            return REJECTED
        if args.command != "check" and not classify_spec(spec).well_formed:
            print("specification is not well-formed", file=sys.stderr)
            return REJECTED
        return COMMANDS[args.command](args, spec)
    except harness.OracleMismatch as exc:
        print(f"oracle mismatch: {exc}", file=sys.stderr)
        return MISMATCH
    except SpecError as exc:
        print(exc, file=sys.stderr)
        return REJECTED
    except (OSError, ValueError, EvaluationError, SimulationStalled) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
