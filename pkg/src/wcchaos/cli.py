"""Command-line entry point.

    wcchaos classify PROBLEM      verdict, component table and hypothesis audit
    wcchaos verify PROBLEM        flow-based cross-checks on sampled seeds
    wcchaos simulate PROBLEM      apply the semigroup to a sampled function
    wcchaos examples              list the built-in problems

PROBLEM is a JSON problem document or the name of a built-in problem;
``--set KEY=VALUE`` overrides a built-in parameter or a document field.
Exit codes: 0 Chaotic, 1 NotChaotic, 2 Inconclusive, 3 HypothesisViolated,
4 input error. ``verify`` exits 1 when a check fails and ``simulate`` exits
1 when a norm exceeds its bound.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from . import __version__, catalog
from .criterion import ChaosVerdict, classify_chaos
from .errors import DomainError, ExpressionSyntaxError, HorizonReached, ProblemError, StiffnessError
from .flowcheck import run_suite
from .model import Config, Problem, config_from_options, load_problem, validate_document
from .simulator import GridFunction, apply_semigroup, default_nodes, lp_norm, norm_growth
from .sobolev import SobolevProblem, classify_sobolev_chaos, load_sobolev_problem, reduce

EXIT_INPUT = 4
_STRING_FIELDS = {"name", "F", "h_re", "h_im", "rho"}


class InputError(Exception):
    pass


def _parse_sets(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise InputError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"expected a comma-separated list of numbers, got {text!r}") from None


def load_target(target: str, sets: dict[str, str]) -> dict:
    """Problem document from a file path or a built-in name, with overrides applied."""
    if os.path.exists(target):
        try:
            with open(target) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read {target}: {exc}") from exc
        if not isinstance(doc, dict):
            raise InputError(f"{target}: a problem document must be a JSON object")
        for key, value in sets.items():
            if key in _STRING_FIELDS:
                doc[key] = value
            elif key == "p":
                doc[key] = float(value)
            else:
                raise InputError(f"--set cannot override {key!r} in a document")
        return validate_document(doc)
    if target in catalog.CATALOG:
        try:
            return catalog.build_document(target, {k: float(v) for k, v in sets.items()})
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    raise InputError(f"{target!r} is neither a file nor a built-in problem (see 'wcchaos examples')")


def build(doc: dict) -> Problem | SobolevProblem:
    return load_sobolev_problem(doc) if doc["space"] == "sobolev-star" else load_problem(doc)


def make_config(doc: dict, args) -> Config:
    cfg = config_from_options(doc.get("options"))
    flags = {"tol": args.tol, "max_components": args.max_components, "grid_n": args.grid, "seed": args.seed}
    return replace(cfg, **{k: v for k, v in flags.items() if v is not None})


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(report: dict, text: str, args, filename: str) -> None:
    report = _jsonable(report)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, filename), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if args.json:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        sys.stdout.write(text)


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, str):
        return v
    return f"{v:.6g}"


def _ends(interval) -> str:
    return f"({_fmt(interval[0])}, {_fmt(interval[1])})"


def format_verdict(doc: dict, verdict: ChaosVerdict) -> str:
    lines = [f"problem: {doc.get('name') or '(unnamed)'}  space={doc['space']}  p={doc['p']:g}",
             f"verdict: {verdict.tag.value}"]
    if verdict.witness:
        lines.append(f"witness: {json.dumps(_jsonable(verdict.witness))}")
    if verdict.per_component:
        lines.append("components:")
        lines.append(f"  {'interval':<34} {'sign':>4}  {'integral':<12} {'value':>14}")
        for comp, ic in verdict.per_component:
            lines.append(f"  {_ends(comp.interval):<34} {comp.sign:>4}  {ic.tag.value:<12} {_fmt(ic.value):>14}")
    for (lo, hi), ic in verdict.regions:
        lines.append(f"  unenumerated {_ends((lo, hi))}: integral of rho {ic.tag.value}")
    if verdict.hypothesis_report is not None:
        lines.append("hypotheses:")
        for name, check in verdict.hypothesis_report.checks().items():
            lines.append(f"  {name:<18} {check.status.value:<5} {check.detail}")
    if verdict.caveats:
        lines.append("caveats:")
        lines.extend(f"  - {c}" for c in verdict.caveats)
    return "\n".join(lines) + "\n"


def cmd_classify(args) -> int:
    doc = load_target(args.problem, _parse_sets(args.set))
    cfg = make_config(doc, args)
    prob = build(doc)
    verdict = classify_sobolev_chaos(prob, cfg) if isinstance(prob, SobolevProblem) else classify_chaos(prob, cfg)
    report = {"problem": doc, "config": asdict(cfg), **verdict.to_dict(), "exit_code": verdict.exit_code}
    _emit(report, format_verdict(doc, verdict), args, "report.json")
    return verdict.exit_code


def cmd_verify(args) -> int:
    doc = load_target(args.problem, _parse_sets(args.set))
    cfg = make_config(doc, args)
    prob = build(doc)
    if isinstance(prob, SobolevProblem):
        prob = reduce(prob, cfg)
    suite = run_suite(prob, cfg, seeds_per_component=args.seeds, t0s=_floats(args.t0),
                      max_components=args.components)
    report = {"problem": doc, "config": asdict(cfg), **suite.to_dict()}
    lines = [f"problem: {doc.get('name') or '(unnamed)'}",
             f"seeds: {', '.join(_fmt(x) for x in suite.seeds)}",
             f"series vs integral: {len(suite.series)} comparisons",
             f"identity: {len(suite.identity)} seeds, worst residual "
             f"{_fmt(max((r['residual'] for r in suite.identity if r['residual'] is not None), default=None))}",
             f"cocycle: {len(suite.cocycle)} triples, worst residual "
             f"{_fmt(max((max(r['forward'], r['backward']) for r in suite.cocycle), default=None))}",
             f"comparability: {len(suite.comparability)} intervals, worst constant "
             f"{_fmt(max((r['constant'] for r in suite.comparability), default=None))}"]
    lines += [f"FAIL {f}" for f in suite.failures]
    lines += [f"warn {w}" for w in suite.warnings]
    lines.append("result: " + ("pass" if suite.passed else "FAIL"))
    _emit(report, "\n".join(lines) + "\n", args, "verify.json")
    return 0 if suite.passed else 1


def _time_tag(t: float) -> str:
    return f"{t:g}".replace("-", "m")


def cmd_simulate(args) -> int:
    doc = load_target(args.problem, _parse_sets(args.set))
    cfg = make_config(doc, args)
    prob = build(doc)
    if isinstance(prob, SobolevProblem):
        prob = prob.as_problem()
    times = _floats(args.times)
    if any(t < 0 for t in times):
        raise InputError("times must be nonnegative")
    if args.table:
        f = GridFunction.from_tsv(args.table)
        if not (np.all(f.nodes > prob.omega[0]) and np.all(f.nodes < prob.omega[1])):
            raise InputError("table nodes must lie inside omega")
    else:
        f = GridFunction.from_expr(args.f, default_nodes(prob.omega, args.nodes))
    rows = norm_growth(prob, f, times, tol=cfg.flow_tol)
    written = []
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for t in times:
            g = apply_semigroup(prob, f, t, cfg.flow_tol)
            path = os.path.join(args.out, f"f_t{_time_tag(t)}.tsv")
            g.to_tsv(path)
            written.append(path)
        path = os.path.join(args.out, "norms.tsv")
        with open(path, "w") as fh:
            fh.write("t\tnorm\tbound\tmissing\n")
            for r in rows:
                fh.write(f"{r.t:.17g}\t{r.norm:.17g}\t{r.bound:.17g}\t{r.missing}\n")
        written.append(path)
    ok = all(r.within for r in rows)
    report = {"problem": doc, "norm_f": lp_norm(prob, f), "nodes": int(f.nodes.size),
              "norms": [{"t": r.t, "norm": r.norm, "bound": r.bound, "missing": r.missing, "within": r.within}
                        for r in rows],
              "files": written, "within_bound": ok}
    lines = [f"{'t':>10} {'norm':>16} {'bound':>16} {'missing':>8}"]
    lines += [f"{r.t:>10g} {r.norm:>16.10g} {r.bound:>16.10g} {r.missing:>8d}" for r in rows]
    lines += [f"wrote {p}" for p in written]
    _emit(report, "\n".join(lines) + "\n", args, "simulate.json")
    return 0 if ok else 1


def cmd_examples(args) -> int:
    entries = []
    for entry in catalog.CATALOG.values():
        item = {"name": entry.name, "space": entry.space, "summary": entry.summary, "params": entry.params,
                "rule": entry.rule, "expected": catalog.expected_verdict(entry.name).value}
        if args.run:
            prob = catalog.build_problem(entry.name)
            cfg = make_config({}, args)
            v = classify_sobolev_chaos(prob, cfg) if isinstance(prob, SobolevProblem) else classify_chaos(prob, cfg)
            item["observed"] = v.tag.value
        entries.append(item)
    lines = []
    for e in entries:
        params = ", ".join(f"{k}={v:g}" for k, v in e["params"].items())
        seen = f"  observed: {e['observed']}" if "observed" in e else ""
        lines.append(f"{e['name']:<28} {e['summary']}\n{'':<28} params: {params}; {e['rule']}; "
                     f"expected at defaults: {e['expected']}{seen}")
    _emit({"examples": entries}, "\n".join(lines) + "\n", args, "examples.json")
    if args.run and any(e["observed"] != e["expected"] for e in entries):
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, help="classification tolerance (default 1e-8)")
    common.add_argument("--max-components", type=int, help="zeros enumerated per side of the anchor")
    common.add_argument("--grid", type=int, help="base scan grid size (refined 8x for zero finding)")
    common.add_argument("--seed", type=int, help="random seed for sampled checks")
    common.add_argument("--json", action="store_true", help="print the structured report")
    common.add_argument("--out", metavar="DIR", help="write reports and tables into DIR")

    target = argparse.ArgumentParser(add_help=False)
    target.add_argument("problem", help="problem document (JSON) or built-in name")
    target.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a built-in parameter or a document field")

    parser = argparse.ArgumentParser(prog="wcchaos", description=__doc__.split("\n\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common, target], help="classify chaos of a problem")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("verify", parents=[common, target], help="run flow-based cross-checks")
    p.add_argument("--seeds", type=int, default=2, help="seeds per component")
    p.add_argument("--t0", default="0.25,1,3", help="comma-separated series steps")
    p.add_argument("--components", type=int, default=3, help="components checked (nearest the anchor)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", parents=[common, target], help="apply the semigroup to a function")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--f", help="expression in x")
    src.add_argument("--table", help="two- or three-column TSV of (node, value) or (node, re, im)")
    p.add_argument("--times", default="0,1,2", help="comma-separated times")
    p.add_argument("--nodes", type=int, default=2048, help="Chebyshev nodes for --f")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("examples", parents=[common], help="list built-in problems")
    p.add_argument("--run", action="store_true", help="also classify each built-in at its defaults")
    p.set_defaults(func=cmd_examples)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else 0
    try:
        return args.func(args)
    except (InputError, ProblemError, ExpressionSyntaxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DomainError, StiffnessError, HorizonReached, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
