"""Chaos on W^{1,p}_*[a,b] (functions vanishing at a) by reduction to a weighted L^p problem.

S_{F,h} on W^{1,p}_*[a,b] is conjugate to T_{F, F' + h(a)} on L^p[a,b], so
its verdict is the L^p verdict of the reduced problem with rho = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as E
from .criterion import ChaosVerdict, Verdict, classify_chaos
from .errors import ExpressionSyntaxError, ProblemError
from .model import Check, Config, Problem, Status, bounded_audit, one_sided_limit, validate_document
from .zeroset import find_zeros

__all__ = ["SobolevProblem", "SobolevAudit", "make_sobolev_problem", "load_sobolev_problem",
           "audit_sobolev", "reduce", "classify_sobolev_chaos"]


@dataclass(frozen=True)
class SobolevProblem:
    interval: tuple[float, float]
    F: E.Expr
    h_re: E.Expr
    h_im: E.Expr
    p: float
    name: str = ""

    def __post_init__(self):
        a, b = self.interval
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise ProblemError(f"interval must be bounded with a < b, got {self.interval}")
        if not (self.p >= 1 and math.isfinite(self.p)):
            raise ProblemError(f"p must be a finite real >= 1, got {self.p}")

    def as_problem(self, h_re: E.Expr | None = None, h_im: E.Expr | None = None) -> Problem:
        return Problem(self.interval, self.F, self.h_re if h_re is None else h_re,
                       self.h_im if h_im is None else h_im, E.Num(1.0), self.p, self.name)

    def to_document(self) -> dict:
        return {"schema_version": 1, "name": self.name, "space": "sobolev-star",
                "interval": list(self.interval), "F": E.to_string(self.F),
                "h_re": E.to_string(self.h_re), "h_im": E.to_string(self.h_im), "p": self.p}


def _parse(name: str, source) -> E.Expr:
    try:
        return E.parse(str(source))
    except ExpressionSyntaxError as exc:
        raise ProblemError(f"{name}: {exc}") from exc


def make_sobolev_problem(interval, F: str, h_re: str = "0", h_im: str = "0", p: float = 1.0,
                         name: str = "") -> SobolevProblem:
    return SobolevProblem((float(interval[0]), float(interval[1])), _parse("F", F), _parse("h_re", h_re),
                          _parse("h_im", h_im), float(p), name)


def load_sobolev_problem(document: dict | str) -> SobolevProblem:
    doc = validate_document(document)
    if doc["space"] != "sobolev-star":
        raise ProblemError("document describes an lp problem; load it with model.load_problem")
    return make_sobolev_problem(doc["interval"], doc["F"], doc.get("h_re", "0"), doc.get("h_im", "0"),
                                doc["p"], doc.get("name", ""))


@dataclass
class SobolevAudit:
    F_at_a: Check
    h_at_a_real: Check
    h_constant_on_zeros: Check
    quotient_bounded: Check
    h_lipschitz: Check
    h_a: float

    def checks(self) -> dict[str, Check]:
        return {"F_at_a": self.F_at_a, "h_at_a_real": self.h_at_a_real,
                "h_constant_on_zeros": self.h_constant_on_zeros,
                "quotient_bounded": self.quotient_bounded, "h_lipschitz": self.h_lipschitz}

    def failed(self) -> list[str]:
        return [k for k, c in self.checks().items() if c.status is Status.FAIL]

    def to_dict(self) -> dict:
        return {**{k: c.to_dict() for k, c in self.checks().items()}, "h_a": self.h_a}


def _limit(f: E.CompiledExpr, x: float, direction: int, width: float) -> float:
    return one_sided_limit(f, x, direction, width)


def audit_sobolev(sp: SobolevProblem, cfg: Config | None = None) -> SobolevAudit:
    """Check F(a) = 0, h(a) real, h = h(a) on the zeros of F, and boundedness of (h - h(a))/F and h'."""
    cfg = cfg or Config()
    a, b = sp.interval
    prob = sp.as_problem()
    width = b - a
    scale = max(prob.F_scale, 1e-300)
    tol_zero = 1e-12 * scale

    Fa = _limit(prob.fF, a, 1, width)
    F_at_a = Check(Status.PASS if abs(Fa) <= max(tol_zero, 1e-14) else Status.FAIL, f"F(a) = {Fa:.6g}",
                   {"F_a": Fa})
    h_a = _limit(prob.fre, a, 1, width)
    im_a = _limit(prob.fim, a, 1, width)
    h_real = Check(Status.PASS if abs(im_a) <= cfg.tol_a else Status.FAIL, f"Im h(a) = {im_a:.6g}",
                   {"h_a": h_a, "im_h_a": im_a})

    zs = find_zeros(prob, cfg.zero_grid_n, cfg.max_components)
    pts = list(zs.isolated_zeros)
    for l, r in zs.flat_intervals:
        pts.extend(np.linspace(l, r, 9)[1:-1])
    Fb = _limit(prob.fF, b, -1, width)
    at_b = abs(Fb) <= max(tol_zero, 1e-14)
    dev = 0.0
    for z in pts:
        dev = max(dev, abs(prob.fre(z) - h_a), abs(prob.fim(z)))
    if at_b:
        dev = max(dev, abs(_limit(prob.fre, b, -1, width) - h_a), abs(_limit(prob.fim, b, -1, width)))
    n_zeros = len(pts) + int(at_b)
    if zs.truncated:
        on_zeros = Check(Status.WARN, "zeros of F accumulate; only enumerated zeros checked",
                         {"max_deviation": dev})
    else:
        on_zeros = Check(Status.PASS if dev <= cfg.tol_a else Status.FAIL,
                         f"max |h(z) - h(a)| = {dev:.3g} over {n_zeros} zeros", {"max_deviation": dev})

    quotient = E.compile_expr(E.div(E.sub(sp.h_re, E.Num(h_a)), sp.F))
    quotient_im = E.compile_expr(E.div(sp.h_im, sp.F))

    bounded = bounded_audit(lambda xs: np.maximum(np.abs(quotient.vec(xs)), np.abs(quotient_im.vec(xs))),
                            sp.interval, cfg)
    dh = E.compile_expr(E.differentiate(sp.h_re))
    dhi = E.compile_expr(E.differentiate(sp.h_im))
    lip = bounded_audit(lambda xs: np.maximum(np.abs(dh.vec(xs)), np.abs(dhi.vec(xs))), sp.interval, cfg)
    return SobolevAudit(F_at_a, h_real, on_zeros, bounded, lip, h_a)


def reduce(sp: SobolevProblem, cfg: Config | None = None, audit: SobolevAudit | None = None) -> Problem:
    """The L^p[a,b] problem with weight F' + h(a), rho = 1 and the same F and p."""
    audit = audit or audit_sobolev(sp, cfg)
    failed = audit.failed()
    if failed:
        raise ProblemError("reduction refused: " + "; ".join(f"{k}: {audit.checks()[k].detail}" for k in failed))
    F_prime = E.differentiate(sp.F)
    weight = E.add(F_prime, E.Num(audit.h_a))
    return Problem(sp.interval, sp.F, weight, E.Num(0.0), E.Num(1.0), sp.p, sp.name, F_prime)


def classify_sobolev_chaos(sp: SobolevProblem, cfg: Config | None = None) -> ChaosVerdict:
    """Verdict for S_{F,h} on W^{1,p}_*[a,b] via the reduced L^p problem."""
    cfg = cfg or Config()
    audit = audit_sobolev(sp, cfg)
    failed = audit.failed()
    if failed:
        return ChaosVerdict(Verdict.HYPOTHESIS_VIOLATED,
                            witness={"kind": "HypothesisViolated", "conditions": failed,
                                     "details": {k: audit.checks()[k].detail for k in failed}},
                            caveats=["Sobolev hypotheses failed; reduction refused"])
    reduced = reduce(sp, cfg, audit)
    verdict = classify_chaos(reduced, cfg)
    verdict.caveats.insert(0, f"verdict for W^1,{sp.p:g}_*[{sp.interval[0]:g},{sp.interval[1]:g}] via the "
                              f"conjugate L^p problem with weight {E.to_string(reduced.h_re)}")
    verdict.caveats = [c for c in verdict.caveats if "p-admissible" not in c]
    for k, c in audit.checks().items():
        if c.status is Status.WARN:
            verdict.caveats.append(f"{k}: {c.detail}")
            if verdict.tag is Verdict.CHAOTIC:
                verdict.tag = Verdict.INCONCLUSIVE
    return verdict
