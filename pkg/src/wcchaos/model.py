"""Problem definition, problem documents, and numerical audits of the standing hypotheses."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Any

import jsonschema
import numpy as np

from . import expr as E
from .errors import DomainError, ExpressionSyntaxError, ProblemError
from .grids import AUDIT_LEVELS, audit_grid

__all__ = [
    "Config", "Problem", "make_problem", "load_problem", "parse_endpoint", "PROBLEM_SCHEMA",
    "Status", "Check", "HypothesisReport", "AdmissibilityReport", "check_hypotheses",
    "check_admissibility", "bounded_audit",
]


@dataclass(frozen=True)
class Config:
    """Tolerances and sizes used by audits and classification."""

    tol: float = 1e-8
    flow_tol: float = 1e-10
    grid_n: int = 1024
    refinements: int = 3
    max_components: int = 64
    tol_a: float = 1e-8
    t_audit: float = 50.0
    n_escape_seeds: int = 32
    seed: int = 0
    delta: float = 1e-6
    R: float = 1e6
    growth_factor: float = 10.0
    margin: float = 0.05
    levels: int = 40

    @property
    def zero_grid_n(self) -> int:
        return self.grid_n * 2 ** self.refinements


# ---------------------------------------------------------------- problem

@dataclass(frozen=True)
class Problem:
    """Omega, drift F, weight h = h_re + i h_im, density rho and exponent p."""

    omega: tuple[float, float]
    F: E.Expr
    h_re: E.Expr
    h_im: E.Expr
    rho: E.Expr
    p: float
    name: str = ""
    F_prime: E.Expr | None = None

    def __post_init__(self):
        a, b = self.omega
        if math.isnan(a) or math.isnan(b) or not a < b:
            raise ProblemError(f"omega must be an open interval with alpha < beta, got {self.omega}")
        if not (self.p >= 1 and math.isfinite(self.p)):
            raise ProblemError(f"p must be a finite real >= 1, got {self.p}")
        if self.F_prime is None:
            object.__setattr__(self, "F_prime", E.differentiate(self.F))

    # compiled evaluators --------------------------------------------------
    @cached_property
    def fF(self) -> E.CompiledExpr:
        return E.compile_expr(self.F)

    @cached_property
    def fFp(self) -> E.CompiledExpr:
        return E.compile_expr(self.F_prime)

    @cached_property
    def fre(self) -> E.CompiledExpr:
        return E.compile_expr(self.h_re)

    @cached_property
    def fim(self) -> E.CompiledExpr:
        return E.compile_expr(self.h_im)

    @cached_property
    def frho(self) -> E.CompiledExpr:
        return E.compile_expr(self.rho)

    @cached_property
    def _rhs_fast(self):
        parts = ", ".join(E._scalar_source(e) for e in (self.F, self.h_re, self.h_im, self.F_prime))
        return eval(f"lambda x: ({parts})", dict(E._SCALAR_ENV))

    def rhs(self, x: float) -> tuple[float, float, float, float]:
        """(F, Re h, Im h, F') at x, with the same semantics as CompiledExpr."""
        x = float(x)
        try:
            out = self._rhs_fast(x)
        except (ArithmeticError, ValueError):
            out = None
        if out is None or any(v != v for v in out):
            out = (self.fF(x), self.fre(x), self.fim(x), self.fFp(x))
        return out

    def rhs_vec(self, xs: np.ndarray) -> np.ndarray:
        """Stacked (F, Re h, Im h, F') on an array, shape (len(xs), 4)."""
        return np.stack([self.fF.vec(xs), self.fre.vec(xs), self.fim.vec(xs), self.fFp.vec(xs)], axis=1)

    # derived facts ---------------------------------------------------------
    @property
    def alpha(self) -> float:
        return self.omega[0]

    @property
    def beta(self) -> float:
        return self.omega[1]

    def contains(self, x: float) -> bool:
        return self.omega[0] < x < self.omega[1]

    @cached_property
    def F_scale(self) -> float:
        vals = np.abs(self.fF.vec(audit_grid(self.omega, 1024)))
        vals = vals[np.isfinite(vals)]
        return float(vals.max()) if vals.size else 0.0

    @cached_property
    def re_h_is_zero(self) -> bool:
        return _identically_zero(self.h_re, self.fre, self.omega)

    @cached_property
    def im_h_is_zero(self) -> bool:
        return _identically_zero(self.h_im, self.fim, self.omega)

    def boundary_value(self, side: int) -> float | None:
        """One-sided limit of F at a finite endpoint (side 0 left, 1 right)."""
        e = self.omega[side]
        if not math.isfinite(e):
            return None
        return one_sided_limit(self.fF, e, -1 if side else 1, self.omega[1] - self.omega[0])

    @cached_property
    def boundary_equilibrium(self) -> tuple[bool, bool]:
        """Whether F vanishes at each finite endpoint (so trajectories only approach it)."""
        tol = 1e-12 * max(self.F_scale, 1e-300)
        out = []
        for side in (0, 1):
            v = self.boundary_value(side)
            out.append(v is not None and abs(v) <= max(tol, 1e-14))
        return tuple(out)

    def with_p(self, p: float) -> "Problem":
        return replace(self, p=p)

    def to_document(self) -> dict:
        return {
            "schema_version": 1,
            "name": self.name,
            "space": "lp",
            "omega": [_endpoint_out(v) for v in self.omega],
            "F": E.to_string(self.F),
            "h_re": E.to_string(self.h_re),
            "h_im": E.to_string(self.h_im),
            "rho": E.to_string(self.rho),
            "p": self.p,
        }


def _identically_zero(e: E.Expr, f: E.CompiledExpr, omega) -> bool:
    if E.is_zero_literal(e):
        return True
    try:
        vals = f.vec(audit_grid(omega, 1024))
    except DomainError:
        return False
    return bool(np.all(np.abs(vals) <= 1e-14))


def one_sided_limit(f: E.CompiledExpr, e: float, direction: int, width: float) -> float:
    try:
        v = f(e)
        if math.isfinite(v):
            return v
    except DomainError:
        pass
    d = min(1e-6, width / 8)
    v1, v2 = f(e + direction * d), f(e + direction * 2 * d)
    return 2 * v1 - v2


def _endpoint_out(v: float):
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return v


def parse_endpoint(v: Any) -> float:
    if isinstance(v, str):
        key = v.strip().lower()
        if key in ("inf", "+inf", "infinity"):
            return math.inf
        if key in ("-inf", "-infinity"):
            return -math.inf
        raise ProblemError(f"bad endpoint {v!r}")
    return float(v)


def _parse_field(name: str, source: Any) -> E.Expr:
    text = str(source)
    try:
        return E.parse(text)
    except ExpressionSyntaxError as exc:
        raise ProblemError(f"{name}: {exc}") from exc


def _check_rho_positive(prob: Problem) -> None:
    xs = audit_grid(prob.omega, 1024)
    try:
        vals = prob.frho.vec(xs)
    except DomainError as exc:
        raise ProblemError(f"rho is not defined on omega: {exc}") from exc
    if np.any(vals < 0) or np.any(~np.isfinite(vals)):
        i = int(np.argmax((vals < 0) | ~np.isfinite(vals)))
        raise ProblemError(f"rho must be positive, rho({xs[i]!r}) = {vals[i]!r}")
    zero = vals == 0
    if zero.any():
        # exact zeros are accepted only as underflow in the outermost tails
        pos = np.flatnonzero(~zero)
        if pos.size == 0:
            raise ProblemError("rho vanishes on the audit grid")
        inner = zero[pos[0]:pos[-1] + 1]
        if inner.any():
            i = pos[0] + int(np.argmax(inner))
            raise ProblemError(f"rho must be positive, rho({xs[i]!r}) = 0")


def make_problem(omega, F: str, h_re: str = "0", h_im: str = "0", rho: str = "1", p: float = 1.0,
                 name: str = "", validate: bool = True) -> Problem:
    """Build a Problem from expression text."""
    omega = (parse_endpoint(omega[0]), parse_endpoint(omega[1]))
    prob = Problem(omega, _parse_field("F", F), _parse_field("h_re", h_re), _parse_field("h_im", h_im),
                   _parse_field("rho", rho), float(p), name)
    if validate:
        _check_rho_positive(prob)
    return prob


_EXPR = {"type": ["string", "number"]}
_ENDPOINT = {"anyOf": [{"type": "number"}, {"type": "string", "enum": ["inf", "+inf", "-inf"]}]}

PROBLEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "space", "F", "p"],
    "properties": {
        "schema_version": {"const": 1},
        "name": {"type": "string"},
        "space": {"enum": ["lp", "sobolev-star"]},
        "omega": {"type": "array", "items": _ENDPOINT, "minItems": 2, "maxItems": 2},
        "interval": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "F": _EXPR,
        "h_re": _EXPR,
        "h_im": _EXPR,
        "rho": _EXPR,
        "p": {"type": "number", "minimum": 1},
        "options": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "flow_tol": {"type": "number", "exclusiveMinimum": 0},
                "max_components": {"type": "integer", "minimum": 1},
                "grid": {"type": "integer", "minimum": 64},
                "seed": {"type": "integer"},
            },
        },
    },
    "allOf": [
        {"if": {"properties": {"space": {"const": "lp"}}},
         "then": {"required": ["omega"], "not": {"required": ["interval"]}}},
        {"if": {"properties": {"space": {"const": "sobolev-star"}}},
         "then": {"required": ["interval"], "not": {"anyOf": [{"required": ["omega"]}, {"required": ["rho"]}]}}},
    ],
}


def validate_document(document: dict | str) -> dict:
    """Parse (if text) and schema-check a problem document."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ProblemError(f"not a JSON document: {exc}") from exc
    try:
        jsonschema.validate(document, PROBLEM_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<document>"
        raise ProblemError(f"schema error at {where}: {exc.message}") from exc
    return document


def config_from_options(options: dict | None, base: Config | None = None) -> Config:
    cfg = base or Config()
    if not options:
        return cfg
    mapping = {"tol": "tol", "flow_tol": "flow_tol", "max_components": "max_components",
               "grid": "grid_n", "seed": "seed"}
    return replace(cfg, **{mapping[k]: v for k, v in options.items()})


def load_problem(document: dict | str) -> Problem:
    """Problem from an ``"lp"`` problem document (dict or JSON text)."""
    doc = validate_document(document)
    if doc["space"] != "lp":
        raise ProblemError("document describes a sobolev-star problem; load it with sobolev.load_sobolev_problem")
    return make_problem(doc["omega"], doc["F"], doc.get("h_re", "0"), doc.get("h_im", "0"),
                        doc.get("rho", "1"), doc["p"], doc.get("name", ""))


# ---------------------------------------------------------------- audits

class Status(str, Enum):
    PASS = "Pass"
    WARN = "Warn"
    FAIL = "Fail"


@dataclass
class Check:
    status: Status
    detail: str = ""
    data: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"status": self.status.value, "detail": self.detail, **_jsonable(self.data)}


def _jsonable(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, float) and not math.isfinite(v):
            v = str(v)
        elif isinstance(v, (list, tuple)):
            v = [str(x) if isinstance(x, float) and not math.isfinite(x) else x for x in v]
        out[k] = v
    return out


@dataclass
class HypothesisReport:
    forward_invariant: Check
    F_prime_bounded: Check
    Re_h_bounded: Check
    condition_a: Check
    condition_b: Check
    notes: list[str] = field(default_factory=list)

    def checks(self) -> dict[str, Check]:
        return {
            "forward_invariant": self.forward_invariant,
            "F_prime_bounded": self.F_prime_bounded,
            "Re_h_bounded": self.Re_h_bounded,
            "condition_a": self.condition_a,
            "condition_b": self.condition_b,
        }

    def failed(self) -> list[str]:
        return [k for k, c in self.checks().items() if c.status is Status.FAIL]

    def warned(self) -> list[str]:
        return [k for k, c in self.checks().items() if c.status is Status.WARN]

    def to_dict(self) -> dict:
        out = {k: c.to_dict() for k, c in self.checks().items()}
        out["notes"] = list(self.notes)
        return out


WARN_GROWTH = 2.0


def bounded_audit(f, omega, cfg: Config) -> Check:
    """Sup of |f| on successively refined audit grids (``f`` acts on arrays).

    Fails when the sup grows by more than ``growth_factor`` at every
    refinement step, i.e. keeps growing as the grid approaches an endpoint;
    warns when it grows by more than ``WARN_GROWTH`` at every step.
    """
    sups = []
    for level in range(AUDIT_LEVELS):
        vals = np.abs(f(audit_grid(omega, cfg.grid_n, level, cfg.delta, cfg.R)))
        if not np.all(np.isfinite(vals)):
            return Check(Status.FAIL, "non-finite values on the audit grid", {"sups": sups + [math.inf]})
        sups.append(float(vals.max()))
    growth = [sups[i + 1] / sups[i] if sups[i] > 0 else (math.inf if sups[i + 1] > 0 else 1.0)
              for i in range(len(sups) - 1)]
    data = {"bound": sups[-1], "sups": sups}
    factors = ", ".join(f"{g:.3g}" for g in growth)
    if all(g > cfg.growth_factor for g in growth):
        return Check(Status.FAIL, f"sup keeps growing under refinement (factors {factors})", data)
    if all(g > WARN_GROWTH for g in growth):
        # a weak endpoint singularity (|f| ~ d^-a with a <= 1/2) grows by at most 10 per level
        return Check(Status.WARN, f"sup {sups[-1]:.6g} still grows under refinement (factors {factors})", data)
    return Check(Status.PASS, f"sup {sups[-1]:.6g}", data)


def _forward_invariance(prob: Problem, cfg: Config) -> Check:
    from .semiflow import flow_grid

    a, b = prob.omega
    notes = []
    status = Status.PASS
    tol = 1e-8 * max(1.0, prob.F_scale)
    if math.isfinite(a):
        fa = prob.boundary_value(0)
        if fa < -tol:
            return Check(Status.FAIL, f"F(alpha+) = {fa:.6g} < 0: the flow leaves through the left endpoint",
                         {"F_left": fa})
        notes.append(f"F(alpha+)={fa + 0.0:.3g}")
    if math.isfinite(b):
        fb = prob.boundary_value(1)
        if fb > tol:
            return Check(Status.FAIL, f"F(beta-) = {fb:.6g} > 0: the flow leaves through the right endpoint",
                         {"F_right": fb})
        notes.append(f"F(beta-)={fb + 0.0:.3g}")

    rng = np.random.default_rng(cfg.seed)
    pool = audit_grid(prob.omega, cfg.grid_n, 1, cfg.delta, cfg.R)
    seeds = np.sort(rng.choice(pool, size=min(cfg.n_escape_seeds, pool.size), replace=False))
    res = flow_grid(prob, seeds, cfg.t_audit, cfg.flow_tol)
    exited = ~np.isnan(res.t_exit)
    genuine = exited & ~res.drift
    if genuine.any():
        i = int(np.argmax(genuine))
        return Check(Status.FAIL, f"trajectory from x={seeds[i]:.6g} left omega at t={res.t_exit[i]:.6g}",
                     {"seeds": int(seeds.size), "escaped": int(genuine.sum())})
    if exited.any():
        status = Status.WARN
        notes.append(f"{int(exited.sum())} trajectories reached an equilibrium endpoint numerically")
    notes.append(f"{seeds.size} seeds stayed in omega up to t={cfg.t_audit:g}")
    return Check(status, "; ".join(notes), {"seeds": int(seeds.size), "drifted": int(exited.sum())})


def _condition_a(prob: Problem, zs, cfg: Config) -> Check:
    pts = list(zs.all_zeros)
    for lo, hi in zs.flat_intervals:
        pts.extend(np.linspace(lo, hi, 9)[1:-1])
    if not pts:
        return Check(Status.PASS, "F has no zeros in omega (vacuous)", {"gamma": None, "max_deviation": 0.0})
    xs = np.array(pts)
    re = prob.fre.vec(xs)
    im = prob.fim.vec(xs)
    gamma = 0.5 * (re.max() + re.min())
    dev = float(np.max(np.abs(re - gamma)))
    im_max = float(np.max(np.abs(im)))
    data = {"gamma": float(gamma), "max_deviation": dev, "max_abs_im": im_max, "zeros_checked": int(xs.size)}
    if im_max > cfg.tol_a:
        return Check(Status.FAIL, f"Im h = {im_max:.3g} at a zero of F; h must be real there", data)
    if dev > cfg.tol_a:
        return Check(Status.FAIL, f"Re h varies by {2 * dev:.3g} over the zeros of F", data)
    return Check(Status.PASS, f"h = {gamma:.12g} on {{F=0}}", data)


def _condition_b(prob: Problem, zs, cfg: Config) -> Check:
    from .quadrature import classify_improper
    from .zeroset import components

    if prob.im_h_is_zero:
        return Check(Status.PASS, "Im h vanishes identically (vacuous)", {"side": "both"})
    if zs.truncated:
        return Check(Status.WARN, "Im h is nonzero and the zero set accumulates; integrability not verified",
                     {"side": None})

    def g(w):
        return np.abs(prob.fim.vec(w)) / np.abs(prob.fF.vec(w))

    comps = components(zs, prob.omega)
    # every zero of F must be an integrable singularity from both sides
    interior_ok = True
    details = []
    for comp in comps:
        l, r = comp.interval
        for side, kind in ((0, comp.kinds[0]), (1, comp.kinds[1])):
            if kind != "zero":
                continue
            c = comp.base_point()
            sub = (l, c) if side == 0 else (c, r)
            res = classify_improper(g, sub, (side == 0, side == 1), cfg.tol, absolute=True)
            if not res.convergent:
                interior_ok = False
                details.append(f"|Im h/F| not integrable at zero {sub[side]:.6g} ({res.tag.value})")
    if not interior_ok:
        return Check(Status.FAIL, "; ".join(details), {"side": None})
    side_ok = {}
    for side, name in ((0, "left"), (1, "right")):
        comp = comps[0] if side == 0 else comps[-1]
        l, r = comp.interval
        c = comp.base_point()
        sub = (l, c) if side == 0 else (c, r)
        if comp.kinds[side] in ("boundary", "infinite"):
            res = classify_improper(g, sub, (side == 0, side == 1), cfg.tol, absolute=True)
            side_ok[name] = res
        else:
            side_ok[name] = None
    passing = [n for n, r in side_ok.items() if r is not None and r.convergent]
    if passing:
        side = passing[0] if len(passing) == 1 else "both"
        return Check(Status.PASS, f"Im h/F integrable toward the {side} end", {"side": side})
    if any(r is not None and r.inconclusive for r in side_ok.values()):
        return Check(Status.WARN, "integrability of Im h/F near the ends is undecided", {"side": None})
    return Check(Status.FAIL, "Im h/F is not integrable toward either end of omega", {"side": None})


def check_hypotheses(prob: Problem, cfg: Config | None = None, zs=None) -> HypothesisReport:
    """Audit forward invariance, boundedness of F' and Re h, and conditions a) and b)."""
    from .zeroset import find_zeros

    cfg = cfg or Config()
    if zs is None:
        zs = find_zeros(prob, cfg.zero_grid_n, cfg.max_components)
    notes = []
    fprime = bounded_audit(prob.fFp.vec, prob.omega, cfg)
    reh = bounded_audit(prob.fre.vec, prob.omega, cfg)
    inv = _forward_invariance(prob, cfg)
    cond_a = _condition_a(prob, zs, cfg)
    cond_b = _condition_b(prob, zs, cfg)
    if zs.truncated:
        notes.append("zero set enumeration truncated at the component cap")
    return HypothesisReport(inv, fprime, reh, cond_a, cond_b, notes)


@dataclass
class AdmissibilityReport:
    status: Status
    M: float
    omega: float
    samples: int
    skipped: int
    caveat: str = "a finite fit over finitely many samples is evidence, not proof"

    def to_dict(self) -> dict:
        return {"status": self.status.value, "M": self.M, "omega": self.omega,
                "samples": self.samples, "skipped": self.skipped, "caveat": self.caveat}


def check_admissibility(prob: Problem, xs=None, ts=None, tol: float = 1e-10) -> AdmissibilityReport:
    """Fit M e^{omega t} over the ratios |h_t(x)|^p rho(x) / (rho(phi) exp(int F')).

    With M fixed to 1 the smallest admissible rate is max_j log(ratio_j)/t_j;
    the log-ratio at t = 0 is exactly 0, so M = 1 is always attainable.
    """
    from .semiflow import flow_curve

    if xs is None:
        xs = audit_grid(prob.omega, 16, 1)
    if ts is None:
        ts = np.linspace(0.0, 10.0, 21)
    ts = np.sort(np.asarray(ts, dtype=float))
    worst = 0.0
    n = skipped = 0
    for x in np.asarray(xs, dtype=float):
        rho_x = prob.frho(x)
        if rho_x <= 0:
            # rho underflows far out on unbounded ends
            skipped += len(ts)
            continue
        log_rho_x = math.log(rho_x)
        for s in flow_curve(prob, float(x), list(ts), tol):
            if s.t == 0:
                continue
            if not s.in_domain:
                skipped += 1
                continue
            rho_phi = prob.frho(s.value)
            if rho_phi <= 0:
                skipped += 1
                continue
            L = prob.p * s.log_weight_re + log_rho_x - math.log(rho_phi) - s.fprime_integral
            worst = max(worst, L / s.t)
            n += 1
    if n == 0:
        return AdmissibilityReport(Status.WARN, 1.0, math.nan, 0, skipped, "no usable samples")
    status = Status.PASS if math.isfinite(worst) else Status.FAIL
    return AdmissibilityReport(status, 1.0, worst, n, skipped)
