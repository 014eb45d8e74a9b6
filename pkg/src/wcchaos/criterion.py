"""Flow-free chaos test for weighted composition semigroups on weighted L^p spaces.

For every component C of Omega minus {F = 0} and a base point x in C, the
semigroup is chaotic iff {F = 0} is null and each integral

    int_C exp(-p U(w)) rho(w) dw,    U(w) = int_x^w Re h(y) / F(y) dy,

is finite. U is obtained by integrating U' = Re h / F outward from x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DomainError, HorizonReached, StiffnessError
from .model import Config, HypothesisReport, Problem, Status, check_hypotheses
from .quadrature import Convergence, IntegralClass, classify_improper
from .semiflow import Trajectory
from .zeroset import Component, ZeroSet, components, find_zeros

__all__ = [
    "Verdict", "ChaosVerdict", "InnerIntegral", "component_integral", "classify_chaos",
    "classify_chaos_h_zero", "region_density_integral",
]


class Verdict(str, Enum):
    CHAOTIC = "Chaotic"
    NOT_CHAOTIC = "NotChaotic"
    HYPOTHESIS_VIOLATED = "HypothesisViolated"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class ChaosVerdict:
    tag: Verdict
    witness: dict | None = None
    per_component: list[tuple[Component, IntegralClass]] = field(default_factory=list)
    hypothesis_report: HypothesisReport | None = None
    caveats: list[str] = field(default_factory=list)
    zero_set: ZeroSet | None = None
    regions: list[tuple[tuple[float, float], IntegralClass]] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return {Verdict.CHAOTIC: 0, Verdict.NOT_CHAOTIC: 1, Verdict.INCONCLUSIVE: 2,
                Verdict.HYPOTHESIS_VIOLATED: 3}[self.tag]

    def to_dict(self) -> dict:
        return {
            "verdict": self.tag.value,
            "witness": self.witness,
            "components": [{**c.to_dict(), "integral": ic.to_dict()} for c, ic in self.per_component],
            "unenumerated_regions": [{"interval": [_num(l), _num(r)], "density_integral": ic.to_dict()}
                                     for (l, r), ic in self.regions],
            "zero_set": self.zero_set.to_dict() if self.zero_set is not None else None,
            "hypotheses": self.hypothesis_report.to_dict() if self.hypothesis_report is not None else None,
            "caveats": list(self.caveats),
        }


def _num(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


class InnerIntegral:
    """U(w) = int_base^w Re h / F along a component, from two lazy ODE solutions.

    Toward a finite end e the variable is tau = log((base - e) / (w - e)), in
    which a simple zero of F at e gives a bounded right-hand side and w - e
    keeps full relative precision. Toward an infinite end it is |w - base|.
    """

    def __init__(self, prob: Problem, comp: Component, base: float, tol: float = 1e-10):
        l, r = comp.interval
        if not l < base < r:
            raise ValueError(f"base point {base!r} is not inside {comp.interval}")
        self.base = base
        self.ends = {-1: l, 1: r}
        self.zero = prob.re_h_is_zero
        self._traj = {}
        if self.zero:
            return
        fre, fF = prob.fre, prob.fF
        for side, end in self.ends.items():
            if math.isfinite(end):
                gap = base - end

                def g(tau, y, end=end, gap=gap):
                    d = gap * math.exp(-tau)
                    w = end + d
                    return (-fre(w) / fF(w) * d,)
            else:
                def g(s, y, side=side):
                    w = base + side * s
                    return (side * fre(w) / fF(w),)

            self._traj[side] = Trajectory(g, (0.0,), rtol=tol, atol=tol)

    def _time(self, side: int, w: np.ndarray) -> np.ndarray:
        end = self.ends[side]
        if math.isfinite(end):
            return np.log((self.base - end) / (w - end))
        return np.abs(w - self.base)

    def __call__(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if self.zero:
            return np.zeros_like(w)
        flat = w.ravel()
        res = np.empty_like(flat)
        for side in (-1, 1):
            m = (flat - self.base) * side >= 0
            if m.any():
                res[m] = self._traj[side].values(np.maximum(self._time(side, flat[m]), 0.0))[:, 0]
        return res.reshape(w.shape)


def _integrand(prob: Problem, U: InnerIntegral):
    p = prob.p
    rho = prob.frho.vec

    def f(w):
        w = np.asarray(w, dtype=float)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            return np.exp(-p * U(w)) * rho(w)

    return f


def component_integral(prob: Problem, comp: Component, base_x: float | None = None,
                       tol: float = 1e-8, cfg: Config | None = None) -> IntegralClass:
    """Classify int_C exp(-p U) rho over one component with base point ``base_x``."""
    cfg = cfg or Config(tol=tol)
    base = comp.base_point() if base_x is None else float(base_x)
    U = InnerIntegral(prob, comp, base, cfg.flow_tol)
    res = classify_improper(_integrand(prob, U), comp.interval, (True, True), tol, c=base,
                            levels=cfg.levels, margin=cfg.margin)
    res.trace["base"] = base
    return res


def region_density_integral(prob: Problem, region: tuple[float, float], tol: float = 1e-8,
                            cfg: Config | None = None) -> IntegralClass:
    """Classify int rho over a region (dominates every component inside it)."""
    cfg = cfg or Config(tol=tol)
    return classify_improper(prob.frho.vec, region, (True, True), tol, levels=cfg.levels, margin=cfg.margin)


def _pipeline(prob: Problem, cfg: Config, density_only: bool) -> ChaosVerdict:
    zs = find_zeros(prob, cfg.zero_grid_n, cfg.max_components)
    report = check_hypotheses(prob, cfg, zs)
    verdict = ChaosVerdict(Verdict.INCONCLUSIVE, hypothesis_report=report, zero_set=zs)
    verdict.caveats.append("assumes rho is p-admissible for F and h; see check_admissibility")
    failed = report.failed()
    if failed:
        verdict.tag = Verdict.HYPOTHESIS_VIOLATED
        verdict.witness = {"kind": "HypothesisViolated", "conditions": failed,
                           "details": {k: report.checks()[k].detail for k in failed}}
        return verdict
    if zs.flat_intervals:
        l, r = zs.flat_intervals[0]
        verdict.tag = Verdict.NOT_CHAOTIC
        verdict.witness = {"kind": "PositiveMeasureZeroSet", "interval": [_num(l), _num(r)]}
        return verdict

    inconclusive = []
    divergent = None
    for comp in components(zs, prob.omega):
        if density_only:
            ic = classify_improper(prob.frho.vec, comp.interval, (True, True), cfg.tol,
                                   c=comp.base_point(), levels=cfg.levels, margin=cfg.margin)
        else:
            try:
                ic = component_integral(prob, comp, tol=cfg.tol, cfg=cfg)
            except (StiffnessError, DomainError, HorizonReached) as exc:
                ic = IntegralClass(Convergence.INCONCLUSIVE, evidence=f"inner integral failed: {exc}")
        verdict.per_component.append((comp, ic))
        if ic.divergent and divergent is None:
            divergent = comp
        elif ic.inconclusive:
            inconclusive.append(comp)

    for region in zs.unenumerated:
        if density_only or prob.re_h_is_zero:
            ic = region_density_integral(prob, region, cfg.tol, cfg)
            verdict.regions.append((region, ic))
            if not ic.convergent:
                inconclusive.append(region)
                verdict.caveats.append(
                    f"integral of rho over the unenumerated region ({region[0]:.6g}, {region[1]:.6g}) is "
                    f"{ic.tag.value}; components inside it are not covered")
        else:
            inconclusive.append(region)
            verdict.caveats.append(
                f"zeros of F accumulate in ({region[0]:.6g}, {region[1]:.6g}) beyond the component cap "
                "and Re h is not identically 0")

    if divergent is not None:
        verdict.tag = Verdict.NOT_CHAOTIC
        verdict.witness = {"kind": "DivergentComponent", "component": divergent.to_dict(),
                           "base_point": divergent.base_point()}
    elif inconclusive:
        verdict.tag = Verdict.INCONCLUSIVE
    else:
        verdict.tag = Verdict.CHAOTIC

    if report.condition_b.status is Status.WARN and verdict.tag is not Verdict.INCONCLUSIVE:
        verdict.caveats.append(f"condition b) not confirmed ({report.condition_b.detail}); "
                               f"criterion would give {verdict.tag.value}")
        verdict.tag = Verdict.INCONCLUSIVE
    for name in report.warned():
        if name != "condition_b":
            verdict.caveats.append(f"{name}: {report.checks()[name].detail}")
    return verdict


def classify_chaos(prob: Problem, cfg: Config | None = None) -> ChaosVerdict:
    """Chaotic / NotChaotic / HypothesisViolated / Inconclusive for T_{F,h} on L^p_rho(Omega)."""
    return _pipeline(prob, cfg or Config(), density_only=False)


def classify_chaos_h_zero(prob: Problem, cfg: Config | None = None) -> ChaosVerdict:
    """Special case h = 0: chaos iff rho is integrable over every component.

    The answer does not depend on p.
    """
    if not (prob.re_h_is_zero and prob.im_h_is_zero):
        raise ValueError("classify_chaos_h_zero needs h identically 0")
    return _pipeline(prob, cfg or Config(), density_only=True)
