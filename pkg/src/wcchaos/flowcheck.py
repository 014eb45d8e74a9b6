"""Flow-based cross-checks of the chaos criterion.

The transported densities are

    rho_{-t,p}(x) = exp(-p int_0^t Re h(phi(s,x)) ds + int_0^t F'(phi(s,x)) ds) rho(phi(t,x)),
    rho_{t,p}(x)  = chi(x in phi(t,Omega)) exp(p B_re(t) - B_F'(t)) rho(phi(-t,x)),

for t >= 0, where B_* integrate along the backward trajectory from x. Their
time integral and their sampled series are computed from the semiflow
alone and compared with the flow-free component integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .criterion import component_integral
from .expr import Num
from .errors import DomainError, HorizonReached, StiffnessError
from .model import Config, Problem
from .quadrature import Convergence, IntegralClass, classify_improper, classify_series, combine_classes
from .semiflow import FlowTrajectory
from .zeroset import Component, components, find_zeros

__all__ = [
    "T_CAP", "T_MAX", "RhoEvaluation", "TransportedDensity", "rho_t_p", "series_sum", "flow_integral",
    "IdentityReport", "verify_integral_identity", "CocycleReport", "verify_cocycle",
    "ComparabilityReport", "comparability_check", "component_of", "sample_seeds", "SuiteReport",
    "run_suite",
]

T_CAP = 1024.0
# flow_integral's horizon after its default two extensions
T_MAX = T_CAP * 4 ** 2
_FLOW_ERRORS = (DomainError, HorizonReached, StiffnessError)


@dataclass(frozen=True)
class RhoEvaluation:
    x: float
    t: float
    value: float
    in_range: bool


class TransportedDensity:
    """t -> rho_{t,p}(x) for one x, backed by lazy forward and backward trajectories."""

    def __init__(self, prob: Problem, x: float, tol: float = 1e-10, t_cap: float = T_CAP):
        self.prob, self.x, self.tol, self.t_cap = prob, float(x), tol, t_cap
        self.forward = FlowTrajectory(prob, x, 1, tol)
        self.backward = FlowTrajectory(prob, x, -1, tol)

    def exit_time(self) -> float | None:
        """sup{t >= 0 : x in phi(t, Omega)} if it is below the time cap and not drift."""
        t = self.backward.exit_time(self.t_cap)
        if t is None or (self.backward.traj is not None and self.backward.traj.drift):
            return None
        return t

    def _branch(self, traj: FlowTrajectory, ts: np.ndarray, sign: int) -> np.ndarray:
        out = np.zeros(ts.size)
        if ts.size == 0:
            return out
        if traj.traj is not None:
            traj.traj.extend(float(ts.max()))
        t_exit = traj.t_exit
        inside = ts < t_exit if t_exit is not None else np.ones(ts.size, dtype=bool)
        if inside.any():
            st = traj.states(ts[inside])
            p = self.prob.p
            with np.errstate(over="ignore", under="ignore"):
                if sign > 0:
                    expo = p * st[:, 1] - st[:, 3]
                else:
                    expo = -p * st[:, 1] + st[:, 3]
                out[inside] = np.exp(expo) * self.prob.frho.vec(st[:, 0])
        if sign < 0 and (~inside).any():
            # forward trajectories stay in Omega; reaching the boundary is numerical drift
            raise HorizonReached(t_exit, "forward trajectory reached the boundary")
        return out

    def __call__(self, ts) -> np.ndarray:
        """rho_{t,p}(x) for signed times."""
        ts = np.asarray(ts, dtype=float)
        flat = ts.ravel()
        out = np.empty(flat.size)
        pos = flat >= 0
        out[pos] = self._branch(self.backward, flat[pos], 1)
        out[~pos] = self._branch(self.forward, -flat[~pos], -1)
        return out.reshape(ts.shape)

    def in_range(self, t: float) -> bool:
        if t <= 0:
            return True
        return not self.backward.exits_by(t)


def rho_t_p(prob: Problem, x: float, t: float, tol: float = 1e-10) -> RhoEvaluation:
    """rho_{t,p}(x) for a signed time t (t < 0 uses the forward flow)."""
    if t == 0:
        return RhoEvaluation(float(x), 0.0, prob.frho(x), True)
    td = TransportedDensity(prob, x, tol)
    value = float(td(np.array([t]))[0])
    return RhoEvaluation(float(x), float(t), value, td.in_range(t))


def _check_seed(prob: Problem, x: float) -> None:
    if not prob.contains(x):
        raise ValueError(f"x = {x!r} is not in omega")
    if prob.fF(x) == 0:
        raise ValueError(f"F({x!r}) = 0: x must lie off the zero set of F")


@dataclass
class SeriesResult:
    classification: IntegralClass
    positive: IntegralClass
    negative: IntegralClass
    partial_sums: list[float] = field(default_factory=list)

    @property
    def tag(self) -> Convergence:
        return self.classification.tag


def series_sum(prob: Problem, x: float, t0: float, K: int | None = None, tol: float = 1e-10,
               series_tol: float = 1e-8) -> SeriesResult:
    """Sum_{|k| <= K} rho_{k t0, p}(x) with a ratio-test classification of both halves.

    Without an explicit K the sum starts at 200 terms per side and doubles,
    while K t0 stays within ``T_CAP``, as long as a half is Inconclusive or
    is called Divergent from its term ratios (a transient rise looks alike).
    An Inconclusive sum keeps doubling up to ``T_MAX``, the longest horizon
    ``flow_integral`` reaches.
    """
    _check_seed(prob, x)
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    adaptive = K is None
    K = 200 if adaptive else K
    while True:
        res = _series(prob, x, t0, K, tol, series_tol)
        reach = 2 * K * t0
        more = (_unsettled(res) and reach <= T_CAP) or (res.tag is Convergence.INCONCLUSIVE and reach <= T_MAX)
        if not (adaptive and more):
            return res
        K *= 2


def _unsettled(res: SeriesResult) -> bool:
    if res.tag is Convergence.INCONCLUSIVE:
        return True
    # non-decaying terms may be a transient; only overflow settles divergence early
    return any(half.divergent and "max_ratio" in half.trace for half in (res.positive, res.negative))


def _series(prob: Problem, x: float, t0: float, K: int, tol: float, series_tol: float) -> SeriesResult:
    td = TransportedDensity(prob, x, tol, t_cap=K * t0)
    ks = np.arange(K + 1) * t0
    try:
        pos_terms = td(ks)
        neg_terms = td(-ks[1:])
    except _FLOW_ERRORS as exc:
        bad = IntegralClass(Convergence.INCONCLUSIVE, evidence=f"flow failed: {exc}")
        return SeriesResult(bad, bad, bad)
    pos = classify_series(pos_terms, series_tol)
    neg = classify_series(np.concatenate([[pos_terms[0]], neg_terms]), series_tol)
    total = combine_classes([pos, neg])
    if total.convergent:
        total = IntegralClass(Convergence.CONVERGENT, pos.value + neg.value - pos_terms[0],
                              pos.error_estimate + neg.error_estimate, total.evidence)
    with np.errstate(over="ignore"):
        partial = np.cumsum(pos_terms + np.concatenate([[0.0], neg_terms]))
    return SeriesResult(total, pos, neg, partial.tolist())


def flow_integral(prob: Problem, x: float, tol: float = 1e-8, flow_tol: float = 1e-10,
                  t_cap: float = T_CAP, extend: int = 2) -> IntegralClass:
    """Classify int_R rho_{t,p}(x) dt from the semiflow alone.

    An Inconclusive answer is retried up to ``extend`` times with a four
    times longer horizon, for slow dynamics near an equilibrium.
    """
    _check_seed(prob, x)
    for _ in range(extend + 1):
        out = _flow_integral(prob, x, tol, flow_tol, t_cap)
        if not out.inconclusive:
            break
        t_cap *= 4
    return out


def _flow_integral(prob: Problem, x: float, tol: float, flow_tol: float, t_cap: float) -> IntegralClass:
    td = TransportedDensity(prob, x, flow_tol, t_cap)
    try:
        t_star = td.exit_time()
    except _FLOW_ERRORS as exc:
        return IntegralClass(Convergence.INCONCLUSIVE, evidence=f"backward flow failed: {exc}")
    # t > 0: up to the exit time of the backward trajectory, or an infinite tail
    if t_star is not None:
        pos = classify_improper(td, (0.0, t_star), (False, True), tol)
        pos.evidence = f"t>0 on [0, {t_star:.12g}): " + pos.evidence
    else:
        horizon = td.backward.exit_time(t_cap) or t_cap
        pos = classify_improper(td, (0.0, math.inf), (False, True), tol, horizon=(None, horizon))
        pos.evidence = "t>0: " + pos.evidence
    neg = classify_improper(lambda s: td(-np.asarray(s)), (0.0, math.inf), (False, True), tol,
                            horizon=(None, t_cap))
    neg.evidence = "t<0: " + neg.evidence
    out = combine_classes([pos, neg], tol)
    out.trace = {"t_star": t_star, "t_cap": t_cap, "positive": pos.to_dict(), "negative": neg.to_dict()}
    return out


def component_of(prob: Problem, x: float, cfg: Config | None = None) -> Component:
    cfg = cfg or Config()
    zs = find_zeros(prob, cfg.zero_grid_n, cfg.max_components)
    for comp in components(zs, prob.omega):
        if comp.contains(x):
            return comp
    raise ValueError(f"x = {x!r} is not inside an enumerated component")


@dataclass
class IdentityReport:
    x: float
    flow_side: IntegralClass
    criterion_side: IntegralClass
    residual: float | None

    @property
    def tags_agree(self) -> bool:
        return self.flow_side.tag is self.criterion_side.tag

    def to_dict(self) -> dict:
        return {"x": self.x, "flow": self.flow_side.to_dict(), "criterion": self.criterion_side.to_dict(),
                "residual": self.residual, "tags_agree": self.tags_agree}


def verify_integral_identity(prob: Problem, x: float, tol: float = 1e-8, cfg: Config | None = None,
                             comp: Component | None = None) -> IdentityReport:
    """Compare int_R rho_{t,p}(x) dt with (1/|F(x)|) int_C exp(-p int_x^w Re h/F) rho dw."""
    cfg = cfg or Config(tol=tol)
    _check_seed(prob, x)
    comp = comp or component_of(prob, x, cfg)
    left = flow_integral(prob, x, tol, cfg.flow_tol)
    right = component_integral(prob, comp, x, tol, cfg).scaled(1.0 / abs(prob.fF(x)))
    residual = None
    if left.convergent and right.convergent:
        residual = abs(left.value - right.value) / max(abs(right.value), 1e-300)
    return IdentityReport(float(x), left, right, residual)


@dataclass
class CocycleReport:
    x: float
    s: float
    t: float
    forward_residual: float
    backward_residual: float
    backward_in_range: bool

    @property
    def worst(self) -> float:
        return max(self.forward_residual, self.backward_residual)


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def verify_cocycle(prob: Problem, x: float, s: float, t: float, tol: float = 1e-10) -> CocycleReport:
    """Residuals of the composition identities for rho_{-(t+s),p} and rho_{t+s,p}."""
    if s < 0 or t < 0:
        raise ValueError("s and t must be nonnegative")
    p = prob.p
    td = TransportedDensity(prob, x, tol)
    # forward: rho_{-(t+s)}(x) = exp(int_0^s F' - p Re h) rho_{-t}(phi(s, x))
    lhs = float(td(np.array([-(t + s)]))[0])
    st = td.forward.states([s])[0]
    y = float(st[0])
    inner = float(TransportedDensity(prob, y, tol)(np.array([-t]))[0]) if t > 0 else prob.frho(y)
    rhs = math.exp(st[3] - p * st[1]) * inner
    fwd = _rel(lhs, rhs)

    # backward: rho_{t+s}(x) = chi_{phi(s,Omega)}(x) exp(int_{-s}^0 p Re h - F') rho_t(phi(-s, x))
    lhs2 = float(td(np.array([t + s]))[0])
    in_range = td.in_range(s)
    if not in_range:
        rhs2 = 0.0
    else:
        b = td.backward.states([s])[0]
        y2 = float(b[0])
        inner2 = float(TransportedDensity(prob, y2, tol)(np.array([t]))[0]) if t > 0 else prob.frho(y2)
        rhs2 = math.exp(p * b[1] - b[3]) * inner2
    bwd = _rel(lhs2, rhs2)
    if lhs2 == 0.0 or rhs2 == 0.0:
        # the indicator decides; a sliver where the two exit times disagree within tolerance counts as 0
        t_exit = td.backward.t_exit
        if t_exit is not None and abs(t_exit - (t + s)) <= 1e3 * tol * (1 + t + s):
            bwd = 0.0
    return CocycleReport(float(x), float(s), float(t), fwd, bwd, in_range)


@dataclass
class ComparabilityReport:
    constant: float
    rho_constant: float
    alpha: float
    beta: float
    bounded: bool
    samples: int


def comparability_check(prob: Problem, interval: tuple[float, float], times: Sequence[float],
                        n: int = 9, tol: float = 1e-10) -> ComparabilityReport:
    """Smallest C with rho_{t,p}(alpha)/C <= rho_{t,p}(x) <= C rho_{t,p}(beta) on the samples.

    alpha is the end of [a, b] the flow moves away from and beta the end it
    moves toward; the weight is replaced by its real part.
    """
    a, b = map(float, interval)
    if a > b:
        raise ValueError("need a <= b")
    real = replace(prob, h_im=Num(0.0))
    sign = np.sign(real.fF(0.5 * (a + b)))
    alpha, beta = (a, b) if sign > 0 else (b, a)
    xs = np.linspace(a, b, n) if b > a else np.array([a])
    ts = np.asarray(times, dtype=float)
    rho_x = real.frho.vec(xs)
    rho_c = float(max(rho_x.max(), 1.0 / rho_x.min()))
    at_alpha = TransportedDensity(real, alpha, tol)(ts)
    at_beta = TransportedDensity(real, beta, tol)(ts)
    worst = 1.0
    count = 0
    for x in xs:
        vals = TransportedDensity(real, x, tol)(ts)
        for va, vx, vb in zip(at_alpha, vals, at_beta):
            count += 1
            if va > 0:
                worst = max(worst, va / vx if vx > 0 else math.inf)
            if vx > 0:
                worst = max(worst, vx / vb if vb > 0 else math.inf)
    return ComparabilityReport(worst, rho_c, alpha, beta, math.isfinite(worst), count)


def sample_seeds(comp: Component, n: int, rng: np.random.Generator) -> np.ndarray:
    """n points spread over a component, kept away from its ends."""
    l, r = comp.interval
    u = rng.uniform(0.05, 0.95, n)
    if math.isfinite(l) and math.isfinite(r):
        return l + (r - l) * u
    if math.isfinite(l):
        return l + 4.0 * u
    if math.isfinite(r):
        return r - 4.0 * u
    return -3.0 + 6.0 * u


@dataclass
class SuiteReport:
    """Outcome of the flow-based cross-checks on sampled seeds."""

    seeds: list[float] = field(default_factory=list)
    series: list[dict] = field(default_factory=list)
    identity: list[dict] = field(default_factory=list)
    cocycle: list[dict] = field(default_factory=list)
    comparability: list[dict] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"passed": self.passed, "seeds": self.seeds, "series_vs_integral": self.series,
                "identity": self.identity, "cocycle": self.cocycle, "comparability": self.comparability,
                "failures": self.failures, "warnings": self.warnings}


def _definite(tag: Convergence) -> bool:
    return tag is not Convergence.INCONCLUSIVE


def run_suite(prob: Problem, cfg: Config | None = None, seeds_per_component: int = 2,
              t0s: Sequence[float] = (0.25, 1.0, 3.0), n_cocycle: int = 4, max_components: int = 3,
              identity_tol: float = 1e-5, cocycle_tol: float = 1e-6) -> SuiteReport:
    """Series vs integral tags, the integral identity, cocycle residuals and comparability.

    Components are taken nearest the anchor of Omega; seeds and (s, t) pairs
    come from ``cfg.seed``. A definite disagreement or a residual above its
    tolerance is a failure; an Inconclusive side is only a warning.
    """
    cfg = cfg or Config()
    rng = np.random.default_rng(cfg.seed)
    zs = find_zeros(prob, cfg.zero_grid_n, cfg.max_components)
    comps = components(zs, prob.omega)
    centre = np.mean([c.base_point() for c in comps]) if comps else 0.0
    comps = sorted(comps, key=lambda c: abs(c.base_point() - centre))[:max_components]
    rep = SuiteReport()
    for comp in comps:
        for x in sample_seeds(comp, seeds_per_component, rng):
            x = float(x)
            rep.seeds.append(x)
            idr = verify_integral_identity(prob, x, cfg.tol, cfg, comp)
            rep.identity.append(idr.to_dict())
            flow_tag, crit_tag = idr.flow_side.tag, idr.criterion_side.tag
            if _definite(flow_tag) and _definite(crit_tag) and flow_tag is not crit_tag:
                rep.failures.append(f"x={x:.6g}: flow integral {flow_tag.value} but component integral "
                                    f"{crit_tag.value}")
            elif not (_definite(flow_tag) and _definite(crit_tag)):
                rep.warnings.append(f"x={x:.6g}: identity sides {flow_tag.value}/{crit_tag.value}")
            if idr.residual is not None and idr.residual > identity_tol:
                rep.failures.append(f"x={x:.6g}: identity residual {idr.residual:.3g} > {identity_tol:g}")

            for t0 in t0s:
                sr = series_sum(prob, x, t0, tol=cfg.flow_tol)
                rep.series.append({"x": x, "t0": t0, "series": sr.tag.value, "integral": flow_tag.value})
                if _definite(sr.tag) and _definite(flow_tag) and sr.tag is not flow_tag:
                    rep.failures.append(f"x={x:.6g}, t0={t0:g}: series {sr.tag.value} but integral "
                                        f"{flow_tag.value}")
                elif not _definite(sr.tag):
                    rep.warnings.append(f"x={x:.6g}, t0={t0:g}: series Inconclusive")

            for s, t in rng.uniform(0.0, 2.0, (n_cocycle, 2)):
                try:
                    cr = verify_cocycle(prob, x, float(s), float(t), cfg.flow_tol)
                except _FLOW_ERRORS as exc:
                    rep.warnings.append(f"x={x:.6g}: cocycle skipped ({exc})")
                    continue
                rep.cocycle.append({"x": x, "s": cr.s, "t": cr.t, "forward": cr.forward_residual,
                                    "backward": cr.backward_residual})
                if cr.worst > cocycle_tol:
                    rep.failures.append(f"x={x:.6g}, s={cr.s:.4g}, t={cr.t:.4g}: cocycle residual "
                                        f"{cr.worst:.3g} > {cocycle_tol:g}")

            half = 0.05 * min(1.0, comp.interval[1] - comp.interval[0])
            lo, hi = max(x - half, comp.interval[0]), min(x + half, comp.interval[1])
            if lo < hi and comp.contains(lo) and comp.contains(hi):
                cmp = comparability_check(prob, (lo, hi), [-1.0, -0.5, 0.0, 0.5, 1.0], n=5, tol=cfg.flow_tol)
                rep.comparability.append({"interval": [lo, hi], "constant": cmp.constant,
                                          "bounded": cmp.bounded})
                if not cmp.bounded:
                    rep.failures.append(f"x={x:.6g}: comparability constant unbounded on [{lo:.6g}, {hi:.6g}]")
    return rep
