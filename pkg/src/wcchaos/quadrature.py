"""Adaptive Gauss-Kronrod integration and three-way classification of improper integrals.

The classifier walks dyadic shells toward each singular or infinite endpoint.
For a finite endpoint ``a`` the shell boundaries are ``a + eps0 * 2**-k``;
for an infinite endpoint they are ``c + R0 * 2**k``.  With shell integrals
``d_k`` the decay rate ``kappa_k = log2(d_{k-1} / d_k)`` is positive when the
shells shrink.  A power law ``f ~ dist**s`` gives ``kappa = -(s + 1)`` at a
finite endpoint and ``kappa = s + 1`` at infinity, so ``|kappa| <= margin``
is the band around the borderline exponent -1 that is reported as
Inconclusive.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, HorizonReached, MaxSubdivisionsError, StiffnessError

__all__ = [
    "Convergence", "IntegralClass", "integrate", "classify_improper", "classify_series",
    "combine_classes",
]

# 15-point Kronrod abscissae (positive half, descending) and weights, with
# the embedded 7-point Gauss weights for the odd-indexed abscissae.
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # ascending, 15 points
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[[9, 11, 13]] = _WG[:3][::-1]
_WG15[7] = _WG[3]

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny


class Convergence(str, Enum):
    CONVERGENT = "Convergent"
    DIVERGENT = "Divergent"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class IntegralClass:
    tag: Convergence
    value: float | None = None
    error_estimate: float = math.inf
    evidence: str = ""
    trace: dict = field(default_factory=dict)

    @property
    def convergent(self) -> bool:
        return self.tag is Convergence.CONVERGENT

    @property
    def divergent(self) -> bool:
        return self.tag is Convergence.DIVERGENT

    @property
    def inconclusive(self) -> bool:
        return self.tag is Convergence.INCONCLUSIVE

    def scaled(self, factor: float) -> "IntegralClass":
        if self.value is None:
            return self
        return IntegralClass(self.tag, self.value * factor, self.error_estimate * abs(factor),
                             self.evidence, self.trace)

    def to_dict(self) -> dict:
        return {
            "tag": self.tag.value,
            "value": self.value,
            "error_estimate": None if not math.isfinite(self.error_estimate) else self.error_estimate,
            "evidence": self.evidence,
        }


def _gk15(f: Callable, lo: np.ndarray, hi: np.ndarray):
    """Kronrod estimate, error estimate and |f| integral on each [lo_i, hi_i]."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[:, None] + half[:, None] * _NODES[None, :]
    vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    with np.errstate(all="ignore"):
        return _gk15_rule(vals, half)


def _gk15_rule(vals: np.ndarray, half: np.ndarray):
    resk = vals @ _WK
    resg = vals @ _WG15
    mean = 0.5 * resk
    resabs = np.abs(vals) @ _WK
    resasc = np.abs(vals - mean[:, None]) @ _WK
    err = np.abs((resk - resg) * half)
    resasc = resasc * np.abs(half)
    resabs = resabs * np.abs(half)
    scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc != 0) & (err != 0), scaled, err)
    err = np.where(resabs > _TINY / (50 * _EPS), np.maximum(50 * _EPS * resabs, err), err)
    return resk * half, err


def integrate(f: Callable, a: float, b: float, tol: float = 1e-10, *,
              atol: float | None = None, rtol: float | None = None,
              limit: int = 100_000) -> tuple[float, float]:
    """Globally adaptive 15-point Gauss-Kronrod quadrature of a vectorized ``f``.

    Subdivides until the summed error estimate is at most
    ``atol + rtol * |value|`` (both default to ``tol``).  Raises
    :class:`MaxSubdivisionsError` after ``limit`` subdivisions.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("integrate needs finite limits")
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    atol = tol if atol is None else atol
    rtol = tol if rtol is None else rtol

    val, err = _gk15(f, np.array([a]), np.array([b]))
    # heap of (-error, lo, hi, value, error)
    heap = [(-err[0], a, b, val[0], err[0])]
    total, total_err = float(val[0]), float(err[0])
    frozen_val = 0.0
    frozen_err = 0.0
    splits = 0
    while True:
        if not math.isfinite(total):
            return sign * total, math.inf
        target = max(atol + rtol * abs(total), 0.0)
        if total_err <= target or not heap:
            break
        # split the worst intervals that together carry the excess error
        excess = total_err - target
        batch = []
        acc = 0.0
        while heap and (acc < excess or not batch) and len(batch) < 256:
            item = heapq.heappop(heap)
            batch.append(item)
            acc += item[4]
        los, his = [], []
        for _, lo, hi, v, e in batch:
            mid = 0.5 * (lo + hi)
            if not (lo < mid < hi) or (hi - lo) <= 8 * _EPS * max(abs(lo), abs(hi), _TINY):
                # cannot be refined further in floating point
                frozen_val += v
                frozen_err += e
                continue
            los += [lo, mid]
            his += [mid, hi]
        if not los:
            total = math.fsum(item[3] for item in heap) + frozen_val
            total_err = math.fsum(item[4] for item in heap) + frozen_err
            if not heap:
                break
            continue
        splits += len(los) // 2
        if splits > limit:
            raise MaxSubdivisionsError(sign * total, total_err, limit)
        lo_arr, hi_arr = np.array(los), np.array(his)
        v_new, e_new = _gk15(f, lo_arr, hi_arr)
        for lo, hi, v, e in zip(lo_arr, hi_arr, v_new, e_new):
            heapq.heappush(heap, (-e, lo, hi, v, e))
        total = math.fsum(item[3] for item in heap) + frozen_val
        total_err = math.fsum(item[4] for item in heap) + frozen_err
    return sign * total, total_err


# ---------------------------------------------------------------- classification

@dataclass
class _Tail:
    tag: Convergence
    value: float = 0.0
    error: float = 0.0
    note: str = ""
    kappas: list = field(default_factory=list)
    s_fit: float | None = None
    levels: int = 0
    sign_change: bool = False


def _fit_exponent(xs: np.ndarray, fs: np.ndarray, dist: np.ndarray) -> float | None:
    ok = (fs != 0) & np.isfinite(fs) & (dist > 0)
    if ok.sum() < 2:
        return None
    slope = np.polyfit(np.log(dist[ok]), np.log(np.abs(fs[ok])), 1)[0]
    return float(slope)


def _classify_tail(f, end: float, c: float, infinite: bool, direction: int, *, tol: float,
                   eps0: float, R0: float, levels: int, margin: float, noise: float,
                   horizon: float | None, shell_rtol: float, window: int) -> _Tail:
    """Shells from the base point ``c`` toward ``end`` (direction -1 is leftward)."""
    bounds = []
    if infinite:
        for k in range(levels + 1):
            x = c + direction * R0 * 2.0 ** k
            if horizon is not None and abs(x - c) > abs(horizon - c):
                break
            bounds.append(x)
    else:
        floor = max(2.0 ** 26 * _EPS * abs(end), 1e-300)
        for k in range(levels + 1):
            d = eps0 * 2.0 ** -k
            if d < floor:
                break
            bounds.append(end - direction * d)
    incs: list[float] = []
    errs: list[float] = []
    kappas: list[float] = []
    note = ""
    running = 0.0
    for k in range(len(bounds) - 1):
        lo, hi = sorted((bounds[k], bounds[k + 1]))
        try:
            v, e = integrate(f, lo, hi, atol=1e-300, rtol=shell_rtol, limit=2000)
        except (HorizonReached, StiffnessError) as exc:
            note = f"stopped at shell {k}: {exc}"
            break
        except MaxSubdivisionsError as exc:
            v, e = exc.value, exc.error
        if not math.isfinite(v):
            return _Tail(Convergence.DIVERGENT, note=f"integrand overflow in shell {k}",
                         kappas=kappas, levels=len(incs))
        incs.append(v)
        errs.append(e)
        running += v
        if len(incs) >= 2:
            p, q = abs(incs[-2]), abs(incs[-1])
            if p > 0 and q > 0:
                kappas.append(math.log2(p / q))
            elif p > 0:
                kappas.append(math.inf)
            elif q > 0:
                kappas.append(-math.inf)
            else:
                kappas.append(math.inf)
        # early exit once the remaining tail is negligible
        if (len(kappas) >= window and min(kappas[-3:]) > margin
                and abs(incs[-1]) <= 1e-17 * max(abs(running), _TINY)):
            break
        if len(incs) >= 3 and incs[-1] == 0 and incs[-2] == 0 and incs[-3] == 0:
            break

    nlev = len(incs)
    tail = _Tail(Convergence.INCONCLUSIVE, kappas=kappas, levels=nlev, note=note)
    signs = {np.sign(v) for v in incs if v != 0}
    if len(signs) > 1:
        tail.sign_change = True
        return tail
    if nlev == 0:
        tail.note = (note + "; " if note else "") + "no shells evaluated"
        return tail
    if all(v == 0 for v in incs[-3:]) and nlev >= 3:
        tail.tag = Convergence.CONVERGENT
        tail.value = math.fsum(incs)
        tail.error = math.fsum(errs)
        return tail
    if len(kappas) < 3:
        tail.note = (note + "; " if note else "") + "too few shells to classify"
        return tail
    last = kappas[-window:]
    # fitted local exponent of f over the last shells
    pts = np.array(bounds[max(0, nlev + 1 - window):nlev + 1])
    try:
        fs = np.asarray(f(pts), dtype=float)
    except (DomainError, HorizonReached, StiffnessError):
        fs = np.full(len(pts), np.nan)
    tail.s_fit = _fit_exponent(pts, fs, np.abs(pts - (c if infinite else end)))

    # a sequence cut short (horizon, early exit) whose last shells shrink and carry no mass
    settled = min(kappas[-3:]) > margin and abs(incs[-1]) <= tol * max(abs(math.fsum(incs)), _TINY)
    if min(last) > margin or settled:
        r1 = 2.0 ** -kappas[-1] if math.isfinite(kappas[-1]) else 0.0
        r2 = 2.0 ** -kappas[-2] if math.isfinite(kappas[-2]) else 0.0
        t1 = incs[-1] * r1 / (1 - r1)
        t2 = incs[-1] * r2 / (1 - r2)
        tail.tag = Convergence.CONVERGENT
        tail.value = math.fsum(incs) + t1
        tail.error = math.fsum(errs) + abs(t1 - t2)
        return tail
    if max(last) <= noise:
        s = tail.s_fit
        cut = infinite and horizon is not None and len(bounds) < levels + 1
        if cut and max(last) - min(last) > 2 * margin:
            # a transient can look like non-decay until the horizon; only a steady exponent counts
            tail.note = (note + "; " if note else "") + "shells still changing at the horizon"
            return tail
        if s is None:
            consistent = True
        elif infinite:
            consistent = s >= -1 - margin
        else:
            consistent = s <= -1 + margin
        if consistent:
            tail.tag = Convergence.DIVERGENT
            return tail
        tail.note = (note + "; " if note else "") + f"shells do not shrink but fitted exponent {s:.3g} disagrees"
        return tail
    tail.note = (note + "; " if note else "") + "borderline decay"
    return tail


def _fmt_kappas(ks: Sequence[float]) -> str:
    return "[" + ", ".join(f"{k:.3g}" for k in ks) + "]"


def classify_improper(f: Callable, interval: tuple[float, float],
                      singular: tuple[bool, bool] = (True, True), tol: float = 1e-8, *,
                      c: float | None = None, eps0: float | None = None, R0: float | None = None,
                      levels: int = 40, margin: float = 0.05, noise: float = 1e-3,
                      horizon: tuple[float | None, float | None] = (None, None),
                      shell_rtol: float = 1e-11, window: int = 8,
                      absolute: bool = False) -> IntegralClass:
    """Decide whether the integral of a vectorized ``f`` over ``interval`` is finite.

    Finite endpoints flagged in ``singular`` and infinite endpoints get the
    dyadic shell test; the others are integrated directly.  ``horizon``
    bounds how far toward an infinite endpoint ``f`` may be evaluated (used
    for time integrals whose trajectories stop early).  Evaluation failures
    in ``f`` give Inconclusive.
    """
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise ValueError("empty interval")
    g = (lambda w: np.abs(f(w))) if absolute else f
    if c is None:
        if math.isfinite(a) and math.isfinite(b):
            c = 0.5 * (a + b)
        elif math.isfinite(a):
            c = a + 1.0
        elif math.isfinite(b):
            c = b - 1.0
        else:
            c = 0.0
    if not a < c < b:
        raise ValueError("base point must lie inside the interval")
    if R0 is None:
        R0 = max(1.0, abs(c))

    parts: list[tuple[str, _Tail]] = []
    middle_lo, middle_hi = c, c
    notes = []
    try:
        for side, end, sing, hz in (("left", a, singular[0], horizon[0]), ("right", b, singular[1], horizon[1])):
            direction = -1 if side == "left" else 1
            infinite = not math.isfinite(end)
            if not infinite and not sing:
                v, e = integrate(g, *sorted((end, c)), atol=tol * 1e-3, rtol=min(tol, shell_rtol * 10))
                parts.append((side, _Tail(Convergence.CONVERGENT, value=v, error=e, note="proper")))
                continue
            e0 = abs(c - end) / 8.0 if eps0 is None else eps0
            if infinite:
                edge = c + direction * R0
                if hz is not None and abs(hz - c) < R0:
                    edge = hz
            else:
                edge = end - direction * e0
            v, e = integrate(g, *sorted((c, edge)), atol=1e-300, rtol=shell_rtol)
            if not math.isfinite(v):
                return IntegralClass(Convergence.DIVERGENT, evidence=f"{side}: integrand overflow near base point")
            tail = _classify_tail(g, end, c, infinite, direction, tol=tol, eps0=e0, R0=R0, levels=levels,
                                  margin=margin, noise=noise, horizon=hz, shell_rtol=shell_rtol, window=window)
            if tail.sign_change and not absolute:
                res = classify_improper(f, interval, singular, tol, c=c, eps0=eps0, R0=R0, levels=levels,
                                        margin=margin, noise=noise, horizon=horizon, shell_rtol=shell_rtol,
                                        window=window, absolute=True)
                res.evidence = "sign changes in the tail; classified |f|. " + res.evidence
                res.trace["absolute"] = True
                return res
            tail.value += v
            tail.error += e
            parts.append((side, tail))
    except DomainError as exc:
        return IntegralClass(Convergence.INCONCLUSIVE, evidence=f"evaluation failed: {exc}")
    except MaxSubdivisionsError as exc:
        return IntegralClass(Convergence.INCONCLUSIVE, evidence=f"quadrature failed: {exc}")
    except (HorizonReached, StiffnessError) as exc:
        return IntegralClass(Convergence.INCONCLUSIVE, evidence=f"integrand unavailable: {exc}")

    trace = {}
    for side, t in parts:
        trace[side] = {"tag": t.tag.value, "kappas": t.kappas[-8:], "s_fit": t.s_fit, "levels": t.levels}
        if t.note and t.note != "proper":
            notes.append(f"{side}: {t.note}")
        if t.kappas:
            notes.append(f"{side} kappa={_fmt_kappas(t.kappas[-8:])}" + (f" s={t.s_fit:.4g}" if t.s_fit is not None else ""))
    evidence = "; ".join(notes)
    tags = [t.tag for _, t in parts]
    if Convergence.DIVERGENT in tags:
        bad = [s for s, t in parts if t.tag is Convergence.DIVERGENT]
        return IntegralClass(Convergence.DIVERGENT, evidence=f"divergent toward {', '.join(bad)}; " + evidence,
                             trace=trace)
    if Convergence.INCONCLUSIVE in tags:
        return IntegralClass(Convergence.INCONCLUSIVE, evidence=evidence, trace=trace)
    value = math.fsum(t.value for _, t in parts)
    error = math.fsum(t.error for _, t in parts)
    if error > tol * (1 + abs(value)):
        return IntegralClass(Convergence.INCONCLUSIVE, value, error,
                             evidence=f"tail not resolved to tolerance (error {error:.3g}); " + evidence, trace=trace)
    return IntegralClass(Convergence.CONVERGENT, value, error, evidence=evidence, trace=trace)


def classify_series(terms: Sequence[float], tol: float = 1e-8, *, window: int = 8,
                    noise: float = 1e-3) -> IntegralClass:
    """Ratio test on the tail of a series of non-negative terms."""
    a = np.asarray(terms, dtype=float)
    if a.size == 0:
        return IntegralClass(Convergence.INCONCLUSIVE, evidence="no terms")
    if not np.all(np.isfinite(a)):
        return IntegralClass(Convergence.DIVERGENT, evidence="term overflow")
    a = np.abs(a)
    s = math.fsum(a)
    if a.size >= 3 and np.all(a[-3:] == 0):
        return IntegralClass(Convergence.CONVERGENT, s, 0.0, evidence="terms vanish")
    if a.size < window + 1:
        return IntegralClass(Convergence.INCONCLUSIVE, evidence=f"only {a.size} terms")
    tail = a[-(window + 1):]
    if np.any(tail[:-1] == 0):
        return IntegralClass(Convergence.INCONCLUSIVE, evidence="intermittent zero terms")
    ratios = tail[1:] / tail[:-1]
    if np.all(ratios >= 1 - noise):
        return IntegralClass(Convergence.DIVERGENT, evidence=f"terms do not decay (ratios {ratios.min():.4g}..{ratios.max():.4g})",
                             trace={"max_ratio": float(ratios.max())})
    if np.all(ratios < 1):
        r1, r2 = ratios[-1], ratios[-2]
        t1 = a[-1] * r1 / (1 - r1)
        t2 = a[-1] * r2 / (1 - r2)
        value = s + t1
        err = abs(t1 - t2) + 1e-15 * value * a.size
        if err <= tol * (1 + value):
            return IntegralClass(Convergence.CONVERGENT, value, err, evidence=f"geometric tail ratio {r1:.4g}")
        return IntegralClass(Convergence.INCONCLUSIVE, value, err,
                             evidence=f"ratios {ratios.min():.4g}..{ratios.max():.4g} not settled")
    return IntegralClass(Convergence.INCONCLUSIVE, evidence=f"ratios {ratios.min():.4g}..{ratios.max():.4g} straddle 1")


def combine_classes(parts: Sequence[IntegralClass], tol: float = 1e-8) -> IntegralClass:
    """Sum of independent integrals: Divergent dominates, then Inconclusive."""
    if any(p.divergent for p in parts):
        return IntegralClass(Convergence.DIVERGENT, evidence="; ".join(p.evidence for p in parts if p.divergent))
    if any(p.inconclusive for p in parts):
        return IntegralClass(Convergence.INCONCLUSIVE, evidence="; ".join(p.evidence for p in parts if p.inconclusive))
    value = math.fsum(p.value for p in parts)
    err = math.fsum(p.error_estimate for p in parts)
    return IntegralClass(Convergence.CONVERGENT, value, err, evidence="; ".join(p.evidence for p in parts))
