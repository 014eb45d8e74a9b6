"""Zeros of F on Omega and the connected components of Omega minus {F = 0}."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .grids import anchor, audit_grid

if TYPE_CHECKING:
    from .model import Problem

__all__ = ["ZeroSet", "Component", "find_zeros", "components", "bisect_roots"]

ZERO_REL = 1e-12
FLAT_REL = 1e-10
SUBSAMPLES = 16


@dataclass
class ZeroSet:
    omega: tuple[float, float]
    isolated_zeros: list[float]
    flat_intervals: list[tuple[float, float]]
    accumulation: tuple[bool, bool] = (False, False)
    truncated: bool = False
    unenumerated: list[tuple[float, float]] = field(default_factory=list)
    scale: float = 0.0
    # F itself, for signs of components
    sign_of: object = None

    @property
    def all_zeros(self) -> list[float]:
        return list(self.isolated_zeros)

    @property
    def has_positive_measure(self) -> bool:
        return bool(self.flat_intervals)

    def to_dict(self) -> dict:
        return {
            "isolated_zeros": [float(z) for z in self.isolated_zeros],
            "flat_intervals": [[_num(a), _num(b)] for a, b in self.flat_intervals],
            "accumulation": list(self.accumulation),
            "truncated": self.truncated,
            "unenumerated": [[_num(a), _num(b)] for a, b in self.unenumerated],
        }


def _num(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


@dataclass(frozen=True)
class Component:
    """Maximal open interval of Omega on which F has one sign."""

    interval: tuple[float, float]
    sign: int
    kinds: tuple[str, str]  # each "zero", "boundary" or "infinite"

    def base_point(self) -> float:
        """Midpoint, or unit distance from the finite end, or 0."""
        return anchor(self.interval)

    def contains(self, x: float) -> bool:
        return self.interval[0] < x < self.interval[1]

    def to_dict(self) -> dict:
        return {"interval": [_num(self.interval[0]), _num(self.interval[1])], "sign": self.sign,
                "endpoint_kinds": list(self.kinds)}


def bisect_roots(f, lo: np.ndarray, hi: np.ndarray, rel: float = 1e-13, iters: int = 200) -> np.ndarray:
    """Vectorized bisection for sign changes of f on [lo, hi]."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    if lo.size == 0:
        return lo
    flo = np.sign(f(lo))
    for _ in range(iters):
        width = hi - lo
        if np.all(width <= rel * np.maximum(np.abs(lo), np.abs(hi)) + 1e-300):
            break
        mid = 0.5 * (lo + hi)
        fm = np.sign(f(mid))
        left = fm == flo
        lo = np.where(left, mid, lo)
        hi = np.where(left, hi, mid)
        zero = fm == 0
        lo = np.where(zero, mid, lo)
        hi = np.where(zero, mid, hi)
    return 0.5 * (lo + hi)


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True as inclusive index pairs."""
    if not mask.any():
        return []
    d = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def find_zeros(prob: "Problem", grid_n: int = 8192, cap: int = 64) -> ZeroSet:
    """Scan F on a clustered grid, refine sign changes, detect flat runs and touching zeros."""
    if grid_n < 64:
        raise ValueError("grid_n must be at least 64")
    a, b = prob.omega
    fF, fFp = prob.fF.vec, prob.fFp.vec
    xs = audit_grid(prob.omega, grid_n)
    Fv = fF(xs)
    Fpv = fFp(xs)
    scale = float(np.max(np.abs(Fv)))
    pscale = float(np.max(np.abs(Fpv)))
    tol_zero = ZERO_REL * scale
    tol_flat = FLAT_REL * scale
    tol_fp = FLAT_REL * pscale

    # flat runs: F and F' both negligible on >= 3 grid points and on sub-samples between them
    flat = []
    flat_mask = (np.abs(Fv) <= tol_flat) & (np.abs(Fpv) <= tol_fp)
    in_flat = np.zeros(xs.size, dtype=bool)
    for i, j in _runs(flat_mask):
        if j - i + 1 < 3:
            continue
        theta = np.linspace(0, 1, SUBSAMPLES + 2)[1:-1]
        sub = (xs[i:j, None] + theta[None, :] * (xs[i + 1:j + 1] - xs[i:j])[:, None]).ravel()
        if np.all(np.abs(fF(sub)) <= tol_flat):
            l = a if i == 0 else xs[i]
            r = b if j == xs.size - 1 else xs[j]
            flat.append((float(l), float(r)))
            in_flat[i:j + 1] = True

    zeros = []
    sgn = np.sign(Fv)
    change = (sgn[:-1] * sgn[1:] < 0) & ~in_flat[:-1] & ~in_flat[1:]
    idx = np.flatnonzero(change)
    zeros.extend(bisect_roots(fF, xs[idx], xs[idx + 1]).tolist())
    exact = (Fv == 0) & ~in_flat
    zeros.extend(xs[exact].tolist())

    # zeros without a sign change: local minima of |F| where F' changes sign
    absF = np.abs(Fv)
    interior = np.arange(1, xs.size - 1)
    loc = interior[(absF[interior] <= absF[interior - 1]) & (absF[interior] <= absF[interior + 1])
                   & ~in_flat[interior] & (sgn[interior - 1] == sgn[interior + 1]) & (sgn[interior] != 0)]
    if loc.size:
        fl, fr = Fpv[loc - 1], Fpv[loc + 1]
        ok = np.sign(fl) * np.sign(fr) < 0
        loc = loc[ok]
        crit = bisect_roots(fFp, xs[loc - 1], xs[loc + 1])
        if crit.size:
            touch = np.abs(fF(crit)) <= tol_zero
            zeros.extend(crit[touch].tolist())

    zeros = sorted(set(zeros))
    merged: list[float] = []
    for z in zeros:
        if merged and abs(z - merged[-1]) <= 1e-12 * max(1.0, abs(z)):
            continue
        if any(l <= z <= r for l, r in flat):
            continue
        merged.append(z)

    # keep the `cap` zeros nearest the anchor on each side
    c = anchor(prob.omega)
    left = [z for z in merged if z < c]
    right = [z for z in merged if z >= c]
    accumulation = [False, False]
    unenumerated = []
    if len(left) > cap:
        left = left[-cap:]
        accumulation[0] = True
        unenumerated.append((a, left[0]))
    if len(right) > cap:
        right = right[:cap]
        accumulation[1] = True
        unenumerated.append((right[-1], b))
    kept = left + right
    flat = [iv for iv in flat if not any(u[0] <= iv[0] and iv[1] <= u[1] for u in unenumerated)]
    return ZeroSet(prob.omega, kept, flat, tuple(accumulation), any(accumulation), unenumerated,
                   scale, prob.fF)


def components(zs: ZeroSet, omega: tuple[float, float] | None = None) -> list[Component]:
    """Open intervals between consecutive separators, ordered left to right."""
    a, b = omega if omega is not None else zs.omega
    seps: list[tuple[float, float, str]] = []
    for z in zs.isolated_zeros:
        seps.append((z, z, "zero"))
    for l, r in zs.flat_intervals:
        seps.append((l, r, "zero"))
    for l, r in zs.unenumerated:
        seps.append((l, r, "zero"))
    seps.sort()

    def kind_of_end(v: float) -> str:
        return "infinite" if not math.isfinite(v) else "boundary"

    out = []
    cur, cur_kind = a, kind_of_end(a)
    for l, r, kind in seps:
        if l > cur:
            out.append((cur, l, cur_kind, kind))
        cur, cur_kind = max(cur, r), kind
    if cur < b:
        out.append((cur, b, cur_kind, kind_of_end(b)))
    comps = []
    for l, r, kl, kr in out:
        c = anchor((l, r))
        v = zs.sign_of(c) if zs.sign_of is not None else 0.0
        comps.append(Component((float(l), float(r)), int(np.sign(v)), (kl, kr)))
    return comps
