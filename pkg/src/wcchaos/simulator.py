"""Apply (T(t) f)(x) = h_t(x) f(phi(t, x)) to sampled functions.

Functions live on sorted nodes inside Omega and are interpolated with a
cubic Hermite interpolant whose slopes come from a not-a-knot spline and are
clamped on monotone stretches so the interpolant never overshoots there. Values whose source point falls outside the node
hull are marked missing rather than extrapolated, and missing nodes are
left out of every norm.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from . import expr as E
from .model import Problem, check_admissibility
from .semiflow import flow_grid

__all__ = [
    "GridFunction", "chebyshev_nodes", "monotone_cubic", "default_nodes", "apply_semigroup", "semigroup_residual",
    "generator_residual", "norm_growth", "lp_norm",
]


def chebyshev_nodes(lo: float, hi: float, n: int) -> np.ndarray:
    k = np.arange(n)
    x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(np.pi * (2 * k + 1) / (2 * n))
    return np.sort(x)


def monotone_cubic(x: np.ndarray, y: np.ndarray) -> CubicHermiteSpline:
    """Hermite cubic with spline slopes, clamped where the data are monotone.

    A node is clamped (Hyman's filter) only when the four secants around it
    never change sign, so smooth extrema between nodes keep full accuracy
    while steps and monotone ramps never overshoot.
    """
    if x.size < 4:
        d = np.gradient(y, x)
    else:
        d = CubicSpline(x, y).derivative()(x)
    sec = np.diff(y) / np.diff(x)
    pad = np.concatenate([[sec[0]] * 2, sec, [sec[-1]] * 2])
    # window of secants S_{i-2} .. S_{i+1} for node i
    win = np.stack([pad[k:k + x.size] for k in range(4)])
    mono = win.max(axis=0) * win.min(axis=0) >= 0
    left, right = win[1], win[2]
    sgn = np.sign(win.sum(axis=0))
    cap = 3.0 * np.minimum(np.abs(left), np.abs(right))
    limited = sgn * np.clip(d * sgn, 0.0, cap)
    d = np.where(mono, limited, d)
    return CubicHermiteSpline(x, y, d, extrapolate=False)


def default_nodes(omega: tuple[float, float], n: int = 2048, delta: float = 1e-6,
                  span: float = 10.0) -> np.ndarray:
    """Chebyshev nodes on [alpha + delta, beta - delta]; infinite ends are cut at ``span`` from the other end or 0."""
    a, b = omega
    if math.isfinite(a) and math.isfinite(b):
        lo, hi = a + delta, b - delta
    elif math.isfinite(a):
        lo, hi = a + delta, a + span
    elif math.isfinite(b):
        lo, hi = b - span, b - delta
    else:
        lo, hi = -span, span
    return chebyshev_nodes(lo, hi, n)


@dataclass(frozen=True)
class GridFunction:
    nodes: np.ndarray
    values: np.ndarray
    missing: np.ndarray = None
    source: E.Expr | None = None
    derivative: E.Expr | None = None
    _interp: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if nodes.ndim != 1 or nodes.shape != values.shape:
            raise ValueError("nodes and values must be 1-d arrays of equal length")
        if nodes.size < 2 or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        missing = np.zeros(nodes.size, dtype=bool) if self.missing is None else np.asarray(self.missing, dtype=bool)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)

    @classmethod
    def from_expr(cls, source: str | E.Expr, nodes: np.ndarray,
                  derivative: str | E.Expr | None = None) -> "GridFunction":
        """Sample an expression; its derivative is synthesized unless given."""
        e = E.parse(source) if isinstance(source, str) else source
        d = E.parse(derivative) if isinstance(derivative, str) else derivative
        if d is None:
            d = E.differentiate(e)
        nodes = np.asarray(nodes, dtype=float)
        return cls(nodes, E.compile_expr(e).vec(nodes).astype(complex), None, e, d)

    @property
    def valid(self) -> np.ndarray:
        return ~self.missing

    @property
    def n_missing(self) -> int:
        return int(self.missing.sum())

    def _interpolants(self):
        if "re" not in self._interp:
            ok = self.valid
            x = self.nodes[ok]
            if x.size < 2:
                self._interp["re"] = self._interp["im"] = None
            else:
                self._interp["re"] = monotone_cubic(x, self.values.real[ok])
                self._interp["im"] = monotone_cubic(x, self.values.imag[ok])
        return self._interp["re"], self._interp["im"]

    def __call__(self, xs) -> tuple[np.ndarray, np.ndarray]:
        """Interpolated values and a mask of points that could not be served."""
        xs = np.asarray(xs, dtype=float)
        re, im = self._interpolants()
        out = np.zeros(xs.shape, dtype=complex)
        bad = np.ones(xs.shape, dtype=bool)
        if re is None:
            return out, bad
        inside = (xs >= self.nodes[0]) & (xs <= self.nodes[-1])
        if self.missing.any():
            # a point is served only if both bracketing nodes carry values
            j = np.clip(np.searchsorted(self.nodes, xs), 1, self.nodes.size - 1)
            inside &= ~self.missing[j] & ~self.missing[j - 1]
        if inside.any():
            out[inside] = re(xs[inside]) + 1j * im(xs[inside])
        bad = ~inside | ~np.isfinite(out)
        out[bad] = 0.0
        return out, bad

    def with_values(self, values, missing=None) -> "GridFunction":
        return GridFunction(self.nodes, values, missing)

    def to_tsv(self, target=None, complex_columns: bool = True) -> str:
        """Table of (node, re, im), or (node, value) when ``complex_columns`` is False; %.17g round-trips."""
        lines = []
        for x, v, m in zip(self.nodes, self.values, self.missing):
            re = "nan" if m else f"{v.real:.17g}"
            im = "nan" if m else f"{v.imag:.17g}"
            lines.append(f"{x:.17g}\t{re}\t{im}" if complex_columns else f"{x:.17g}\t{re}")
        text = "\n".join(lines) + "\n"
        if target is not None:
            if isinstance(target, (str, os.PathLike)):
                with open(target, "w") as fh:
                    fh.write(text)
            else:
                target.write(text)
        return text

    @classmethod
    def from_tsv(cls, source) -> "GridFunction":
        if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
            with open(source) as fh:
                text = fh.read()
        elif isinstance(source, str):
            text = source
        else:
            text = source.read()
        data = np.loadtxt(io.StringIO(text), ndmin=2, comments="#")
        if data.shape[1] == 2:
            vals = data[:, 1].astype(complex)
            miss = np.isnan(data[:, 1])
        elif data.shape[1] == 3:
            vals = data[:, 1] + 1j * data[:, 2]
            miss = np.isnan(data[:, 1]) | np.isnan(data[:, 2])
        else:
            raise ValueError("expected two or three columns")
        vals[miss] = 0.0
        return cls(data[:, 0], vals, miss)


def lp_norm(prob: Problem, f: GridFunction, mask: np.ndarray | None = None) -> float:
    """||f||_{L^p_rho} over the node range by Simpson's rule on the valid nodes."""
    ok = f.valid if mask is None else (f.valid & mask)
    x = f.nodes[ok]
    if x.size < 2:
        return 0.0
    dens = np.abs(f.values[ok]) ** prob.p * prob.frho.vec(x)
    val = float(simpson(dens, x=x))
    return max(val, 0.0) ** (1.0 / prob.p)


def apply_semigroup(prob: Problem, f: GridFunction, t: float, tol: float = 1e-10) -> GridFunction:
    """T(t)f on f's nodes; points flowing outside the node hull (or out of Omega) are missing."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return GridFunction(f.nodes, f.values.copy(), f.missing.copy())
    res = flow_grid(prob, f.nodes, t, tol)
    vals, bad = f(res.value)
    weight = np.exp(res.log_weight_re + 1j * res.log_weight_im)
    missing = bad | ~res.in_domain
    out = np.where(missing, 0.0, weight * vals)
    return GridFunction(f.nodes, out, missing)


def _rel_diff(prob: Problem, a: GridFunction, b: GridFunction, ref: GridFunction) -> float:
    common = a.valid & b.valid
    diff = GridFunction(a.nodes, np.where(common, a.values - b.values, 0.0), ~common)
    base = lp_norm(prob, ref, common)
    num = lp_norm(prob, diff)
    if base == 0:
        return 0.0 if num == 0 else math.inf
    return num / base


def semigroup_residual(prob: Problem, f: GridFunction, s: float, t: float, tol: float = 1e-10) -> float:
    """||T(t+s)f - T(t)T(s)f|| / ||f|| on the nodes valid for both."""
    direct = apply_semigroup(prob, f, t + s, tol)
    composed = apply_semigroup(prob, apply_semigroup(prob, f, s, tol), t, tol)
    return _rel_diff(prob, direct, composed, f)


def generator_residual(prob: Problem, f: GridFunction, dt: float, tol: float = 1e-12) -> float:
    """||(T(dt)f - f)/dt - (F f' + h f)|| / ||f|| over interior nodes."""
    if f.derivative is None:
        raise ValueError("generator_residual needs a grid function with a derivative expression")
    x = f.nodes
    stepped = apply_semigroup(prob, f, dt, tol)
    dfx = E.compile_expr(f.derivative).vec(x)
    Af = prob.fF.vec(x) * dfx + (prob.fre.vec(x) + 1j * prob.fim.vec(x)) * f.values
    quotient = (stepped.values - f.values) / dt
    ok = stepped.valid & f.valid
    diff = GridFunction(x, np.where(ok, quotient - Af, 0.0), ~ok)
    base = lp_norm(prob, f, ok)
    num = lp_norm(prob, diff)
    if base == 0:
        return 0.0 if num == 0 else math.inf
    return num / base


@dataclass
class NormRow:
    t: float
    norm: float
    bound: float
    missing: int

    @property
    def within(self) -> bool:
        return self.norm <= self.bound


def norm_growth(prob: Problem, f: GridFunction, times: Sequence[float], M: float | None = None,
                omega: float | None = None, tol: float = 1e-10, quad_tol: float = 1e-6) -> list[NormRow]:
    """||T(t)f||_{L^p_rho} against M^{1/p} e^{omega t / p} ||f|| (plus quadrature slack).

    (M, omega) default to the fit from ``check_admissibility``.
    """
    if M is None or omega is None:
        fit = check_admissibility(prob, tol=tol)
        M = fit.M if M is None else M
        omega = fit.omega if omega is None else omega
    base = lp_norm(prob, f)
    rows = []
    for t in times:
        g = apply_semigroup(prob, f, t, tol)
        n = lp_norm(prob, g)
        bound = M ** (1 / prob.p) * math.exp(omega * t / prob.p) * base * (1 + quad_tol) + quad_tol
        rows.append(NormRow(float(t), n, bound, g.n_missing))
    return rows
