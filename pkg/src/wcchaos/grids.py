"""Sample grids over open intervals, clipped away from the endpoints."""

from __future__ import annotations

import math

import numpy as np

AUDIT_LEVELS = 4


def clip_bounds(omega: tuple[float, float], level: int, delta: float = 1e-6,
                R: float = 1e6) -> tuple[float, float]:
    """Closed sub-interval sampled at audit ``level`` (0 coarsest, 3 finest).

    Finite endpoints are approached to within ``delta * 100**(3 - level)``
    (never more than a quarter of the width); infinite ones are cut at
    ``R / 100**(3 - level)`` from the finite end or from 0.
    """
    a, b = omega
    shrink = 100.0 ** (AUDIT_LEVELS - 1 - level)
    reach = R / shrink
    if math.isfinite(a) and math.isfinite(b):
        d = min((b - a) / 4, delta * shrink)
        return a + d, b - d
    if math.isfinite(a):
        d = min(0.25, delta * shrink)
        return a + d, a + reach
    if math.isfinite(b):
        d = min(0.25, delta * shrink)
        return b - reach, b - d
    return -reach, reach


def audit_grid(omega: tuple[float, float], n: int = 1024, level: int = AUDIT_LEVELS - 1,
               delta: float = 1e-6, R: float = 1e6) -> np.ndarray:
    """About ``n`` points, geometrically clustered toward each endpoint."""
    a, b = omega
    lo, hi = clip_bounds(omega, level, delta, R)
    parts = []
    if math.isfinite(a) and math.isfinite(b):
        half = (b - a) / 2
        m = n // 3
        parts.append(a + np.geomspace(lo - a, half, m))
        parts.append(b - np.geomspace(b - hi, half, m))
        parts.append(np.linspace(lo, hi, n - 2 * m))
    elif math.isfinite(a):
        m = n // 2
        parts.append(a + np.geomspace(lo - a, hi - a, m))
        parts.append(np.linspace(lo, min(hi, a + 10.0), n - m))
    elif math.isfinite(b):
        m = n // 2
        parts.append(b - np.geomspace(b - hi, b - lo, m))
        parts.append(np.linspace(max(lo, b - 10.0), hi, n - m))
    else:
        m = n // 4
        core = min(hi, 10.0)
        parts.append(np.geomspace(1e-3, hi, m))
        parts.append(-np.geomspace(1e-3, hi, m))
        parts.append(np.linspace(-core, core, n - 2 * m))
    pts = np.unique(np.concatenate(parts))
    return pts[(pts >= lo) & (pts <= hi) & (pts > a) & (pts < b)]


def anchor(omega: tuple[float, float]) -> float:
    """Default interior reference point: midpoint, unit distance from the finite end, or 0."""
    a, b = omega
    if math.isfinite(a) and math.isfinite(b):
        return 0.5 * (a + b)
    if math.isfinite(a):
        return a + 1.0
    if math.isfinite(b):
        return b - 1.0
    return 0.0
