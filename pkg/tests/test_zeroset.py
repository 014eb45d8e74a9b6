import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wcchaos.model import make_problem
from wcchaos.zeroset import components, find_zeros


def zeros_of(F, omega=(0, 1), **kw):
    return find_zeros(make_problem(omega, F), **kw)


def test_logistic_has_no_interior_zeros():
    zs = zeros_of("-x*(1-x)")
    assert zs.isolated_zeros == [] and not zs.flat_intervals
    comps = components(zs)
    assert len(comps) == 1
    assert comps[0].interval == (0.0, 1.0)
    assert comps[0].sign == -1
    assert comps[0].kinds == ("boundary", "boundary")


@pytest.mark.parametrize("roots", [[0.5], [0.2, 0.7], [0.1, 0.3, 0.9]])
def test_simple_roots_located(roots):
    F = "*".join(f"(x-{r})" for r in roots)
    zs = zeros_of(F)
    assert zs.isolated_zeros == pytest.approx(roots, abs=1e-12)
    comps = components(zs)
    assert len(comps) == len(roots) + 1
    signs = [c.sign for c in comps]
    assert all(a == -b for a, b in zip(signs, signs[1:]))


def test_touching_zero_found():
    zs = zeros_of("(x-0.3)^2")
    assert zs.isolated_zeros == pytest.approx([0.3], abs=1e-6)
    assert [c.sign for c in components(zs)] == [1, 1]


def test_identically_zero_is_flat():
    zs = zeros_of("x - x")
    assert zs.has_positive_measure
    assert components(zs) == []


def test_flat_interval_inside():
    zs = zeros_of("(abs(x-0.6) + x - 0.6) - (abs(0.3-x) + 0.3 - x)")
    assert zs.has_positive_measure
    (l, r), = zs.flat_intervals
    assert l == pytest.approx(0.3, abs=1e-3) and r == pytest.approx(0.6, abs=1e-3)
    assert [c.sign for c in components(zs)] == [-1, 1]


def test_accumulating_zeros_truncated():
    zs = zeros_of("-x^3*sin(1/x)", cap=16)
    assert zs.truncated and zs.accumulation[0]
    assert len(zs.isolated_zeros) <= 16
    expected = sorted(1 / (k * math.pi) for k in range(1, len(zs.isolated_zeros) + 1))
    assert zs.isolated_zeros == pytest.approx(expected, rel=1e-10)
    assert zs.unenumerated and zs.unenumerated[0][0] == 0.0


def test_infinite_domain_kinds():
    zs = zeros_of("x", omega=("-inf", "inf"))
    comps = components(zs)
    assert [c.kinds for c in comps] == [("infinite", "zero"), ("zero", "infinite")]


def test_to_dict_is_plain():
    d = zeros_of("x-0.5", omega=(0, "inf")).to_dict()
    assert d["isolated_zeros"] == pytest.approx([0.5])
    assert d["truncated"] is False


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.05, 0.95), min_size=1, max_size=4, unique=True)
       .filter(lambda r: min(np.diff(sorted(r)), default=1.0) > 0.02))
def test_components_partition_domain(roots):
    F = "*".join(f"(x-{r!r})" for r in roots)
    zs = zeros_of(F)
    comps = components(zs)
    pts = [0.0] + sorted(zs.isolated_zeros) + [1.0]
    assert [c.interval for c in comps] == list(zip(pts, pts[1:]))
    prob = make_problem((0, 1), F)
    for c in comps:
        mid = c.base_point()
        assert np.sign(prob.fF(mid)) == c.sign


@pytest.mark.parametrize("F", ["(x-0.2)*(x-0.7)", "sin(20*x)", "-x^3*sin(1/x)"])
def test_refinement_stable(F):
    coarse = zeros_of(F, grid_n=4096, cap=8)
    fine = zeros_of(F, grid_n=16384, cap=8)
    assert coarse.isolated_zeros == pytest.approx(fine.isolated_zeros, abs=1e-10)
