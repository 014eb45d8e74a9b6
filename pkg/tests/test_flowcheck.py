import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wcchaos.flowcheck import (TransportedDensity, comparability_check, component_of, flow_integral, rho_t_p,
                               run_suite, sample_seeds, series_sum, verify_cocycle, verify_integral_identity)
from wcchaos.model import Config, make_problem
from wcchaos.quadrature import Convergence
from wcchaos.zeroset import Component


def contraction(c, p=1.0):
    return make_problem((0, 1), "-x", repr(c), p=p)


@pytest.mark.parametrize("c, p", [(0.5, 2), (-0.4, 1), (0.0, 1)])
@pytest.mark.parametrize("t", [-2.0, -0.5, 0.0, 0.5, 1.0, 1.5])
def test_rho_closed_form(c, p, t):
    # rho_{t,p}(x) = e^{(pc+1) t} while x < e^{-t}, and 0 after the backward exit
    x = 0.3
    a = p * c + 1
    r = rho_t_p(contraction(c, p), x, t)
    if t > math.log(1 / x):
        assert not r.in_range and r.value == 0.0
    else:
        assert r.in_range
        assert r.value == pytest.approx(math.exp(a * t), rel=1e-9)


def test_rho_at_zero_time_is_density():
    prob = make_problem((0, 1), "-x*(1-x)", "1", rho="1 + x")
    assert rho_t_p(prob, 0.4, 0.0).value == pytest.approx(1.4)


def test_transported_density_vectorized():
    td = TransportedDensity(contraction(0.5), 0.3)
    ts = np.array([-1.0, 0.0, 1.0, 2.0])
    assert td(ts) == pytest.approx([math.exp(-1.5), 1.0, math.exp(1.5), 0.0], rel=1e-9)


@pytest.mark.parametrize("c, p, x", [(0.5, 2, 0.3), (0.0, 1, 0.7), (-0.3, 1, 0.5)])
@pytest.mark.parametrize("t0", [0.25, 1.0, 3.0])
def test_series_closed_form(c, p, x, t0):
    a = p * c + 1
    res = series_sum(contraction(c, p), x, t0)
    assert res.tag is Convergence.CONVERGENT
    forward = sum(math.exp(a * k * t0) for k in range(int(math.log(1 / x) / t0) + 1))
    q = math.exp(-a * t0)
    assert res.classification.value == pytest.approx(forward + q / (1 - q), rel=1e-7)


@pytest.mark.parametrize("c", [-1.5, -2.0])
def test_series_divergent(c):
    assert series_sum(contraction(c), 0.4, 1.0).tag is Convergence.DIVERGENT


def test_series_rejects_bad_arguments():
    with pytest.raises(ValueError):
        series_sum(contraction(0.5), 0.4, 0.0)
    with pytest.raises(ValueError):
        series_sum(make_problem((0, 1), "-x*(1-x)*(x-0.5)"), 0.5, 1.0)


@pytest.mark.parametrize("c, p", [(0.5, 1), (0.5, 2), (-0.3, 1), (2.0, 1)])
@pytest.mark.parametrize("x", [0.25, 0.5, 0.75])
def test_flow_integral_closed_form(c, p, x):
    a = p * c + 1
    res = flow_integral(contraction(c, p), x)
    assert res.convergent
    assert res.value == pytest.approx(x ** -a / a, rel=1e-6)


@pytest.mark.parametrize("args", [((0, 1), "-x", "-1.5"), (("-inf", "inf"), "1"), ((0, "inf"), "1", "-0.5")])
def test_flow_integral_divergent(args):
    prob = make_problem(*args)
    x = 0.5 if prob.omega[0] == 0 else 0.0
    assert flow_integral(prob, x).divergent


def test_flow_integral_half_line_translation():
    # int_0^x e^{ct} dt + int_0^inf e^{-ct} dt with c = 1
    res = flow_integral(make_problem((0, "inf"), "1", "1"), 2.0)
    assert res.value == pytest.approx(math.exp(2.0), rel=1e-6)


@pytest.mark.parametrize("args, x", [
    (((0, 1), "-x", "0.5"), 0.4),
    (((0, 1), "-x*(1-x)", "0", "0", "1 + x"), 0.6),
    ((("-inf", "inf"), "1", "0", "0", "exp(-x^2)"), 0.3),
    (((0, "inf"), "1", "1"), 1.5),
])
def test_identity(args, x):
    rep = verify_integral_identity(make_problem(*args), x)
    assert rep.tags_agree and rep.flow_side.convergent
    assert rep.residual <= 1e-5


def test_identity_divergent_sides_agree():
    rep = verify_integral_identity(make_problem(("-inf", "inf"), "1"), 0.0)
    assert rep.tags_agree and rep.residual is None


def test_component_of():
    prob = make_problem((0, 1), "-x*(1-x)*(x-0.5)")
    assert component_of(prob, 0.7).interval == pytest.approx((0.5, 1.0))
    with pytest.raises(ValueError):
        component_of(prob, 0.5)


WAVY = make_problem((0, 1), "-x*(1-x)*(x-0.5)", "cos(3*x)", "x^2", p=2)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95).filter(lambda x: abs(x - 0.5) > 0.01), st.floats(0, 2), st.floats(0, 2))
def test_cocycle(x, s, t):
    assert verify_cocycle(WAVY, x, s, t).worst <= 1e-6


@pytest.mark.parametrize("s, in_range", [(1.0, True), (1.5, False)])
def test_cocycle_through_exit(s, in_range):
    # the backward exit from 0.3 is at ln(1/0.3), before t + s
    rep = verify_cocycle(contraction(0.5), 0.3, s, 1.0)
    assert rep.backward_in_range is in_range
    assert rep.worst <= 1e-9


def test_comparability_bounded():
    rep = comparability_check(contraction(0.5), (0.3, 0.4), [-1, 0, 0.5, 1])
    assert rep.bounded
    assert (rep.alpha, rep.beta) == (0.4, 0.3)
    assert rep.samples == 36


def test_comparability_bounded_past_exit():
    # rho_t vanishes at alpha after its exit but not in the interior
    rep = comparability_check(contraction(0.5), (0.3, 0.9), [0.5])
    assert rep.bounded


@pytest.mark.parametrize("interval", [(0.0, 1.0), (0.0, math.inf), (-math.inf, 0.0), (-math.inf, math.inf)])
def test_sample_seeds_inside(interval):
    comp = Component(interval, 1, ("zero", "zero"))
    xs = sample_seeds(comp, 50, np.random.default_rng(1))
    assert all(comp.contains(x) for x in xs)


@pytest.mark.parametrize("args", [
    ((0, 1), "-x", "0.5"),
    ((0, "inf"), "1", "1"),
    ((0, 1), "-x*(1-x)*(x-0.5)", "cos(3*x)"),
])
def test_run_suite_passes(args):
    rep = run_suite(make_problem(*args), Config(seed=3), seeds_per_component=2, n_cocycle=2)
    assert rep.passed, rep.failures
    assert rep.seeds and rep.identity and rep.cocycle
    assert rep.to_dict()["passed"] is True


def test_run_suite_deterministic():
    prob = contraction(0.5)
    a = run_suite(prob, Config(seed=5), seeds_per_component=1, n_cocycle=1).to_dict()
    b = run_suite(prob, Config(seed=5), seeds_per_component=1, n_cocycle=1).to_dict()
    assert a == b
