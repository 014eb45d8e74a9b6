import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from wcchaos.criterion import Verdict, classify_chaos, classify_chaos_h_zero, component_integral
from wcchaos.model import make_problem
from wcchaos.quadrature import Convergence
from wcchaos.zeroset import components, find_zeros


def only_component(prob):
    comps = components(find_zeros(prob), prob.omega)
    assert len(comps) == 1
    return comps[0]


@pytest.mark.parametrize("c, p", [(0.5, 1), (0.0, 2), (-0.3, 1), (1.5, 3)])
@pytest.mark.parametrize("x", [0.1, 0.5, 0.9])
def test_contraction_closed_form(c, p, x):
    # int_0^1 (w/x)^{pc} dw
    prob = make_problem((0, 1), "-x", repr(c), p=p)
    res = component_integral(prob, only_component(prob), x)
    assert res.convergent
    assert res.value == pytest.approx(x ** (-p * c) / (p * c + 1), rel=1e-7)


@pytest.mark.parametrize("c, b", [(1.0, 1.0), (0.25, 2.0)])
def test_half_line_translation_closed_form(c, b):
    # int_0^inf exp(-c (w - b)) dw
    prob = make_problem((0, "inf"), "1", repr(c))
    res = component_integral(prob, only_component(prob), b)
    assert res.value == pytest.approx(math.exp(c * b) / c, rel=1e-7)


def test_gaussian_density():
    prob = make_problem(("-inf", "inf"), "1", rho="exp(-x^2)")
    res = component_integral(prob, only_component(prob))
    assert res.value == pytest.approx(math.sqrt(math.pi), rel=1e-8)


def test_against_nested_quad():
    prob = make_problem((0, 1), "-x*(1-x)", "x*cos(x) + 1.5*(1-x)", rho="1 + x^2", p=1.5)
    base = 0.4

    def U(w):
        return quad(lambda s: (s * math.cos(s) + 1.5 * (1 - s)) / (-s * (1 - s)), base, w, epsabs=1e-13)[0]

    def g(w):
        return math.exp(-1.5 * U(w)) * (1 + w * w)

    want = quad(g, 0, base, epsabs=1e-12)[0] + quad(g, base, 1, epsabs=1e-12)[0]
    # the right tail decays like (1-w)^-0.81, so ask for what the shells can resolve
    res = component_integral(prob, only_component(prob), base, tol=1e-6)
    assert res.convergent
    assert res.value == pytest.approx(want, rel=1e-6)


@pytest.mark.parametrize("p", [1, 2, 3])
@pytest.mark.parametrize("offset", [-0.5, -0.2, 0.2, 0.5])
def test_contraction_threshold(p, offset):
    c = -1 / p + offset
    v = classify_chaos(make_problem((0, 1), "-x", repr(c), p=p))
    assert v.tag is (Verdict.CHAOTIC if offset > 0 else Verdict.NOT_CHAOTIC)


def test_contraction_border_never_wrong():
    v = classify_chaos(make_problem((0, 1), "-x", "-1", p=1))
    assert v.tag in (Verdict.NOT_CHAOTIC, Verdict.INCONCLUSIVE)


@pytest.mark.parametrize("p", [1, 2])
def test_accumulating_zeros_chaotic(p):
    v = classify_chaos(make_problem((0, 1), "-x^3*sin(1/x)", p=p))
    assert v.tag is Verdict.CHAOTIC
    assert v.zero_set.truncated
    assert all(ic.convergent for _, ic in v.regions)


def test_flat_zero_set_not_chaotic():
    F = "x*(abs(0.3-x) + 0.3 - x) - (1-x)*(abs(x-0.6) + x - 0.6)"
    v = classify_chaos(make_problem((0, 1), F))
    assert v.tag is Verdict.NOT_CHAOTIC
    assert v.witness["kind"] == "PositiveMeasureZeroSet"


def test_nonintegrable_density_not_chaotic():
    v = classify_chaos(make_problem((0, 1), "-x", rho="1/x"))
    assert v.tag is Verdict.NOT_CHAOTIC
    assert v.witness["kind"] == "DivergentComponent"


@pytest.mark.parametrize("omega, rho, tag", [
    (("-inf", "inf"), "1", Verdict.NOT_CHAOTIC),
    (("-inf", "inf"), "exp(-x^2)", Verdict.CHAOTIC),
    ((0, "inf"), "1", Verdict.NOT_CHAOTIC),
    ((0, "inf"), "exp(-x)", Verdict.CHAOTIC),
])
def test_translation_verdicts(omega, rho, tag):
    assert classify_chaos(make_problem(omega, "1", rho=rho)).tag is tag


def test_violated_hypothesis_reported():
    v = classify_chaos(make_problem((0, 1), "x", "0.5"))
    assert v.tag is Verdict.HYPOTHESIS_VIOLATED
    assert v.exit_code == 3


def test_report_round_trips_to_json():
    import json

    v = classify_chaos(make_problem((0, "inf"), "1", "1"))
    d = json.loads(json.dumps(v.to_dict()))
    assert d["verdict"] == "Chaotic"
    assert d["components"][0]["interval"] == [0.0, "inf"]


@pytest.mark.parametrize("args", [
    ((0, 1), "-x*(1-x)"),
    ((0, 1), "-x^3*sin(1/x)"),
    (("-inf", "inf"), "1", "0", "0", "exp(-x^2)"),
    (("-inf", "inf"), "1"),
    ((0, 1), "-x", "0", "0", "1/x"),
])
def test_h_zero_fast_path_agrees(args):
    prob = make_problem(*args)
    assert classify_chaos_h_zero(prob).tag is classify_chaos(prob).tag


def test_h_zero_fast_path_needs_zero_weight():
    with pytest.raises(ValueError):
        classify_chaos_h_zero(make_problem((0, 1), "-x", "1"))


SHIFT = make_problem((0, 1), "-x*(1-x)", "x*cos(x) + 1.5*(1-x)", p=1.5)
SHIFT_COMP = only_component(SHIFT)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_base_point_scaling(x, v):
    # I(x) = exp(p int_v^x Re h / F) I(v)
    Ix = component_integral(SHIFT, SHIFT_COMP, x, tol=1e-6)
    Iv = component_integral(SHIFT, SHIFT_COMP, v, tol=1e-6)
    assert Ix.tag is Iv.tag is Convergence.CONVERGENT
    shift = quad(lambda s: (s * math.cos(s) + 1.5 * (1 - s)) / (-s * (1 - s)), v, x, epsabs=1e-13)[0]
    assert Ix.value == pytest.approx(math.exp(1.5 * shift) * Iv.value, rel=1e-6)


@settings(max_examples=10, deadline=None)
@given(st.floats(-2.0, 2.0), st.floats(0.0, 1.0))
def test_monotone_in_weight(c, dc):
    # raising h can only help integrability near the attracting end
    lo = classify_chaos(make_problem((0, 1), "-x", repr(c))).tag
    hi = classify_chaos(make_problem((0, 1), "-x", repr(c + dc))).tag
    if lo is Verdict.CHAOTIC:
        assert hi is Verdict.CHAOTIC
    if hi is Verdict.NOT_CHAOTIC:
        assert lo is Verdict.NOT_CHAOTIC


def test_accumulating_zeros_with_divergent_density_inconclusive():
    # every enumerated component is finite but rho is not integrable over the unenumerated region
    v = classify_chaos(make_problem((0, 1), "-x^3*sin(1/x)", rho="1/x"))
    assert v.tag is Verdict.INCONCLUSIVE
    assert all(ic.convergent for _, ic in v.per_component)
    assert v.regions and not v.regions[0][1].convergent
