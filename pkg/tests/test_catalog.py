import pytest

from wcchaos import catalog
from wcchaos.criterion import Verdict, classify_chaos
from wcchaos.errors import ProblemError
from wcchaos.sobolev import SobolevProblem, classify_sobolev_chaos


def classify(prob):
    return classify_sobolev_chaos(prob) if isinstance(prob, SobolevProblem) else classify_chaos(prob)


def test_catalog_size_and_families():
    names = catalog.names()
    assert len(names) >= 6
    for required in ("perturbed-translation", "translation-half-line", "translation-line", "contraction",
                     "accumulating-zeros", "sobolev-minus-x", "sobolev-logistic"):
        assert required in names


@pytest.mark.parametrize("name", catalog.names())
def test_expected_matches_observed(name):
    assert classify(catalog.build_problem(name)).tag is catalog.expected_verdict(name)


@pytest.mark.parametrize("name, params, tag", [
    ("perturbed-translation", {"c": -0.5}, Verdict.NOT_CHAOTIC),
    ("perturbed-translation", {"c": 0.2, "p": 3}, Verdict.CHAOTIC),
    ("contraction", {"c": -0.7, "p": 1}, Verdict.CHAOTIC),
    ("contraction", {"c": -0.7, "p": 2}, Verdict.NOT_CHAOTIC),
    ("sobolev-minus-x", {"h0": 0.4, "p": 2}, Verdict.NOT_CHAOTIC),
    ("sobolev-minus-x", {"h0": 0.6, "p": 2}, Verdict.CHAOTIC),
    ("sobolev-logistic", {"h0": 2, "p": 4}, Verdict.NOT_CHAOTIC),
])
def test_overrides(name, params, tag):
    assert catalog.expected_verdict(name, params) is tag
    assert classify(catalog.build_problem(name, params)).tag is tag


def test_documents_are_valid():
    from wcchaos.model import validate_document

    for name in catalog.names():
        doc = catalog.build_document(name)
        assert validate_document(doc)["name"] == name


def test_borderline():
    assert catalog.is_borderline("contraction", {"c": -1.0, "p": 1})
    assert catalog.is_borderline("sobolev-minus-x", {"h0": 0.5, "p": 2})
    assert not catalog.is_borderline("contraction")
    assert not catalog.is_borderline("accumulating-zeros")


def test_borderline_never_wrong():
    v = classify(catalog.build_problem("contraction", {"c": -0.5, "p": 2}))
    assert v.tag in (Verdict.NOT_CHAOTIC, Verdict.INCONCLUSIVE)


def test_unknown_name_and_parameter():
    with pytest.raises(ProblemError, match="unknown built-in"):
        catalog.get("nope")
    with pytest.raises(ProblemError, match="no parameter"):
        catalog.build_problem("accumulating-zeros", {"c": 1})
