"""Built-in problems with known verdicts.

Each entry builds a problem document from a few numeric parameters and
states the verdict the analytic theory predicts for those parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .criterion import Verdict
from .errors import ProblemError
from .model import Problem, load_problem
from .sobolev import SobolevProblem, load_sobolev_problem

__all__ = ["CatalogEntry", "CATALOG", "names", "get", "build_document", "build_problem",
           "expected_verdict", "is_borderline"]

# parameter values this close to a verdict threshold may legitimately be Inconclusive
BORDER = 1e-9


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    summary: str
    space: str
    params: dict = field(default_factory=dict)
    document: Callable[[dict], dict] = None
    expected: Callable[[dict], Verdict] = None
    rule: str = ""
    threshold: Callable[[dict], float] | None = None
    # parameter compared against the threshold
    threshold_param: str | None = None


def _lp(name: str, omega, F: str, h_re: str = "0", rho: str = "1", p: float = 1.0) -> dict:
    return {"schema_version": 1, "name": name, "space": "lp", "omega": list(omega), "F": F,
            "h_re": h_re, "h_im": "0", "rho": rho, "p": p}


def _sob(name: str, interval, F: str, h_re: str, p: float) -> dict:
    return {"schema_version": 1, "name": name, "space": "sobolev-star", "interval": list(interval),
            "F": F, "h_re": h_re, "h_im": "0", "p": p}


def _lit(v: float) -> str:
    return repr(float(v))


def _verdict(flag: bool) -> Verdict:
    return Verdict.CHAOTIC if flag else Verdict.NOT_CHAOTIC


_ENTRIES = [
    CatalogEntry(
        "perturbed-translation", "F = 1, h = c on (0, inf), rho = 1", "lp", {"c": 1.0, "p": 1.0},
        lambda q: _lp("perturbed-translation", (0, "inf"), "1", _lit(q["c"]), p=q["p"]),
        lambda q: _verdict(q["c"] > 0), "Chaotic iff c > 0", lambda q: 0.0, "c"),
    CatalogEntry(
        "perturbed-translation-line", "F = 1, h = c on the real line, rho = 1", "lp",
        {"c": 1.0, "p": 1.0},
        lambda q: _lp("perturbed-translation-line", ("-inf", "inf"), "1", _lit(q["c"]), p=q["p"]),
        lambda q: Verdict.NOT_CHAOTIC, "never chaotic"),
    CatalogEntry(
        "translation-half-line", "F = 1, h = 0 on (0, inf), rho = 1", "lp", {"p": 1.0},
        lambda q: _lp("translation-half-line", (0, "inf"), "1", p=q["p"]),
        lambda q: Verdict.NOT_CHAOTIC, "rho is not integrable: never chaotic"),
    CatalogEntry(
        "translation-line", "F = 1, h = 0 on the real line, rho = 1", "lp", {"p": 1.0},
        lambda q: _lp("translation-line", ("-inf", "inf"), "1", p=q["p"]),
        lambda q: Verdict.NOT_CHAOTIC, "rho is not integrable: never chaotic"),
    CatalogEntry(
        "translation-gaussian", "F = 1, h = 0 on the real line, rho = exp(-x^2)", "lp", {"p": 1.0},
        lambda q: _lp("translation-gaussian", ("-inf", "inf"), "1", rho="exp(-x^2)", p=q["p"]),
        lambda q: Verdict.CHAOTIC, "rho is integrable: chaotic for every p"),
    CatalogEntry(
        "contraction", "F = -x, h = c on (0, 1), rho = 1", "lp", {"c": 0.5, "p": 1.0},
        lambda q: _lp("contraction", (0, 1), "-x", _lit(q["c"]), p=q["p"]),
        lambda q: _verdict(q["c"] > -1.0 / q["p"]), "Chaotic iff c > -1/p", lambda q: -1.0 / q["p"], "c"),
    CatalogEntry(
        "accumulating-zeros", "F = -x^3 sin(1/x), h = 0 on (0, 1), rho = 1", "lp", {"p": 1.0},
        lambda q: _lp("accumulating-zeros", (0, 1), "-x^3*sin(1/x)", p=q["p"]),
        lambda q: Verdict.CHAOTIC, "chaotic for every p"),
    CatalogEntry(
        "sobolev-minus-x", "F = -x, h = h0 on W^1,p_*[0, 1]", "sobolev-star", {"h0": 0.5, "p": 1.0},
        lambda q: _sob("sobolev-minus-x", (0, 1), "-x", _lit(q["h0"]), q["p"]),
        lambda q: _verdict(q["h0"] > 1 - 1.0 / q["p"]), "Chaotic iff h0 > 1 - 1/p",
        lambda q: 1 - 1.0 / q["p"], "h0"),
    CatalogEntry(
        "sobolev-logistic", "F = -x(1-x), h = h0 on W^1,p_*[0, 1]", "sobolev-star", {"h0": 0.0, "p": 1.0},
        lambda q: _sob("sobolev-logistic", (0, 1), "-x*(1-x)", _lit(q["h0"]), q["p"]),
        lambda q: Verdict.NOT_CHAOTIC, "never chaotic"),
]

CATALOG: dict[str, CatalogEntry] = {e.name: e for e in _ENTRIES}


def names() -> list[str]:
    return list(CATALOG)


def get(name: str) -> CatalogEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise ProblemError(f"unknown built-in problem {name!r}; known: {', '.join(CATALOG)}") from None


def _params(entry: CatalogEntry, overrides: dict | None) -> dict:
    q = dict(entry.params)
    for k, v in (overrides or {}).items():
        if k not in q:
            raise ProblemError(f"{entry.name} has no parameter {k!r}; parameters: {', '.join(q) or 'none'}")
        q[k] = float(v)
    return q


def build_document(name: str, overrides: dict | None = None) -> dict:
    entry = get(name)
    return entry.document(_params(entry, overrides))


def build_problem(name: str, overrides: dict | None = None) -> Problem | SobolevProblem:
    entry = get(name)
    doc = entry.document(_params(entry, overrides))
    return load_sobolev_problem(doc) if entry.space == "sobolev-star" else load_problem(doc)


def expected_verdict(name: str, overrides: dict | None = None) -> Verdict:
    entry = get(name)
    return entry.expected(_params(entry, overrides))


def is_borderline(name: str, overrides: dict | None = None) -> bool:
    """True when the parameters sit on the verdict threshold, where Inconclusive is acceptable."""
    entry = get(name)
    if entry.threshold is None:
        return False
    q = _params(entry, overrides)
    return abs(q[entry.threshold_param] - entry.threshold(q)) <= BORDER
