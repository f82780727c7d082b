"""LaTeX and JSON renderings of coefficients, elements, forms, and reports.

Basis labels of the shape t<digits> render as theta with a numeric
superscript; any other label keeps its name in the superscript.  All
dictionary outputs use sorted, stable orderings so that serialized output
is byte-identical across runs.
"""

from __future__ import annotations

from fractions import Fraction

from .algebra import Element, deg_lex_key
from .calculus import DerivedRelation, Form
from .coeff import Polynomial, RationalFunction


def latex_fraction(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    if value.numerator < 0:
        return "-\\frac{%d}{%d}" % (-value.numerator, value.denominator)
    return "\\frac{%d}{%d}" % (value.numerator, value.denominator)


def _latex_monomial(params, mono) -> str:
    parts = []
    for name, power in zip(params.names, mono):
        if power == 0:
            continue
        if power == 1:
            parts.append(name)
        else:
            parts.append("%s^{%d}" % (name, power))
    return " ".join(parts)


def latex_polynomial(poly: Polynomial) -> str:
    if poly.is_zero():
        return "0"
    monos = sorted(poly.terms, key=lambda m: (sum(m), m), reverse=True)
    pieces = []
    for mono in monos:
        coeff = poly.terms[mono]
        body = _latex_monomial(poly.params, mono)
        if not body:
            text = latex_fraction(coeff)
        elif coeff == 1:
            text = body
        elif coeff == -1:
            text = "-" + body
        else:
            text = "%s %s" % (latex_fraction(coeff), body)
        if pieces and not text.startswith("-"):
            pieces.append("+")
            pieces.append(text)
        elif pieces:
            pieces.append("-")
            pieces.append(text[1:])
        else:
            pieces.append(text)
    return " ".join(pieces)


def latex_coefficient(rf: RationalFunction) -> str:
    num = latex_polynomial(rf.num)
    if rf.den.is_one():
        return num
    return "\\frac{%s}{%s}" % (num, latex_polynomial(rf.den))


def _latex_letter(table, sym: int, count: int) -> str:
    name = table.symbols[sym]
    if name.endswith("^-1"):
        name = name[:-3]
        count = -count
    if count == 1:
        return name
    return "%s^{%d}" % (name, count)


def latex_word(table, word) -> str:
    if not word:
        return "1"
    return " ".join(_latex_letter(table, sym, count) for sym, count in word)


def _is_plain(rf: RationalFunction) -> bool:
    return rf.den.is_one() and len(rf.num.terms) <= 1


def latex_element(element: Element) -> str:
    if element.is_zero():
        return "0"
    table = element.algebra.table
    pieces = []
    for word in sorted(element.terms, key=deg_lex_key):
        coeff = element.terms[word]
        body = latex_word(table, word)
        if not word:
            text = latex_coefficient(coeff) if _is_plain(coeff) \
                else "\\left(%s\\right)" % latex_coefficient(coeff)
        elif coeff.is_one():
            text = body
        elif (-coeff).is_one():
            text = "-" + body
        elif _is_plain(coeff):
            text = "%s \\, %s" % (latex_coefficient(coeff), body)
        else:
            text = "\\left(%s\\right) %s" % (latex_coefficient(coeff), body)
        if pieces and not text.startswith("-"):
            pieces.append("+")
            pieces.append(text)
        elif pieces:
            pieces.append("-")
            pieces.append(text[1:])
        else:
            pieces.append(text)
    return " ".join(pieces)


def latex_label(label: str) -> str:
    if label.startswith("t") and label[1:].isdigit():
        return "\\theta^{%s}" % label[1:]
    return "\\theta^{\\mathrm{%s}}" % label


def latex_form(form: Form) -> str:
    if form.is_zero():
        return "0"
    calc = form.calculus
    pieces = []
    for index in sorted(form.terms, key=lambda k: (len(k), k)):
        coeff = form.terms[index]
        body = " \\wedge ".join(latex_label(calc.labels[p]) for p in index)
        if not index:
            text = latex_element(coeff)
        elif coeff.is_one():
            text = body
        elif len(coeff.terms) == 1:
            inner = latex_element(coeff)
            if inner.startswith("-"):
                text = "-%s \\, %s" % (inner[1:], body)
            else:
                text = "%s \\, %s" % (inner, body)
        else:
            text = "\\left(%s\\right) %s" % (latex_element(coeff), body)
        if pieces and not text.startswith("-"):
            pieces.append("+")
            pieces.append(text)
        elif pieces:
            pieces.append("-")
            pieces.append(text[1:])
        else:
            pieces.append(text)
    return " ".join(pieces)


def latex_value(value) -> str:
    if isinstance(value, RationalFunction):
        return latex_coefficient(value)
    if isinstance(value, Element):
        return latex_element(value)
    if isinstance(value, Form):
        return latex_form(value)
    raise TypeError("no latex rendering for %r" % type(value).__name__)


def latex_relation(rel: DerivedRelation) -> str:
    left = " \\cdot ".join("\\mathit{%s}" % n for n in rel.left)
    if not rel.terms:
        return "%s = 0" % left
    pieces = []
    for rf, names in rel.terms:
        body = " \\cdot ".join("\\mathit{%s}" % n for n in names)
        if rf.is_one():
            text = body
        elif (-rf).is_one():
            text = "-" + body
        elif _is_plain(rf):
            text = "%s \\, %s" % (latex_coefficient(rf), body)
        else:
            text = "\\left(%s\\right) %s" % (latex_coefficient(rf), body)
        if pieces and not text.startswith("-"):
            pieces.append("+")
            pieces.append(text)
        elif pieces:
            pieces.append("-")
            pieces.append(text[1:])
        else:
            pieces.append(text)
    return "%s = %s" % (left, " ".join(pieces))


def relation_to_dict(rel: DerivedRelation) -> dict:
    return {
        "left": list(rel.left),
        "terms": [{"coefficient": str(rf), "factors": list(names)}
                  for rf, names in rel.terms],
    }


def result_to_dict(result) -> dict:
    out = {"anchor": result.anchor, "name": result.name,
           "status": result.status}
    if result.witness is not None:
        out["witness"] = result.witness
    return out


def report_to_dict(report) -> dict:
    return {
        "model": report.model,
        "seed": report.seed,
        "checks": [result_to_dict(r) for r in report.results],
        "passed": report.passed,
        "failed": report.failed,
    }
