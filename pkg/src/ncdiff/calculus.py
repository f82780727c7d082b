"""Diagonal differential calculi twisted by automorphisms.

A calculus fixes an ordered family of basis one-forms theta^s, one weight
element and one twist automorphism per s.  Coefficients pass through basis
forms by the twist (theta^s a = phi_s(a) theta^s), products of basis forms
reduce by declared two-form rules, the differential on elements is
d(a) = sum_s e_s(a) theta^s with e_s the twisted derivation of weight a_s,
and d extends to higher grades as a graded commutator with the inner form
vtheta = sum_s a_s theta^s.
"""

from __future__ import annotations

from fractions import Fraction

from .algebra import Algebra, AlgebraError, Element, random_element
from .coeff import RationalFunction, solve_linear
from .morphism import Endomorphism, TwistedDerivation


class CalculusError(AlgebraError):
    pass


class MissingThetaRuleError(CalculusError):
    """A product theta^s theta^s' has no declared reduction."""


class InexpressibleError(CalculusError):
    """A commutation relation has no solution in the candidate family."""


class Calculus:
    """A first-order calculus with a diagonal basis and its wedge rules."""

    def __init__(self, algebra: Algebra, labels, twists: dict, weights: dict,
                 theta_rules: dict):
        self.algebra = algebra
        self.labels = tuple(labels)
        if len(set(self.labels)) != len(self.labels):
            raise CalculusError("duplicate basis label")
        self._pos = {lab: i for i, lab in enumerate(self.labels)}
        self.twists = {}
        self.weights = {}
        for lab in self.labels:
            if lab not in twists:
                raise CalculusError("missing twist for %r" % lab)
            if lab not in weights:
                raise CalculusError("missing weight for %r" % lab)
            twist = twists[lab]
            if not isinstance(twist, Endomorphism) or twist.algebra is not algebra:
                raise CalculusError("twist of %r is not an endomorphism" % lab)
            weight = weights[lab]
            if not isinstance(weight, Element) or weight.algebra is not algebra:
                raise CalculusError("weight of %r is not an element" % lab)
            self.twists[lab] = twist
            self.weights[lab] = weight
        self.derivations = {lab: TwistedDerivation(self.twists[lab],
                                                   self.weights[lab])
                            for lab in self.labels}
        self.theta_rules = {}
        for (l1, l2), entries in theta_rules.items():
            i, j = self._pos[l1], self._pos[l2]
            if i < j:
                raise CalculusError(
                    "rule %s*%s does not rewrite a descent" % (l1, l2))
            converted = []
            for rf, (l3, l4) in entries:
                k, m = self._pos[l3], self._pos[l4]
                if k >= m:
                    raise CalculusError(
                        "rule %s*%s produces the non-ascending pair %s*%s"
                        % (l1, l2, l3, l4))
                if (k, m) >= (i, j):
                    raise CalculusError(
                        "rule %s*%s does not decrease the pair order" % (l1, l2))
                converted.append((rf, (k, m)))
            self.theta_rules[(i, j)] = tuple(converted)
        self._theta_cache = {}
        self._one = RationalFunction.from_value(algebra.params, 1)

    # -- forms ------------------------------------------------------------

    def zero_form(self) -> "Form":
        return Form(self, {})

    def form(self, terms: dict) -> "Form":
        out = {}
        for key, coeff in terms.items():
            if not coeff.is_zero():
                out[key] = coeff
        return Form(self, out)

    def theta(self, label: str) -> "Form":
        return Form(self, {(self._pos[label],): self.algebra.one()})

    def embed(self, value) -> "Form":
        if isinstance(value, Form):
            if value.calculus is not self:
                raise CalculusError("form from a different calculus")
            return value
        if isinstance(value, (int, Fraction, RationalFunction)):
            value = self.algebra.scalar(value)
        if not isinstance(value, Element) or value.algebra is not self.algebra:
            raise CalculusError("cannot embed %r into the calculus" % (value,))
        if value.is_zero():
            return self.zero_form()
        return Form(self, {(): value})

    def label_of(self, position: int) -> str:
        return self.labels[position]

    # -- multiplication ----------------------------------------------------

    def pass_coefficient(self, index, coeff: Element) -> Element:
        """Move an element from the right of theta^I to its left."""
        for pos in reversed(index):
            coeff = self.twists[self.labels[pos]].apply(coeff)
        return coeff

    def normalize_thetas(self, seq):
        """Rewrite a product of basis forms into ascending monomials."""
        cached = self._theta_cache.get(seq)
        if cached is not None:
            return cached
        result = self._reduce_thetas(seq)
        self._theta_cache[seq] = result
        return result

    def _reduce_thetas(self, seq):
        for i in range(len(seq) - 1):
            if seq[i] >= seq[i + 1]:
                rule = self.theta_rules.get((seq[i], seq[i + 1]))
                if rule is None:
                    raise MissingThetaRuleError(
                        "no rule for %s*%s" % (self.labels[seq[i]],
                                               self.labels[seq[i + 1]]))
                out = {}
                for rf, pair in rule:
                    spliced = seq[:i] + pair + seq[i + 2:]
                    for key, rf2 in self.normalize_thetas(spliced):
                        prev = out.get(key)
                        total = rf * rf2 if prev is None else prev + rf * rf2
                        if total.is_zero():
                            out.pop(key, None)
                        else:
                            out[key] = total
                return tuple(sorted(out.items()))
        return ((seq, self._one),)

    def wedge(self, left, right) -> "Form":
        left = self.embed(left)
        right = self.embed(right)
        out = {}
        for index1, a in left.terms.items():
            for index2, b in right.terms.items():
                passed = self.pass_coefficient(index1, b)
                coeff = a * passed
                if coeff.is_zero():
                    continue
                for key, rf in self.normalize_thetas(index1 + index2):
                    _acc_form(out, key, coeff.scale(rf))
        return Form(self, out)

    # -- differential --------------------------------------------------------

    def d_element(self, a: Element) -> "Form":
        terms = {}
        for i, lab in enumerate(self.labels):
            coeff = self.derivations[lab].apply(a)
            if not coeff.is_zero():
                terms[(i,)] = coeff
        return Form(self, terms)

    def inner_form(self) -> "Form":
        terms = {}
        for i, lab in enumerate(self.labels):
            w = self.weights[lab]
            if not w.is_zero():
                terms[(i,)] = w
        return Form(self, terms)

    def d(self, x) -> "Form":
        """d on elements, extended to forms as a graded commutator."""
        if not isinstance(x, Form):
            return self.d_element(self.embed(x).terms.get((), self.algebra.zero()))
        vt = self.inner_form()
        out = self.zero_form()
        for grade, part in x.by_grade().items():
            if grade == 0:
                out = out + self.d_element(part.terms.get((), self.algebra.zero()))
            elif grade % 2 == 0:
                out = out + (self.wedge(vt, part) - self.wedge(part, vt))
            else:
                out = out + (self.wedge(vt, part) + self.wedge(part, vt))
        return out

    # -- verification ----------------------------------------------------------

    def generator_elements(self):
        alg = self.algebra
        return [(name, alg.symbol_element(sym))
                for sym, name in enumerate(alg.table.symbols)]

    def is_inner(self, candidate: "Form" = None, rng=None, samples: int = 20):
        """Check d(x) = candidate x - x candidate; None means no witness."""
        if candidate is None:
            candidate = self.inner_form()
        probes = self.generator_elements()
        if rng is not None:
            probes = probes + [("random-%d" % i,
                                random_element(self.algebra, rng))
                               for i in range(samples)]
        for name, x in probes:
            lhs = self.d_element(x)
            rhs = self.wedge(candidate, x) - self.wedge(x, candidate)
            if lhs != rhs:
                return (name, lhs - rhs)
        return None

    def d_squared_witness(self):
        """None when vtheta^2 is graded-central (so d.d = 0), else a witness."""
        square = self.wedge(self.inner_form(), self.inner_form())
        for name, x in self.generator_elements():
            diff = self.wedge(square, x) - self.wedge(x, square)
            if not diff.is_zero():
                return (name, diff)
        for lab in self.labels:
            t = self.theta(lab)
            diff = self.wedge(square, t) - self.wedge(t, square)
            if not diff.is_zero():
                return (lab, diff)
        return None

    # -- derived commutation relations ---------------------------------------

    def commutation_relations(self, forms: dict, elements: dict,
                              side: str = "element_first"):
        """Express products of the named forms and elements in the other order.

        side "element_first" solves e * w = sum of c * w' * e'; side
        "form_first" solves w * e = sum of c * e' * w'.  The coefficients c
        live in the coefficient field.
        """
        if side not in ("element_first", "form_first"):
            raise ValueError("side must be element_first or form_first")
        candidates = []
        for w_name, w in forms.items():
            for e_name, e in elements.items():
                if side == "element_first":
                    product = self.wedge(w, e)
                    candidates.append(((w_name, e_name), product))
                else:
                    product = self.wedge(self.embed(e), w)
                    candidates.append(((e_name, w_name), product))
        results = []
        for e_name, e in elements.items():
            for w_name, w in forms.items():
                if side == "element_first":
                    target = self.wedge(self.embed(e), w)
                    left = (e_name, w_name)
                else:
                    target = self.wedge(w, e)
                    left = (w_name, e_name)
                coords = []
                seen = set()
                for form in [target] + [c for _, c in candidates]:
                    for index, elt in form.terms.items():
                        for word in elt.terms:
                            if (index, word) not in seen:
                                seen.add((index, word))
                                coords.append((index, word))
                coords.sort()
                rows = []
                rhs = []
                zero = RationalFunction.from_value(self.algebra.params, 0)
                for coord in coords:
                    rows.append([_coord(c, coord, zero) for _, c in candidates])
                    rhs.append(_coord(target, coord, zero))
                solved = solve_linear(rows, rhs, self.algebra.params)
                if solved is None:
                    raise InexpressibleError(
                        "%s * %s has no expansion in the candidate products"
                        % left)
                solution, free = solved
                for col in free:
                    used = any(not row[col].is_zero() for row in rows)
                    if used:
                        raise CalculusError(
                            "%s * %s has an underdetermined expansion" % left)
                terms = [(coeff, names) for coeff, (names, _) in
                         zip(solution, candidates) if not coeff.is_zero()]
                results.append(DerivedRelation(side, left, terms))
        return results


def _coord(form: "Form", coord, zero):
    index, word = coord
    elt = form.terms.get(index)
    if elt is None:
        return zero
    return elt.terms.get(word, zero)


def _acc_form(terms: dict, key, coeff: Element) -> None:
    prev = terms.get(key)
    if prev is None:
        if not coeff.is_zero():
            terms[key] = coeff
    else:
        s = prev + coeff
        if s.is_zero():
            del terms[key]
        else:
            terms[key] = s


class Form:
    """A graded form: ascending index tuples with element coefficients."""

    __slots__ = ("calculus", "terms")

    def __init__(self, calculus: Calculus, terms: dict):
        self.calculus = calculus
        self.terms = terms

    def is_zero(self) -> bool:
        return not self.terms

    def grades(self):
        return sorted({len(k) for k in self.terms})

    def by_grade(self) -> dict:
        out = {}
        for key, coeff in self.terms.items():
            out.setdefault(len(key), {})[key] = coeff
        return {g: Form(self.calculus, t) for g, t in sorted(out.items())}

    def coefficient(self, *labels) -> Element:
        key = tuple(self.calculus._pos[lab] for lab in labels)
        return self.terms.get(key, self.calculus.algebra.zero())

    def _coerce(self, other):
        try:
            return self.calculus.embed(other)
        except CalculusError:
            return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = dict(self.terms)
        for key, coeff in other.terms.items():
            _acc_form(out, key, coeff)
        return Form(self.calculus, out)

    __radd__ = __add__

    def __neg__(self):
        return Form(self.calculus, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, RationalFunction)):
            return self.scale(other)
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self.calculus.wedge(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction, RationalFunction)):
            return self.scale(other)
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self.calculus.wedge(other, self)

    def scale(self, factor) -> "Form":
        out = {}
        for key, coeff in self.terms.items():
            scaled = coeff.scale(factor)
            if not scaled.is_zero():
                out[key] = scaled
        return Form(self.calculus, out)

    def __eq__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return (self - other).is_zero()

    def __str__(self):
        return render_form(self)

    __repr__ = __str__


class DerivedRelation:
    """One solved commutation relation between a named form and element."""

    __slots__ = ("side", "left", "terms")

    def __init__(self, side: str, left, terms):
        self.side = side
        self.left = left
        self.terms = terms

    def render(self) -> str:
        lhs = "%s * %s" % self.left
        if not self.terms:
            return "%s = 0" % lhs
        parts = []
        for coeff, names in self.terms:
            body = "%s * %s" % names
            s = str(coeff)
            sign = "+"
            if s.startswith("-"):
                s2 = str(-coeff)
                if not s2.startswith("-"):
                    sign = "-"
                    s = s2
            if " " in s or "/" in s:
                s = "(%s)" % s
            term = body if s == "1" else "%s * %s" % (s, body)
            if not parts:
                parts.append(term if sign == "+" else "-" + term)
            else:
                parts.append((" + " if sign == "+" else " - ") + term)
        return "%s = %s" % (lhs, "".join(parts))

    def __repr__(self):
        return self.render()


def render_form(form: Form) -> str:
    from .algebra import render_element
    if not form.terms:
        return "0"
    labels = form.calculus.labels
    parts = []
    for key in sorted(form.terms, key=lambda k: (len(k), k)):
        coeff = form.terms[key]
        theta_s = "*".join(labels[i] for i in key)
        elt_s = render_element(coeff)
        if not key:
            body = elt_s
        elif elt_s == "1":
            body = theta_s
        elif len(coeff.terms) == 1:
            body = "%s * %s" % (elt_s, theta_s)
        else:
            body = "(%s) * %s" % (elt_s, theta_s)
        sign = "+"
        if body.startswith("-"):
            alt = render_element(-coeff)
            if not alt.startswith("-"):
                sign = "-"
                if not key:
                    body = alt
                elif alt == "1":
                    body = theta_s
                elif len(coeff.terms) == 1:
                    body = "%s * %s" % (alt, theta_s)
                else:
                    body = "(%s) * %s" % (alt, theta_s)
        if not parts:
            parts.append(body if sign == "+" else "-" + body)
        else:
            parts.append((" + " if sign == "+" else " - ") + body)
    return "".join(parts)
