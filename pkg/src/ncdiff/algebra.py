"""Finitely presented algebras with two-letter rewriting rules.

Words over the generator alphabet are stored run-length encoded.  A
presentation is a list of relations whose orientation (largest word in the
degree-then-lexicographic order becomes the left-hand side) yields rewriting
rules with two-letter left-hand sides.  Normal forms are computed by leftmost
reduction with memoization; local confluence is checked on all length-three
overlap words, which by the diamond lemma suffices for confluence of a
terminating two-letter system.
"""

from __future__ import annotations

from fractions import Fraction

from .coeff import ParameterSet, RationalFunction


class AlgebraError(Exception):
    pass


class UnsupportedRelationError(AlgebraError):
    """A relation that the inverse-rule derivation cannot handle."""


class GeneratorTable:
    """Generator symbols in declaration order, inverses adjacent to bases."""

    __slots__ = ("base_names", "invertible", "symbols", "_index",
                 "inverse_index", "base_index")

    def __init__(self, base_names, invertible=()):
        base_names = tuple(base_names)
        if len(set(base_names)) != len(base_names):
            raise ValueError("duplicate generator name")
        invertible = tuple(invertible)
        for name in invertible:
            if name not in base_names:
                raise ValueError("unknown invertible generator %r" % name)
        self.base_names = base_names
        self.invertible = frozenset(invertible)
        symbols = []
        inverse_index = {}
        base_index = {}
        for name in base_names:
            i = len(symbols)
            symbols.append(name)
            base_index[i] = i
            if name in self.invertible:
                j = len(symbols)
                symbols.append(name + "^-1")
                inverse_index[i] = j
                inverse_index[j] = i
                base_index[j] = i
        self.symbols = tuple(symbols)
        self._index = {n: i for i, n in enumerate(symbols)}
        self.inverse_index = inverse_index
        self.base_index = base_index

    def index(self, name: str) -> int:
        return self._index[name]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def is_inverse_symbol(self, sym: int) -> bool:
        return self.base_index[sym] != sym

    def __eq__(self, other):
        return (isinstance(other, GeneratorTable)
                and self.base_names == other.base_names
                and self.invertible == other.invertible)

    def __hash__(self):
        return hash((self.base_names, self.invertible))


# A word is a tuple of (symbol, count) runs with positive counts and
# distinct adjacent symbols; the empty tuple is the unit.

def word_from_runs(runs):
    out = []
    for sym, count in runs:
        if count == 0:
            continue
        if count < 0:
            raise ValueError("negative run count")
        if out and out[-1][0] == sym:
            out[-1][1] += count
        else:
            out.append([sym, count])
    return tuple((s, c) for s, c in out)


def concat_words(*words):
    runs = []
    for w in words:
        runs.extend(w)
    return word_from_runs(runs)


def word_degree(word) -> int:
    return sum(c for _, c in word)


def word_letters(word):
    out = []
    for sym, count in word:
        out.extend([sym] * count)
    return tuple(out)


def deg_lex_key(word):
    return (word_degree(word), word_letters(word))


def single_word(sym: int, count: int = 1):
    return ((sym, count),)


class Element:
    """A finite sum of words with rational-function coefficients."""

    __slots__ = ("algebra", "terms")

    def __init__(self, algebra: "Algebra", terms: dict):
        self.algebra = algebra
        self.terms = terms

    def is_zero(self) -> bool:
        return not self.terms

    def is_one(self) -> bool:
        return (len(self.terms) == 1 and () in self.terms
                and self.terms[()].is_one())

    def _coerce(self, other):
        if isinstance(other, Element):
            if other.algebra is not self.algebra:
                raise AlgebraError("elements of different algebras")
            return other
        if isinstance(other, (int, Fraction, RationalFunction)):
            return self.algebra.scalar(other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = dict(self.terms)
        for w, c in other.terms.items():
            _accumulate(out, w, c)
        return Element(self.algebra, out)

    __radd__ = __add__

    def __neg__(self):
        return Element(self.algebra, {w: -c for w, c in self.terms.items()})

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
        alg = self.algebra
        out = {}
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                c = c1 * c2
                for w, k in alg.normal_form_word(concat_words(w1, w2)).items():
                    _accumulate(out, w, c * k)
        return Element(alg, out)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction, RationalFunction)):
            return self.scale(other)
        return NotImplemented

    def scale(self, factor) -> "Element":
        if not isinstance(factor, RationalFunction):
            factor = RationalFunction.from_value(self.algebra.params, factor)
        if factor.is_zero():
            return self.algebra.zero()
        return Element(self.algebra, {w: c * factor for w, c in self.terms.items()})

    def __pow__(self, n: int) -> "Element":
        if n < 0:
            raise AlgebraError("negative power of an element")
        out = self.algebra.one()
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return (self - other).is_zero()

    def __str__(self):
        return render_element(self)

    __repr__ = __str__


def _accumulate(terms: dict, word, coeff) -> None:
    prev = terms.get(word)
    if prev is None:
        if not coeff.is_zero():
            terms[word] = coeff
    else:
        s = prev + coeff
        if s.is_zero():
            del terms[word]
        else:
            terms[word] = s


class ConfluenceViolation:
    """A length-three overlap (or duplicated pair) with distinct normal forms."""

    __slots__ = ("word", "left", "right")

    def __init__(self, word, left: Element, right: Element):
        self.word = word
        self.left = left
        self.right = right

    def __repr__(self):
        return "ConfluenceViolation(word=%r, left=%s, right=%s)" % (
            self.word, self.left, self.right)


class Algebra:
    """An algebra presented by relations that orient to two-letter rules."""

    def __init__(self, params: ParameterSet, table: GeneratorTable,
                 relations=()):
        self.params = params
        self.table = table
        self._one = RationalFunction.from_value(params, 1)
        self.relations = []
        self.rules = {}
        self._nf_cache = {}
        self.reduction_count = 0
        for g in table.base_names:
            if g in table.invertible:
                i = table.index(g)
                j = table.inverse_index[i]
                unit = {(): self._one}
                self._add_rule((i, j), unit)
                self._add_rule((j, i), unit)
        for lhs, rhs in relations:
            self.add_relation(lhs, rhs)

    # -- presentation ----------------------------------------------------

    def _add_rule(self, pair, rhs_terms: dict) -> None:
        self.rules.setdefault(pair, []).append(dict(rhs_terms))
        self._nf_cache.clear()

    def add_relation(self, lhs_terms: dict, rhs_terms: dict) -> None:
        """Orient lhs = rhs into a rule with a two-letter left-hand side."""
        diff = {w: c for w, c in lhs_terms.items() if not c.is_zero()}
        for w, c in rhs_terms.items():
            _accumulate(diff, w, -c)
        if not diff:
            raise AlgebraError("relation is trivially zero")
        lead = max(diff, key=deg_lex_key)
        letters = word_letters(lead)
        if len(letters) != 2:
            raise UnsupportedRelationError(
                "leading word %s is not two letters long" % (letters,))
        coeff = diff.pop(lead)
        inv = coeff.inverse()
        rhs = {w: -c * inv for w, c in diff.items()}
        lead_key = deg_lex_key(lead)
        for w in rhs:
            if deg_lex_key(w) >= lead_key:
                raise UnsupportedRelationError(
                    "rule right-hand side is not smaller than %s" % (letters,))
        pair = (letters[0], letters[1])
        self.relations.append((dict(lhs_terms), dict(rhs_terms)))
        self._add_rule(pair, rhs)
        for derived_pair, derived_rhs in self._conjugated(pair, rhs):
            if derived_pair not in self.rules:
                self._add_rule(derived_pair, derived_rhs)

    def _conjugated(self, pair, rhs: dict):
        """Rules for inverse-symbol pairs implied by a pure swap relation."""
        table = self.table
        v, u = pair
        if table.is_inverse_symbol(u) or table.is_inverse_symbol(v):
            return []
        u_inv = table.inverse_index.get(u)
        v_inv = table.inverse_index.get(v)
        if u_inv is None and v_inv is None:
            return []
        if u == v:
            raise UnsupportedRelationError(
                "cannot derive inverse rules for a squared generator")
        swap = concat_words(single_word(u), single_word(v))
        if len(rhs) != 1 or swap not in rhs:
            raise UnsupportedRelationError(
                "relation with a tail or non-swap shape on an invertible pair")
        c = rhs[swap]
        alpha = c.inverse()
        out = []
        if u_inv is not None:
            out.append(((v, u_inv),
                        {concat_words(single_word(u_inv), single_word(v)): alpha}))
        if v_inv is not None:
            out.append(((v_inv, u),
                        {concat_words(single_word(u), single_word(v_inv)): alpha}))
        if u_inv is not None and v_inv is not None:
            out.append(((v_inv, u_inv),
                        {concat_words(single_word(u_inv), single_word(v_inv)): c}))
        return out

    def normalize_rules(self) -> None:
        """Reduce every rule right-hand side to normal form."""
        for pair in list(self.rules):
            self.rules[pair] = [self.normal_form_terms(rhs)
                                for rhs in self.rules[pair]]
        self._nf_cache.clear()

    # -- elements ---------------------------------------------------------

    def zero(self) -> Element:
        return Element(self, {})

    def one(self) -> Element:
        return Element(self, {(): self._one})

    def scalar(self, value) -> Element:
        if not isinstance(value, RationalFunction):
            value = RationalFunction.from_value(self.params, value)
        if value.is_zero():
            return self.zero()
        return Element(self, {(): value})

    def gen(self, name: str) -> Element:
        return Element(self, {single_word(self.table.index(name)): self._one})

    def symbol_element(self, sym: int) -> Element:
        return Element(self, {single_word(sym): self._one})

    def element(self, terms: dict) -> Element:
        """Normalize a free sum of words into an element."""
        return Element(self, self.normal_form_terms(terms))

    # -- rewriting ----------------------------------------------------------

    def normal_form_terms(self, terms: dict) -> dict:
        out = {}
        for w, c in terms.items():
            if c.is_zero():
                continue
            for w2, k in self.normal_form_word(w).items():
                _accumulate(out, w2, c * k)
        return out

    def normal_form_word(self, word) -> dict:
        cached = self._nf_cache.get(word)
        if cached is not None:
            return cached
        result = self._reduce_word(word)
        self._nf_cache[word] = result
        return result

    def _reduce_word(self, word) -> dict:
        for i in range(len(word)):
            sym, count = word[i]
            if i > 0:
                prev_sym, prev_count = word[i - 1]
                rules = self.rules.get((prev_sym, sym))
                if rules:
                    prefix = word[:i - 1] + ((prev_sym, prev_count - 1),)
                    suffix = ((sym, count - 1),) + word[i + 1:]
                    return self._splice(rules[0], prefix, suffix)
            if count >= 2:
                rules = self.rules.get((sym, sym))
                if rules:
                    prefix = word[:i]
                    suffix = ((sym, count - 2),) + word[i + 1:]
                    return self._splice(rules[0], prefix, suffix)
        return {word: self._one}

    def _splice(self, rhs: dict, prefix, suffix) -> dict:
        self.reduction_count += 1
        out = {}
        for mid, c in rhs.items():
            spliced = concat_words(word_from_runs(prefix), mid,
                                   word_from_runs(suffix))
            for w, k in self.normal_form_word(spliced).items():
                _accumulate(out, w, c * k)
        return out

    # -- diagnostics ---------------------------------------------------------

    def check_confluence(self):
        """Return all local-confluence violations on length-three overlaps."""
        violations = []
        for (u, v), rhs_list in self.rules.items():
            if len(rhs_list) > 1:
                base = self.element(rhs_list[0])
                for other in rhs_list[1:]:
                    alt = self.element(other)
                    if not (base - alt).is_zero():
                        violations.append(ConfluenceViolation((u, v), base, alt))
            for (v2, w), rhs_list2 in self.rules.items():
                if v2 != v:
                    continue
                for rhs1 in rhs_list:
                    for rhs2 in rhs_list2:
                        left = self.element(rhs1) * self.symbol_element(w)
                        right = self.symbol_element(u) * self.element(rhs2)
                        if not (left - right).is_zero():
                            violations.append(
                                ConfluenceViolation((u, v, w), left, right))
        return violations

    def verify_relations(self) -> bool:
        """Soundness: both sides of every declared relation have equal NF."""
        for lhs, rhs in self.relations:
            if not (self.element(lhs) - self.element(rhs)).is_zero():
                return False
        return True


def derive_inverse_rules(algebra: Algebra, pair, rhs_terms: dict):
    """Expose the conjugation-derived rules for one oriented swap rule."""
    return algebra._conjugated(pair, rhs_terms)


def random_element(algebra: Algebra, rng, max_terms: int = 3,
                   max_length: int = 3) -> Element:
    """A random element: short words, coefficients from a small pool."""
    params = algebra.params
    pool = [RationalFunction.from_value(params, 1),
            RationalFunction.from_value(params, -1),
            RationalFunction.parameter(params, params.names[0]),
            RationalFunction.parameter(params, params.names[1], -1)]
    n_symbols = len(algebra.table.symbols)
    terms = {}
    for _ in range(rng.randint(1, max_terms)):
        length = rng.randint(0, max_length)
        letters = [rng.randrange(n_symbols) for _ in range(length)]
        word = word_from_runs((s, 1) for s in letters)
        _accumulate(terms, word, rng.choice(pool))
    return algebra.element(terms)


# -- rendering ---------------------------------------------------------------

def render_word(table: GeneratorTable, word) -> str:
    if not word:
        return "1"
    parts = []
    for sym, count in word:
        name = table.symbols[sym]
        if table.is_inverse_symbol(sym):
            base = table.symbols[table.base_index[sym]]
            parts.append("%s^-%d" % (base, count))
        elif count == 1:
            parts.append(name)
        else:
            parts.append("%s^%d" % (name, count))
    return "*".join(parts)


def _coeff_term(coeff: RationalFunction, word_s: str, lead: bool) -> str:
    s = str(coeff)
    sign = "+"
    if s.startswith("-"):
        s2 = str(-coeff)
        if not s2.startswith("-"):
            sign = "-"
            s = s2
    if " " in s or "/" in s:
        s = "(%s)" % s
    if word_s == "1":
        body = s
    elif s == "1":
        body = word_s
    else:
        body = "%s * %s" % (s, word_s)
    if lead:
        return body if sign == "+" else "-" + body
    return (" + " if sign == "+" else " - ") + body


def render_element(element: Element) -> str:
    if not element.terms:
        return "0"
    table = element.algebra.table
    words = sorted(element.terms, key=deg_lex_key)
    return "".join(
        _coeff_term(element.terms[w], render_word(table, w), i == 0)
        for i, w in enumerate(words))
