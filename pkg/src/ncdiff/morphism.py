"""Endomorphisms of a presented algebra and the derivations they twist.

An endomorphism is determined by its images on base generators; images of
inverse symbols are forced (the image of an invertible generator must be a
single invertible monomial).  A twisted derivation is the operator
e(x) = a * phi(x) - x * a for a weight a and a twist phi; it satisfies the
twisted Leibniz law e(xy) = e(x) phi(y) + x e(y).
"""

from __future__ import annotations

from .algebra import Algebra, AlgebraError, Element, single_word, word_from_runs


class MorphismError(AlgebraError):
    pass


class Endomorphism:
    """An algebra endomorphism given by generator images."""

    __slots__ = ("algebra", "images", "name", "_word_cache")

    def __init__(self, algebra: Algebra, images: dict, name: str | None = None):
        """images maps base generator names to elements."""
        self.algebra = algebra
        self.name = name
        table = algebra.table
        by_symbol = {}
        for gen_name in table.base_names:
            if gen_name not in images:
                raise MorphismError("missing image for generator %r" % gen_name)
        for gen_name, img in images.items():
            if gen_name not in table.base_names:
                raise MorphismError("image for unknown generator %r" % gen_name)
            if not isinstance(img, Element) or img.algebra is not algebra:
                raise MorphismError("image of %r is not an algebra element" % gen_name)
            sym = table.index(gen_name)
            by_symbol[sym] = img
            if gen_name in table.invertible:
                by_symbol[table.inverse_index[sym]] = _invert_monomial(img, gen_name)
        self.images = by_symbol
        self._word_cache = {(): algebra.one()}

    def apply(self, x: Element) -> Element:
        if x.algebra is not self.algebra:
            raise MorphismError("element of a different algebra")
        out = self.algebra.zero()
        for word, coeff in x.terms.items():
            out = out + self._apply_word(word).scale(coeff)
        return out

    __call__ = apply

    def _apply_word(self, word) -> Element:
        cached = self._word_cache.get(word)
        if cached is not None:
            return cached
        out = self.algebra.one()
        for sym, count in word:
            img = self.images[sym]
            for _ in range(count):
                out = out * img
        self._word_cache[word] = out
        return out

    def respects_relations(self) -> bool:
        """Check every declared relation and inverse-pair consistency."""
        alg = self.algebra
        for lhs, rhs in alg.relations:
            if self._apply_free(lhs) != self._apply_free(rhs):
                return False
        for name in alg.table.base_names:
            if name in alg.table.invertible:
                sym = alg.table.index(name)
                inv = alg.table.inverse_index[sym]
                prod = self.images[sym] * self.images[inv]
                if prod != alg.one():
                    return False
        return True

    def _apply_free(self, terms: dict) -> Element:
        out = self.algebra.zero()
        for word, coeff in terms.items():
            out = out + self._apply_word(word).scale(coeff)
        return out

    def compose(self, other: "Endomorphism") -> "Endomorphism":
        """The endomorphism x -> self(other(x))."""
        if other.algebra is not self.algebra:
            raise MorphismError("endomorphisms of different algebras")
        table = self.algebra.table
        images = {name: self.apply(other.images[table.index(name)])
                  for name in table.base_names}
        name = None
        if self.name and other.name:
            name = "%s*%s" % (self.name, other.name)
        return Endomorphism(self.algebra, images, name)

    def is_identity(self) -> bool:
        return all(self.images[self.algebra.table.index(n)] == self.algebra.gen(n)
                   for n in self.algebra.table.base_names)

    def diagonal_scaling(self) -> dict | None:
        """The scalar c_g per generator when phi(g) = c_g g, else None."""
        table = self.algebra.table
        out = {}
        for name in table.base_names:
            img = self.images[table.index(name)]
            if len(img.terms) != 1:
                return None
            (word, coeff), = img.terms.items()
            if word != single_word(table.index(name)):
                return None
            out[name] = coeff
        return out

    def inverse(self) -> "Endomorphism":
        """The inverse endomorphism; derived only for diagonal scalings."""
        scaling = self.diagonal_scaling()
        if scaling is None:
            raise MorphismError(
                "cannot derive the inverse of a non-diagonal endomorphism")
        alg = self.algebra
        images = {name: alg.gen(name).scale(c.inverse())
                  for name, c in scaling.items()}
        name = None if self.name is None else self.name + "^-1"
        return Endomorphism(alg, images, name)

    def verify_inverse(self, other: "Endomorphism") -> bool:
        """True when both compositions fix every generator."""
        table = self.algebra.table
        for name in table.base_names:
            g = self.algebra.gen(name)
            if self.apply(other.apply(g)) != g:
                return False
            if other.apply(self.apply(g)) != g:
                return False
        return True

    def __repr__(self):
        return "Endomorphism(%s)" % (self.name or "?")


def _invert_monomial(img: Element, gen_name: str) -> Element:
    """Invert a single-term image whose word uses invertible symbols only."""
    if len(img.terms) != 1:
        raise MorphismError(
            "image of invertible generator %r is not a monomial" % gen_name)
    (word, coeff), = img.terms.items()
    table = img.algebra.table
    runs = []
    for sym, count in reversed(word):
        partner = table.inverse_index.get(sym)
        if partner is None:
            raise MorphismError(
                "image of invertible generator %r uses a non-invertible symbol"
                % gen_name)
        runs.append((partner, count))
    return Element(img.algebra,
                   {word_from_runs(runs): coeff.inverse()})


def identity_endomorphism(algebra: Algebra, name: str = "id") -> Endomorphism:
    return Endomorphism(algebra,
                        {n: algebra.gen(n) for n in algebra.table.base_names},
                        name)


class TwistedDerivation:
    """e(x) = weight * twist(x) - x * weight."""

    __slots__ = ("twist", "weight")

    def __init__(self, twist: Endomorphism, weight: Element):
        if weight.algebra is not twist.algebra:
            raise MorphismError("weight from a different algebra")
        self.twist = twist
        self.weight = weight

    def apply(self, x: Element) -> Element:
        return self.weight * self.twist.apply(x) - x * self.weight

    __call__ = apply

    def satisfies_leibniz(self, x: Element, y: Element) -> bool:
        """Twisted Leibniz law on one pair: e(xy) = e(x) phi(y) + x e(y)."""
        left = self.apply(x * y)
        right = self.apply(x) * self.twist.apply(y) + x * self.apply(y)
        return left == right
