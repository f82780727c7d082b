"""Exact arithmetic in the field Q(p, q, ...) of rational functions.

Coefficients are quotients of Laurent polynomials with ``fractions.Fraction``
coefficients.  No multivariate gcd is attempted: a quotient is normalized by
clearing the denominator's Laurent-monomial content and scaling it monic with
respect to the graded-lexicographic order, and equality is decided by the
cross-multiplication zero test, which is exact in an integral domain.
"""

from __future__ import annotations

from fractions import Fraction


class PoleError(ZeroDivisionError):
    """Raised when a rational function is evaluated at a pole."""


class ParameterSet:
    """An ordered tuple of parameter names, fixing exponent-vector layout."""

    __slots__ = ("names", "_index")

    def __init__(self, names):
        names = tuple(names)
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter name")
        self.names = names
        self._index = {n: i for i, n in enumerate(names)}

    def index(self, name: str) -> int:
        return self._index[name]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self.names)

    def __eq__(self, other) -> bool:
        return isinstance(other, ParameterSet) and self.names == other.names

    def __hash__(self) -> int:
        return hash(self.names)

    def __repr__(self) -> str:
        return "ParameterSet%r" % (self.names,)


def _grlex_key(mono):
    return (sum(mono), mono)


class Polynomial:
    """A Laurent polynomial: dict from exponent vectors to Fraction."""

    __slots__ = ("params", "terms")

    def __init__(self, params: ParameterSet, terms=None):
        self.params = params
        clean = {}
        if terms:
            for mono, c in terms.items():
                c = Fraction(c)
                if c:
                    clean[tuple(mono)] = c
        self.terms = clean

    @classmethod
    def constant(cls, params: ParameterSet, value) -> "Polynomial":
        return cls(params, {(0,) * len(params): Fraction(value)})

    @classmethod
    def variable(cls, params: ParameterSet, name: str, power: int = 1) -> "Polynomial":
        mono = [0] * len(params)
        mono[params.index(name)] = power
        return cls(params, {tuple(mono): Fraction(1)})

    def is_zero(self) -> bool:
        return not self.terms

    def is_one(self) -> bool:
        zero_mono = (0,) * len(self.params)
        return self.terms == {zero_mono: Fraction(1)}

    def __eq__(self, other) -> bool:
        return (isinstance(other, Polynomial) and self.params == other.params
                and self.terms == other.terms)

    def __hash__(self):
        return hash((self.params, frozenset(self.terms.items())))

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.params, {m: -c for m, c in self.terms.items()})

    def __add__(self, other: "Polynomial") -> "Polynomial":
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, 0) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        return Polynomial(self.params, out)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        out = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                s = out.get(m, 0) + c1 * c2
                if s:
                    out[m] = s
                else:
                    out.pop(m, None)
        return Polynomial(self.params, out)

    def scale(self, factor) -> "Polynomial":
        factor = Fraction(factor)
        return Polynomial(self.params, {m: c * factor for m, c in self.terms.items()})

    def shift(self, vector) -> "Polynomial":
        """Multiply by the Laurent monomial with the given exponent vector."""
        return Polynomial(self.params, {
            tuple(a + b for a, b in zip(m, vector)): c for m, c in self.terms.items()})

    def leading_monomial(self):
        return max(self.terms, key=_grlex_key)

    def try_exact_divide(self, divisor: "Polynomial"):
        """The quotient when the divisor divides exactly, else None."""
        if divisor.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        if self.is_zero():
            return self
        n = len(self.params)
        shift_f = [min(m[i] for m in self.terms) for i in range(n)]
        shift_g = [min(m[i] for m in divisor.terms) for i in range(n)]
        work = {tuple(a - b for a, b in zip(m, shift_f)): c
                for m, c in self.terms.items()}
        g = {tuple(a - b for a, b in zip(m, shift_g)): c
             for m, c in divisor.terms.items()}
        g_lead = max(g, key=_grlex_key)
        g_lc = g[g_lead]
        quotient = {}
        while work:
            lead = max(work, key=_grlex_key)
            step = tuple(a - b for a, b in zip(lead, g_lead))
            if any(e < 0 for e in step):
                return None
            c = work[lead] / g_lc
            quotient[step] = c
            for m, cg in g.items():
                key = tuple(a + b for a, b in zip(step, m))
                s = work.get(key, 0) - c * cg
                if s:
                    work[key] = s
                else:
                    work.pop(key, None)
        back = tuple(a - b for a, b in zip(shift_f, shift_g))
        return Polynomial(self.params, {
            tuple(a + b for a, b in zip(m, back)): c
            for m, c in quotient.items()})

    def evaluate(self, point: dict) -> Fraction:
        """Evaluate at a dict of Fraction values, one per parameter."""
        values = [Fraction(point[n]) for n in self.params.names]
        total = Fraction(0)
        for mono, c in self.terms.items():
            v = c
            for base, e in zip(values, mono):
                if e:
                    if base == 0 and e < 0:
                        raise PoleError("negative power of zero")
                    v *= base ** e
            total += v
        return total

    def _term_str(self, mono, coeff, lead: bool) -> str:
        parts = []
        for name, e in zip(self.params.names, mono):
            if e == 1:
                parts.append(name)
            elif e:
                parts.append("%s^%d" % (name, e))
        mag = -coeff if coeff < 0 else coeff
        if not parts:
            body = str(mag)
        elif mag == 1:
            body = "*".join(parts)
        else:
            body = "*".join([str(mag)] + parts)
        if lead:
            return "-" + body if coeff < 0 else body
        return (" - " if coeff < 0 else " + ") + body

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        monos = sorted(self.terms, key=_grlex_key, reverse=True)
        return "".join(self._term_str(m, self.terms[m], i == 0)
                       for i, m in enumerate(monos))

    __repr__ = __str__


def _poly_one(params: ParameterSet) -> Polynomial:
    return Polynomial.constant(params, 1)


class RationalFunction:
    """A quotient of Laurent polynomials in normalized form.

    Normalized means: a zero numerator is stored as 0/1, the denominator has
    no Laurent-monomial content (its componentwise minimum exponent vector is
    zero), and the denominator is monic in the graded-lexicographic order.
    """

    __slots__ = ("num", "den")

    def __init__(self, num: Polynomial, den: Polynomial | None = None):
        params = num.params
        if den is None:
            den = _poly_one(params)
        if den.params != params:
            raise ValueError("mismatched parameter sets")
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        if num.is_zero():
            self.num = num
            self.den = _poly_one(params)
            return
        if len(den.terms) > 1:
            quotient = num.try_exact_divide(den)
            if quotient is not None:
                num = quotient
                den = _poly_one(params)
            elif len(num.terms) > 1:
                quotient = den.try_exact_divide(num)
                if quotient is not None:
                    num = _poly_one(params)
                    den = quotient
        shift = [min(m[i] for m in den.terms) for i in range(len(params))]
        if any(shift):
            back = tuple(-s for s in shift)
            num = num.shift(back)
            den = den.shift(back)
        lc = den.terms[den.leading_monomial()]
        if lc != 1:
            inv = 1 / lc
            num = num.scale(inv)
            den = den.scale(inv)
        self.num = num
        self.den = den

    @classmethod
    def from_value(cls, params: ParameterSet, value) -> "RationalFunction":
        return cls(Polynomial.constant(params, value))

    @classmethod
    def parameter(cls, params: ParameterSet, name: str, power: int = 1) -> "RationalFunction":
        return cls(Polynomial.variable(params, name, power))

    @property
    def params(self) -> ParameterSet:
        return self.num.params

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_one(self) -> bool:
        return self.num == self.den

    def _coerce(self, other):
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, (int, Fraction)):
            return RationalFunction.from_value(self.params, other)
        return None

    def __eq__(self, other) -> bool:
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        if self.num == other.num and self.den == other.den:
            return True
        return (self.num * other.den - other.num * self.den).is_zero()

    def __neg__(self) -> "RationalFunction":
        return RationalFunction(-self.num, self.den)

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        if self.den == other.den:
            return RationalFunction(self.num + other.num, self.den)
        return RationalFunction(self.num * other.den + other.num * self.den,
                                self.den * other.den)

    __radd__ = __add__

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
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return RationalFunction(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def inverse(self) -> "RationalFunction":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero")
        return RationalFunction(self.den, self.num)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other * self.inverse()

    def __pow__(self, n: int) -> "RationalFunction":
        if n == 0:
            return RationalFunction.from_value(self.params, 1)
        base = self if n > 0 else self.inverse()
        out = base
        for _ in range(abs(n) - 1):
            out = out * base
        return out

    def _map_poly(self, poly: Polynomial, images: dict) -> "RationalFunction":
        params = self.params
        total = RationalFunction.from_value(params, 0)
        for mono, c in poly.terms.items():
            v = RationalFunction.from_value(params, c)
            for name, e in zip(params.names, mono):
                if e:
                    v = v * images[name] ** e
            total = total + v
        return total

    def substitute(self, bindings: dict) -> "RationalFunction":
        """Replace parameters by rational functions over the same set."""
        params = self.params
        images = {n: RationalFunction.parameter(params, n) for n in params.names}
        for name, value in bindings.items():
            if name not in params:
                raise KeyError("unknown parameter %r" % name)
            if not isinstance(value, RationalFunction):
                value = RationalFunction.from_value(params, value)
            images[name] = value
        num = self._map_poly(self.num, images)
        den = self._map_poly(self.den, images)
        if den.is_zero():
            raise ZeroDivisionError("substitution maps denominator to zero")
        return num / den

    def evaluate(self, point: dict) -> Fraction:
        """Evaluate at a dict of Fraction values; raises PoleError on poles."""
        den = self.den.evaluate(point)
        if den == 0:
            raise PoleError("evaluation at a pole")
        return self.num.evaluate(point) / den

    def __str__(self) -> str:
        if self.den == _poly_one(self.params):
            return str(self.num)
        num_s = str(self.num)
        if len(self.num.terms) > 1:
            num_s = "(%s)" % num_s
        den_s = str(self.den)
        if not _is_bare_power(self.den):
            den_s = "(%s)" % den_s
        return "%s/%s" % (num_s, den_s)

    __repr__ = __str__


def _is_bare_power(poly: Polynomial) -> bool:
    """True when the polynomial prints as a single variable power like q^2."""
    if len(poly.terms) != 1:
        return False
    (mono, c), = poly.terms.items()
    return c == 1 and sum(1 for e in mono if e) == 1 and min(mono) >= 0


def solve_linear(rows, rhs, params: ParameterSet):
    """Solve the exact linear system rows * x = rhs over the coefficient field.

    Returns (solution, free_columns) where free variables are set to zero,
    or None when the system is inconsistent.
    """
    zero = RationalFunction.from_value(params, 0)
    m = len(rows)
    n = len(rows[0]) if m else 0
    a = [list(row) + [r] for row, r in zip(rows, rhs)]
    pivots = []
    col = 0
    row = 0
    while row < m and col < n:
        pivot = None
        for i in range(row, m):
            if not a[i][col].is_zero():
                pivot = i
                break
        if pivot is None:
            col += 1
            continue
        a[row], a[pivot] = a[pivot], a[row]
        inv = a[row][col].inverse()
        a[row] = [v * inv for v in a[row]]
        for i in range(m):
            if i != row and not a[i][col].is_zero():
                f = a[i][col]
                a[i] = [v - f * w for v, w in zip(a[i], a[row])]
        pivots.append(col)
        row += 1
        col += 1
    for i in range(row, m):
        if not a[i][n].is_zero():
            return None
    solution = [zero] * n
    for r, c in enumerate(pivots):
        solution[c] = a[r][n]
    free = [c for c in range(n) if c not in pivots]
    return solution, free
