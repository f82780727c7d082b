import random

import pytest

from ncdiff.algebra import (Algebra, AlgebraError, GeneratorTable,
                            UnsupportedRelationError, concat_words,
                            deg_lex_key, derive_inverse_rules, random_element,
                            render_element, render_word, single_word,
                            word_degree, word_from_runs, word_letters)
from ncdiff.coeff import ParameterSet, RationalFunction


@pytest.fixture()
def params():
    return ParameterSet(("q", "r"))


def rf(params, text_or_value):
    if isinstance(text_or_value, str):
        return RationalFunction.parameter(params, text_or_value)
    return RationalFunction.from_value(params, text_or_value)


def torus_algebra(params):
    """x, y invertible with x*y = q*y*x."""
    table = GeneratorTable(("x", "y"), invertible=("x", "y"))
    alg = Algebra(params, table)
    x, y = table.index("x"), table.index("y")
    alg.add_relation(
        {concat_words(single_word(x), single_word(y)): rf(params, 1)},
        {concat_words(single_word(y), single_word(x)): rf(params, "q")})
    return alg


class TestGeneratorTable:
    def test_symbol_layout_with_inverses(self):
        table = GeneratorTable(("a", "b", "c"), invertible=("b",))
        assert table.symbols == ("a", "b", "b^-1", "c")
        assert table.index("b^-1") == 2
        assert table.inverse_index[1] == 2
        assert table.inverse_index[2] == 1
        assert table.base_index[2] == 1
        assert table.is_inverse_symbol(2)
        assert not table.is_inverse_symbol(1)
        assert "b^-1" in table and "d" not in table

    def test_duplicate_name_rejected(self):
        with pytest.raises(ValueError):
            GeneratorTable(("a", "a"))

    def test_unknown_invertible_rejected(self):
        with pytest.raises(ValueError):
            GeneratorTable(("a",), invertible=("b",))

    def test_equality(self):
        one = GeneratorTable(("a", "b"), invertible=("a",))
        two = GeneratorTable(("a", "b"), invertible=("a",))
        assert one == two and hash(one) == hash(two)
        assert one != GeneratorTable(("a", "b"))


class TestWords:
    def test_run_merging(self):
        assert word_from_runs([(0, 1), (0, 2), (1, 1)]) == ((0, 3), (1, 1))
        assert word_from_runs([(0, 0), (1, 2)]) == ((1, 2),)
        with pytest.raises(ValueError):
            word_from_runs([(0, -1)])

    def test_concat_and_degree(self):
        w = concat_words(single_word(0, 2), single_word(0), single_word(1))
        assert w == ((0, 3), (1, 1))
        assert word_degree(w) == 4
        assert word_letters(w) == (0, 0, 0, 1)

    def test_deg_lex_order(self):
        xy = ((0, 1), (1, 1))
        yx = ((1, 1), (0, 1))
        xxx = ((0, 3),)
        assert deg_lex_key(yx) > deg_lex_key(xy)
        assert deg_lex_key(xxx) > deg_lex_key(yx)


class TestRewriting:
    def test_relation_orientation(self, params):
        alg = torus_algebra(params)
        y_then_x = concat_words(single_word(alg.table.index("y")),
                                single_word(alg.table.index("x")))
        nf = alg.normal_form_word(y_then_x)
        expected_word = concat_words(single_word(alg.table.index("x")),
                                     single_word(alg.table.index("y")))
        assert set(nf) == {expected_word}
        assert nf[expected_word] == rf(params, "q").inverse()

    def test_double_swap(self, params):
        alg = torus_algebra(params)
        x, y = alg.gen("x"), alg.gen("y")
        q = rf(params, "q")
        assert y * x * x == q ** -2 * x * x * y
        assert y * y * x == q ** -2 * x * y * y

    def test_inverse_symbol_rules_are_derived(self, params):
        alg = torus_algebra(params)
        table = alg.table
        q = rf(params, "q")
        x_inv = alg.symbol_element(table.index("x^-1"))
        y_inv = alg.symbol_element(table.index("y^-1"))
        x, y = alg.gen("x"), alg.gen("y")
        assert y * x_inv == q * x_inv * y
        assert y_inv * x == q * x * y_inv
        assert y_inv * x_inv == q ** -1 * x_inv * y_inv
        assert x * x_inv == alg.one()
        assert x_inv * x == alg.one()
        assert (y * y_inv).is_one()

    def test_derive_inverse_rules_exposed(self, params):
        alg = torus_algebra(params)
        table = alg.table
        x, y = table.index("x"), table.index("y")
        pair = (y, x)
        rhs = {concat_words(single_word(x), single_word(y)):
               rf(params, "q").inverse()}
        derived = dict(derive_inverse_rules(alg, pair, rhs))
        assert set(derived) == {(y, table.inverse_index[x]),
                                (table.inverse_index[y], x),
                                (table.inverse_index[y],
                                 table.inverse_index[x])}

    def test_unsupported_one_letter_lead(self, params):
        table = GeneratorTable(("x", "y"))
        alg = Algebra(params, table)
        with pytest.raises(UnsupportedRelationError):
            alg.add_relation({single_word(0): rf(params, 1)},
                             {(): rf(params, 1)})

    def test_unsupported_squared_invertible(self, params):
        table = GeneratorTable(("x",), invertible=("x",))
        alg = Algebra(params, table)
        with pytest.raises(UnsupportedRelationError):
            alg.add_relation({single_word(0, 2): rf(params, 1)},
                             {(): rf(params, 1)})

    def test_unsupported_tail_on_invertible_pair(self, params):
        table = GeneratorTable(("x", "y"), invertible=("x", "y"))
        alg = Algebra(params, table)
        x, y = table.index("x"), table.index("y")
        yx = concat_words(single_word(y), single_word(x))
        xy = concat_words(single_word(x), single_word(y))
        with pytest.raises(UnsupportedRelationError):
            alg.add_relation({yx: rf(params, 1)},
                             {xy: rf(params, 1), (): rf(params, 1)})

    def test_trivial_relation_rejected(self, params):
        alg = torus_algebra(params)
        x = alg.table.index("x")
        with pytest.raises(AlgebraError):
            alg.add_relation({single_word(x): rf(params, 1)},
                             {single_word(x): rf(params, 1)})

    def test_verify_relations(self, params):
        assert torus_algebra(params).verify_relations()


class TestElementArithmetic:
    def test_scalars_and_units(self, params):
        alg = torus_algebra(params)
        assert alg.zero().is_zero()
        assert alg.one().is_one()
        assert not alg.gen("x").is_one()
        assert (alg.one() * 5 - 5).is_zero()
        assert alg.scalar(0).is_zero()

    def test_subtraction_cancels(self, params):
        alg = torus_algebra(params)
        x, y = alg.gen("x"), alg.gen("y")
        value = x * y - rf(params, "q") * y * x
        assert value.is_zero()

    def test_power(self, params):
        alg = torus_algebra(params)
        x = alg.gen("x")
        assert (x ** 0).is_one()
        assert x ** 3 == x * x * x
        with pytest.raises(AlgebraError):
            x ** -1

    def test_cross_algebra_rejected(self, params):
        one = torus_algebra(params)
        two = torus_algebra(params)
        with pytest.raises(AlgebraError):
            one.gen("x") + two.gen("x")

    def test_scale_by_zero(self, params):
        alg = torus_algebra(params)
        assert alg.gen("x").scale(0).is_zero()


class TestConfluence:
    def test_torus_is_confluent(self, params):
        assert torus_algebra(params).check_confluence() == []

    def test_duplicate_pair_violation(self, params):
        table = GeneratorTable(("x", "y"))
        alg = Algebra(params, table)
        x, y = table.index("x"), table.index("y")
        yx = concat_words(single_word(y), single_word(x))
        xy = concat_words(single_word(x), single_word(y))
        alg.add_relation({yx: rf(params, 1)}, {xy: rf(params, 2)})
        alg.add_relation({yx: rf(params, 1)}, {xy: rf(params, 3)})
        violations = alg.check_confluence()
        assert any(v.word == (y, x) for v in violations)
        assert not alg.verify_relations()

    def test_overlap_violation(self, params):
        """zx = xz + 1 with yx = 2xy, zy = yz fails on the overlap z*y*x."""
        table = GeneratorTable(("x", "y", "z"))
        alg = Algebra(params, table)
        x, y, z = (table.index(n) for n in "xyz")

        def pair_word(a, b):
            return concat_words(single_word(a), single_word(b))

        alg.add_relation({pair_word(y, x): rf(params, 1)},
                         {pair_word(x, y): rf(params, 2)})
        alg.add_relation({pair_word(z, y): rf(params, 1)},
                         {pair_word(y, z): rf(params, 1)})
        alg.add_relation({pair_word(z, x): rf(params, 1)},
                         {pair_word(x, z): rf(params, 1), (): rf(params, 1)})
        violations = alg.check_confluence()
        assert len(violations) == 1
        violation = violations[0]
        assert violation.word == (z, y, x)
        difference = violation.left - violation.right
        assert difference == -alg.gen("y")


class TestRendering:
    def test_render_word(self, params):
        alg = torus_algebra(params)
        table = alg.table
        assert render_word(table, ()) == "1"
        x, y = table.index("x"), table.index("y")
        assert render_word(table, ((x, 2), (y, 1))) == "x^2*y"
        x_inv = table.inverse_index[x]
        assert render_word(table, ((x_inv, 3),)) == "x^-3"

    def test_render_element(self, params):
        alg = torus_algebra(params)
        x, y = alg.gen("x"), alg.gen("y")
        q = rf(params, "q")
        assert render_element(alg.zero()) == "0"
        assert render_element(alg.one() - q * x * y) == "1 - q * x*y"
        assert render_element(y * x) == "q^-1 * x*y"
        value = (rf(params, "r") - 1) * x + x * y
        assert render_element(value) == "(r - 1) * x + x*y"

    def test_str_uses_renderer(self, params):
        alg = torus_algebra(params)
        assert str(alg.gen("x")) == "x"


class TestRandomElements:
    def test_seed_determinism(self, params):
        alg = torus_algebra(params)
        first = random_element(alg, random.Random(42))
        second = random_element(alg, random.Random(42))
        assert (first - second).is_zero()

    def test_elements_are_normalized(self, params):
        alg = torus_algebra(params)
        rng = random.Random(7)
        for _ in range(10):
            value = random_element(alg, rng)
            again = alg.element(dict(value.terms))
            assert again.terms == value.terms
