import pytest

from ncdiff.coeff import RationalFunction
from ncdiff.geometry import (Connection, FormExtension, Geometry,
                             GeometryError, TensorForm, derive_theta_action)
from ncdiff.morphism import Endomorphism


def rf(alg, value):
    return RationalFunction.from_value(alg.params, value)


def r_param(alg):
    return RationalFunction.parameter(alg.params, "r")


@pytest.fixture()
def geo(torus):
    return torus.geometry


@pytest.fixture()
def calc(torus):
    return torus.calculus


@pytest.fixture()
def alg(torus):
    return torus.algebra


class TestFormExtension:
    def test_apply_twists_coefficients(self, geo, calc, alg):
        ext = geo.extension("t1")
        omega = calc.embed(alg.gen("x")) * calc.theta("t1")
        moved = ext.apply(omega)
        assert moved.coefficient("t1") == r_param(alg) ** -1 * alg.gen("x")

    def test_identity_action_on_basis(self, geo, calc):
        for lab in calc.labels:
            ext = geo.extension(lab)
            for lab2 in calc.labels:
                assert ext.theta_image(lab2) == calc.theta(lab2)

    def test_commutes_with_d(self, geo, calc):
        for lab in calc.labels:
            assert geo.extension(lab).commutes_with_d() is None
            assert geo.inverse_extension(lab).commutes_with_d() is None

    def test_inverse_roundtrip(self, geo, calc, alg):
        ext = geo.extension("t1")
        inv = ext.inverse()
        omega = (calc.embed(alg.gen("x")) * calc.theta("t1")
                 + calc.embed(alg.gen("y")) * calc.theta("t2"))
        assert inv.apply(ext.apply(omega)) == omega
        assert ext.apply(inv.apply(omega)) == omega

    def test_missing_theta_image_rejected(self, calc):
        base = calc.twists["t1"]
        with pytest.raises(GeometryError):
            FormExtension(calc, base, {"t1": [(rf(calc.algebra, 1), "t1")]})

    def test_singular_action_has_no_inverse(self, calc, alg):
        ext = FormExtension(calc, calc.twists["t1"],
                            {"t1": [], "t2": [(rf(alg, 1), "t2")]})
        with pytest.raises(GeometryError):
            ext.inverse()

    def test_apply_rejects_foreign_form(self, geo, glpq):
        with pytest.raises(GeometryError):
            geo.extension("t1").apply(glpq.calculus.theta("t1"))


class TestDerivedThetaAction:
    def test_torus_twists_extend_by_identity(self, calc):
        for lab in calc.labels:
            action = derive_theta_action(calc, calc.twists[lab])
            ext = FormExtension(calc, calc.twists[lab], action)
            for i, row in enumerate(ext.matrix):
                for j, value in enumerate(row):
                    assert value == rf(calc.algebra, 1 if i == j else 0)

    def test_matches_declared_action(self, glpq):
        calc = glpq.calculus
        declared = glpq.geometry.extension("t1")
        action = derive_theta_action(calc, calc.twists["t1"])
        rebuilt = FormExtension(calc, calc.twists["t1"], action)
        assert rebuilt.matrix == declared.matrix

    def test_declared_action_is_a_scaling(self, glpq):
        params = glpq.algebra.params
        pq = (RationalFunction.parameter(params, "p")
              * RationalFunction.parameter(params, "q"))
        one = rf(glpq.algebra, 1)
        ext = glpq.geometry.extension("t1")
        diagonal = [ext.matrix[i][i] for i in range(4)]
        assert diagonal == [pq, one, pq, one]

    def test_non_extending_endomorphism_raises(self, calc, alg):
        squared = Endomorphism(alg, {"x": alg.gen("x") * alg.gen("x"),
                                     "y": alg.gen("y")})
        with pytest.raises(GeometryError):
            derive_theta_action(calc, squared)


class TestTensors:
    def test_tensor_L_entries(self, geo, calc, alg):
        x, y = alg.gen("x"), alg.gen("y")
        left = calc.embed(x) * calc.theta("t1")
        right = calc.embed(y) * calc.theta("t2")
        tensor = geo.tensor_L(left, right)
        assert tensor.entry("t1", "t2") == x * y
        assert tensor.entry("t2", "t1").is_zero()

    def test_tensor_A_moves_by_twist(self, geo, calc, alg):
        x, y = alg.gen("x"), alg.gen("y")
        left = calc.embed(x) * calc.theta("t1")
        right = calc.embed(y) * calc.theta("t1")
        tensor = geo.tensor_A(left, right)
        expected = x * (r_param(alg) ** -1 * y)
        assert tensor.entry("t1", "t1") == expected

    def test_tensor_A_roundtrip(self, glpq):
        geo = glpq.geometry
        alg = glpq.algebra
        entries = {(0, 1): alg.gen("a"), (2, 3): alg.gen("b") * alg.gen("c")}
        tensor = geo.from_tensor_A(entries)
        recovered = geo.to_tensor_A(tensor)
        assert set(recovered) == set(entries)
        for key, value in entries.items():
            assert recovered[key] == value

    def test_wedge_project(self, geo, calc, alg):
        tensor = TensorForm(calc, {(1, 0): alg.one()})
        projected = geo.wedge_project(tensor)
        assert projected == -calc.wedge(calc.theta("t1"), calc.theta("t2"))

    def test_tensor_requires_one_forms(self, geo, calc, alg):
        with pytest.raises(GeometryError):
            geo.tensor_L(calc.embed(alg.gen("x")), calc.theta("t1"))

    def test_tensor_arithmetic(self, calc, alg):
        g = TensorForm(calc, {(0, 1): alg.one()})
        h = TensorForm(calc, {(0, 1): alg.one(), (1, 0): alg.gen("x")})
        total = g + h
        assert total.entry("t1", "t2") == 2 * alg.one()
        assert (total - g) == h
        assert (-g).entry("t1", "t2") == -alg.one()
        scaled = alg.gen("y") * h
        assert scaled.entry("t2", "t1") == alg.gen("y") * alg.gen("x")

    def test_missing_extension_label(self, calc):
        empty = Geometry(calc, {})
        with pytest.raises(GeometryError):
            empty.extension("t1")


class TestConnection:
    @pytest.fixture()
    def conn(self, torus):
        return torus.connections["triv"]

    @pytest.fixture()
    def metric(self, torus):
        return torus.metrics["gsym"]

    def test_transport_of_basis(self, conn, calc):
        for s in calc.labels:
            for k in calc.labels:
                assert conn.transport(s, calc.theta(k)) == calc.theta(k)

    def test_transport_twisted_linearity(self, conn, geo, calc, alg):
        omega = (calc.embed(alg.gen("y")) * calc.theta("t1")
                 + calc.theta("t2"))
        a = alg.gen("x")
        for s in calc.labels:
            lhs = conn.transport(s, calc.embed(a) * omega)
            moved = geo.inverse_twist(s).apply(a)
            rhs = calc.embed(moved) * conn.transport(s, omega)
            assert lhs == rhs

    def test_nabla_product_rule(self, conn, geo, calc, alg):
        a = alg.gen("x")
        for lab in calc.labels:
            omega = calc.theta(lab)
            lhs = conn.nabla(calc.embed(a) * omega)
            rhs = geo.tensor_A(calc.d(a), omega) + a * conn.nabla(omega)
            assert lhs == rhs

    def test_metric_compatibility(self, conn, metric):
        assert conn.metric_compatible(metric) is None

    def test_perturbed_connection_breaks_compatibility(self, geo, calc,
                                                       metric):
        table = {(s, k): calc.theta(k) for s in calc.labels
                 for k in calc.labels}
        table[("t1", "t1")] = calc.theta("t1").scale(2)
        perturbed = Connection(geo, table, "perturbed")
        witness = perturbed.metric_compatible(metric)
        assert witness is not None
        assert witness[0] == "t1"

    def test_torsion_vanishes_on_basis(self, conn, calc):
        for lab in calc.labels:
            assert conn.torsion(calc.theta(lab)).is_zero()

    def test_torsion_is_additive(self, conn, calc, alg):
        omega = calc.embed(alg.gen("x")) * calc.theta("t1")
        eta = calc.embed(alg.gen("y")) * calc.theta("t2")
        total = conn.torsion(omega + eta)
        assert total == conn.torsion(omega) + conn.torsion(eta)

    def test_missing_entry_rejected(self, geo, calc):
        table = {(s, k): calc.theta(k) for s in calc.labels
                 for k in calc.labels}
        del table[("t2", "t1")]
        with pytest.raises(GeometryError):
            Connection(geo, table)

    def test_unknown_label_rejected(self, geo, calc):
        table = {(s, k): calc.theta(k) for s in calc.labels
                 for k in calc.labels}
        table[("t9", "t1")] = calc.theta("t1")
        with pytest.raises(GeometryError):
            Connection(geo, table)

    def test_entries_must_be_one_forms(self, geo, calc, alg):
        table = {(s, k): calc.theta(k) for s in calc.labels
                 for k in calc.labels}
        table[("t1", "t1")] = calc.embed(alg.gen("x"))
        with pytest.raises(GeometryError):
            Connection(geo, table)

    def test_transport_requires_one_form(self, conn, calc):
        two_form = calc.wedge(calc.theta("t1"), calc.theta("t2"))
        with pytest.raises(GeometryError):
            conn.transport("t1", two_form)
