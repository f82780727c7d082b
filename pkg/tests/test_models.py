"""Tests for the shipped models and the structural verification suite."""

import pytest

from ncdiff.coeff import RationalFunction
from ncdiff.dsl import parse_coefficient
from ncdiff.models import (CheckResult, SuiteReport, available_models,
                           build_glpq, build_quantum_torus, model_source,
                           run_suite, scalar_ratio)

TORUS_ANCHORS = [
    "relations",
    "confluence",
    "automorphism/phi1",
    "automorphism/phi1/inverse",
    "automorphism/phi2",
    "automorphism/phi2/inverse",
    "theta-diagonal/t1",
    "theta-diagonal/t2",
    "inner-form",
    "two-form-central",
    "d-twice",
    "leibniz-twisted/t1",
    "leibniz-twisted/t2",
    "leibniz-product",
    "extension/t1",
    "extension/t1/inverse",
    "theta-action/t1",
    "extension/t2",
    "extension/t2/inverse",
    "theta-action/t2",
    "metric/gsym/triv",
    "torsion/triv/t1",
    "torsion/triv/t2",
    "derived-relation/x*dx",
    "derived-relation/x*dy",
    "derived-relation/y*dx",
    "derived-relation/y*dy",
    "check/theta1-from-dx",
    "check/theta2-from-dy-dx",
    "check/inner-form",
]


@pytest.fixture(scope="module")
def torus_report(torus):
    return run_suite(torus)


@pytest.fixture(scope="module")
def glpq_report(glpq):
    return run_suite(glpq)


@pytest.fixture(scope="module")
def localized_report(glpq_localized):
    return run_suite(glpq_localized)


@pytest.fixture(scope="module")
def r_free_report():
    return run_suite(build_glpq(substitute_r=False))


class TestSources:
    def test_available_models(self):
        assert available_models() == ["gl-pq2", "quantum-torus"]

    def test_model_source_contents(self):
        src = model_source("quantum-torus")
        assert 'model "quantum-torus"' in src
        assert "rel x*y = q*y*x" in src

    def test_unknown_model(self):
        with pytest.raises(KeyError, match="unknown model"):
            model_source("nonesuch")


class TestTorusBundle:
    def test_name_and_generators(self, torus):
        assert torus.name == "quantum-torus"
        assert torus.algebra.table.base_names == ("x", "y")

    def test_expected_relations_extras(self, torus):
        expected = torus.extras["expected_relations"]
        assert expected["side"] == "element_first"
        assert expected["forms"] == ["dx", "dy"]
        assert expected["elements"] == ["x", "y"]
        assert set(expected["table"]) == {("x", "dx"), ("x", "dy"),
                                          ("y", "dx"), ("y", "dy")}

    def test_torsion_extras(self, torus):
        assert torus.extras["torsion_zero"] == {"connection": "triv",
                                                "forms": ["t1", "t2"]}

    def test_unverified_build(self):
        bundle = build_quantum_torus(verify=False)
        assert bundle.algebra.verify_relations()


class TestGlpqBundle:
    def test_twisted_basis_extras(self, glpq):
        assert glpq.extras["twisted_basis"] == [
            ("tt1", "phit1"), ("tt2", "phit2"),
            ("tt3", "phit3"), ("tt4", "phit4")]

    def test_det_extras(self, glpq):
        assert glpq.extras["det"] == {
            "element": "D",
            "lambdas": {"a": "1", "b": "p/q", "c": "q/p", "d": "1"}}

    def test_mirror_checks_present(self, glpq):
        names = [case.name for case in glpq.checks]
        assert len(names) == 22
        mirrors = [n for n in names if n.endswith("-mirror")]
        assert len(mirrors) == 8
        base_mc = [n for n in names
                   if n.startswith("mc") and not n.endswith("-mirror")]
        assert sorted(mirrors) == sorted(n + "-mirror" for n in base_mc)

    def test_det_scaling_direct(self, glpq):
        det = glpq.named["D"]
        b = glpq.value("b")
        lam = parse_coefficient("p/q", glpq.params)
        assert det * b == (b * det).scale(lam)
        d = glpq.value("d")
        assert det * d == d * det

    def test_substitution_recorded(self, glpq):
        p = RationalFunction.parameter(glpq.params, "p")
        q = RationalFunction.parameter(glpq.params, "q")
        assert glpq.substitutions == {"r": p * q}


class TestLocalizedBundle:
    def test_name_and_generator(self, glpq_localized):
        assert glpq_localized.name == "gl-pq2-localized"
        assert "Dinv" in glpq_localized.algebra.table.symbols
        assert glpq_localized.value("Dinv") == \
            glpq_localized.algebra.gen("Dinv")

    def test_localized_extras(self, glpq_localized):
        assert glpq_localized.extras["localized"] == {
            "generator": "Dinv",
            "lambdas": {"a": "1", "b": "p*q^-1", "b^-1": "p^-1*q",
                        "c": "p^-1*q", "c^-1": "p*q^-1", "d": "1"}}

    def test_unit_is_central(self, glpq_localized):
        unit = glpq_localized.named["D"] * glpq_localized.value("Dinv")
        a = glpq_localized.value("a")
        assert unit * a == a * unit

    def test_checks_transferred(self, glpq, glpq_localized):
        assert len(glpq_localized.checks) == len(glpq.checks)
        assert all(case.passed() for case in glpq_localized.checks)

    def test_calculus_rebuilt(self, glpq, glpq_localized):
        assert glpq_localized.calculus is not glpq.calculus
        assert glpq_localized.calculus.labels == glpq.calculus.labels
        dinv = glpq_localized.value("Dinv")
        da = glpq_localized.calculus.d(dinv)
        assert not da.is_zero()


class TestScalarRatio:
    def test_scalar_multiple(self, torus):
        q = RationalFunction.parameter(torus.params, "q")
        x = torus.value("x")
        y = torus.value("y")
        assert scalar_ratio(x.scale(q), x) == q
        assert scalar_ratio((x + y).scale(q * q), x + y) == q * q

    def test_mismatched_support(self, torus):
        x = torus.value("x")
        y = torus.value("y")
        assert scalar_ratio(x, y) is None
        assert scalar_ratio(x + y, x) is None

    def test_inconsistent_ratio(self, torus):
        q = RationalFunction.parameter(torus.params, "q")
        x = torus.value("x")
        y = torus.value("y")
        assert scalar_ratio(x.scale(q) + y, x + y) is None

    def test_zero_right(self, torus):
        x = torus.value("x")
        zero = x - x
        assert scalar_ratio(x, zero) is None
        assert scalar_ratio(zero, x) is None


class TestSuiteTorus:
    def test_counts(self, torus_report):
        assert torus_report.model == "quantum-torus"
        assert torus_report.passed == 30
        assert torus_report.failed == 0
        assert torus_report.ok

    def test_anchor_order(self, torus_report):
        assert [r.anchor for r in torus_report.results] == TORUS_ANCHORS

    def test_pass_results_carry_no_witness(self, torus_report):
        assert all(r.witness is None for r in torus_report.results)
        assert all(r.status == "pass" for r in torus_report.results)

    def test_seed_recorded(self, torus):
        report = run_suite(torus, seed=7)
        assert report.seed == 7
        assert report.ok


class TestSuiteGlpq:
    def test_counts(self, glpq_report):
        assert glpq_report.model == "gl-pq2"
        assert glpq_report.failed == 0
        assert len(glpq_report.results) == 72

    def test_expected_anchors(self, glpq_report):
        anchors = {r.anchor for r in glpq_report.results}
        for g in ("a", "b", "c", "d"):
            assert "det-scale/%s" % g in anchors
        for s in range(1, 5):
            assert "twisted-basis/tt%d" % s in anchors
            assert "theta-action/t%d" % s in anchors
            assert "extension/t%d/inverse" % s in anchors
        assert "check/mc1-a-mirror" in anchors

    def test_mc_check_count(self, glpq_report):
        mc = [r for r in glpq_report.results
              if r.anchor.startswith("check/mc")]
        assert len(mc) == 16
        assert all(r.ok for r in mc)


class TestSuiteLocalized:
    def test_counts(self, localized_report):
        assert localized_report.model == "gl-pq2-localized"
        assert localized_report.failed == 0
        assert len(localized_report.results) == 73

    def test_localized_anchor(self, localized_report):
        anchors = [r.anchor for r in localized_report.results]
        assert "localized-unit-central" in anchors


class TestSuiteWithoutSubstitution:
    def test_counts(self, r_free_report):
        assert r_free_report.passed == 30
        assert r_free_report.failed == 36
        assert not r_free_report.ok

    def test_failing_anchors(self, r_free_report):
        failing = {r.anchor for r in r_free_report.results if not r.ok}
        assert "automorphism/phi1" in failing
        assert "check/mc1-a" in failing
        assert "two-form-central" in failing
        assert "d-twice" in failing
        assert "relations" not in failing
        assert "confluence" not in failing

    def test_failures_carry_witnesses(self, r_free_report):
        failed = [r for r in r_free_report.results
                  if not r.ok and r.anchor.startswith("check/")]
        assert failed
        assert all(isinstance(r.witness, str) and r.witness
                   for r in failed)


class TestReportTypes:
    def test_check_result_status(self):
        good = CheckResult("a", "works", True, witness="ignored")
        bad = CheckResult("a", "breaks", False, witness="kept")
        assert good.status == "pass" and good.ok
        assert good.witness is None
        assert bad.status == "fail" and not bad.ok
        assert bad.witness == "kept"

    def test_suite_report_counts(self):
        results = [CheckResult("a", "n", True),
                   CheckResult("b", "n", False, "w"),
                   CheckResult("c", "n", True)]
        report = SuiteReport("m", 3, results)
        assert report.passed == 2
        assert report.failed == 1
        assert not report.ok

    def test_determinism(self, torus):
        first = run_suite(torus, seed=1)
        second = run_suite(torus, seed=1)
        assert [r.status for r in first.results] == \
            [r.status for r in second.results]
        assert [r.anchor for r in first.results] == \
            [r.anchor for r in second.results]
