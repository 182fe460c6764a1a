import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sasaki_approx.errors import EmptySectionSpace, NonPositiveFactor, NotEtaEinstein
from sasaki_approx.models import cylinder, fubini_study, punctured_disc, transverse_kahler_deform
from sasaki_approx.sasaki import (
    EtaEinsteinConstants,
    SasakianStructureParams,
    contact_positive,
    d_eta_defect,
    d_homothety,
    eta_einstein_constants,
    homothety_of_constants,
    induced_structure,
    structure_to_dict,
)

BUILDERS = {"cylinder": cylinder, "punctured_disc": punctured_disc, "fubini_study": fubini_study}
factors = st.floats(1e-3, 1e3)


def same_structure(s, t, rel=1e-14):
    assert s.model is t.model
    assert abs(s.a - t.a) <= rel * s.a
    for u in s.model.grid(7):
        np.testing.assert_allclose(s.metric(u), t.metric(u), rtol=rel, atol=0)


@pytest.mark.parametrize("name", sorted(BUILDERS))
def test_structure_invariants(name):
    s = SasakianStructureParams(BUILDERS[name](), a=3.0)
    assert d_eta_defect(s) < 1e-10
    assert contact_positive(s)
    assert s.reeb_scale * s.a == 1.0


def test_identity_homothety():
    s = SasakianStructureParams(cylinder())
    same_structure(d_homothety(s, 1.0), s, rel=0)


def test_homothety_doubles_density():
    s = SasakianStructureParams(cylinder())
    t = d_homothety(s, 2.0)
    for u in np.linspace(-3, 3, 13):
        assert t.transverse_density(u) == 2 * s.transverse_density(u)
        assert t.A(u) == 2 * s.A(u)
    assert t.reeb_scale == 0.5


def test_homothety_metric_formula():
    s = SasakianStructureParams(fubini_study(), a=1.7)
    a = 0.3
    t = d_homothety(s, a)
    for u in (-1.0, 0.5):
        e = s.eta(u)
        expected = a * s.metric(u) + (a * a - a) * np.outer(e, e)
        np.testing.assert_allclose(t.metric(u), expected, rtol=1e-14, atol=1e-15)
        # The same metric written as a g^T + eta_a (x) eta_a.
        ea = t.eta(u)
        np.testing.assert_allclose(t.metric(u), a * s.transverse_metric(u) + np.outer(ea, ea), rtol=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(sorted(BUILDERS)), factors, factors)
def test_group_law(name, a, b):
    s = SasakianStructureParams(BUILDERS[name]())
    same_structure(d_homothety(d_homothety(s, a), b), d_homothety(s, a * b), rel=1e-14)
    same_structure(d_homothety(d_homothety(s, a), 1 / a), s, rel=1e-14)


def test_group_law_example():
    s = SasakianStructureParams(punctured_disc())
    same_structure(d_homothety(d_homothety(s, 2.0), 0.5), s, rel=1e-14)


def test_nonpositive_factor():
    s = SasakianStructureParams(cylinder())
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(NonPositiveFactor):
            d_homothety(s, bad)
        with pytest.raises(NonPositiveFactor):
            homothety_of_constants(EtaEinsteinConstants(2.0, 0.0), bad)
    with pytest.raises(NonPositiveFactor):
        SasakianStructureParams(cylinder(), a=-2.0)


@pytest.mark.parametrize(
    "name, lam, nu", [("fubini_study", 2.0, 0.0), ("cylinder", -2.0, 4.0), ("punctured_disc", -6.0, 8.0)]
)
def test_eta_einstein_examples(name, lam, nu):
    s = SasakianStructureParams(BUILDERS[name]())
    for method in ("fd", "analytic"):
        c = eta_einstein_constants(s, curvature_method=method)
        assert abs(c.lam - lam) < 1e-7
        assert abs(c.nu - nu) < 1e-7
        assert c.lam + c.nu == 2.0


def test_homothety_of_constants_examples():
    assert homothety_of_constants(EtaEinsteinConstants(2.0, 0.0), 1.0) == EtaEinsteinConstants(2.0, 0.0)
    assert homothety_of_constants(EtaEinsteinConstants(-6.0, 8.0), 2.0) == EtaEinsteinConstants(-4.0, 6.0)
    for a in (1e-3, 0.7, 5.0, 1e3):
        assert homothety_of_constants(EtaEinsteinConstants(-2.0, 4.0), a) == EtaEinsteinConstants(-2.0, 4.0)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(sorted(BUILDERS)), factors)
def test_commuting_square(name, a):
    s = SasakianStructureParams(BUILDERS[name]())
    grid = s.model.grid(12)
    lhs = eta_einstein_constants(d_homothety(s, a), grid, curvature_method="analytic")
    rhs = homothety_of_constants(eta_einstein_constants(s, grid, curvature_method="analytic"), a)
    assert abs(lhs.lam - rhs.lam) < 1e-12 * max(1.0, abs(rhs.lam))
    assert abs(lhs.nu - rhs.nu) < 1e-12 * max(1.0, abs(rhs.nu))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(sorted(BUILDERS)), st.lists(factors, min_size=1, max_size=5))
def test_trace_identity_after_homotheties(name, chain):
    c = eta_einstein_constants(SasakianStructureParams(BUILDERS[name]()), curvature_method="analytic")
    for a in chain:
        c = homothety_of_constants(c, a)
        assert c.lam + c.nu == 2.0


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(sorted(BUILDERS)), factors)
def test_positivity_preserved(name, a):
    s = SasakianStructureParams(BUILDERS[name]())
    assert contact_positive(d_homothety(s, a, verify_grid=[]))


def test_not_eta_einstein():
    deformed = transverse_kahler_deform(
        cylinder(), lambda u: 0.1 * np.sin(u), lambda u: 0.1 * np.cos(u), lambda u: -0.1 * np.sin(u)
    )
    with pytest.raises(NotEtaEinstein) as info:
        eta_einstein_constants(SasakianStructureParams(deformed))
    assert info.value.spread > 1e-6


def test_induced_structure_fubini_study():
    model = fubini_study()
    s = induced_structure(model, 5)
    for u in np.linspace(-2, 2, 9):
        assert abs(float(s.transverse_density(u)) - 0.5 * float(model.F2(u))) < 1e-10
        assert float(s.model.F(u)) == pytest.approx(math.log1p(math.exp(u)) + math.log(6 / math.pi) / 5, abs=1e-13)
    raw = induced_structure(model, 5, normalized=False)
    assert raw.a == 5.0
    assert float(raw.transverse_density(0.0)) == pytest.approx(5 * 0.5 * float(model.F2(0.0)), rel=1e-10)


def test_induced_structure_cylinder():
    s = induced_structure(cylinder(), 4)
    worst = max(abs(float(s.transverse_density(u)) - 0.5) for u in np.linspace(-2, 2, 17))
    assert worst < 1e-8


def test_induced_structure_disc_improves():
    model = punctured_disc()
    grid = np.linspace(-3, -0.5, 11)

    def deviation(k):
        s = induced_structure(model, k)
        return max(abs(float(s.transverse_density(u)) - 0.5 * float(model.F2(u))) for u in grid)

    assert deviation(8) < deviation(2)


def test_induced_structure_empty():
    with pytest.raises(EmptySectionSpace):
        induced_structure(punctured_disc(), 1)


def test_json_serialization():
    s = SasakianStructureParams(fubini_study(), a=2.0, fiber_is_line=True)
    data = structure_to_dict(s, [-1.0, 0.0, 1.0])
    text = json.dumps(data)
    back = json.loads(text)
    assert list(back) == ["model", "a", "reeb_scale", "fiber", "grid", "A", "transverse_density"]
    assert back["fiber"] == "R"
    assert back["A"][1] == 1.0
    assert back["transverse_density"][1] == 0.25


@settings(max_examples=300, deadline=None)
@given(st.floats(-1e12, 1e12, allow_nan=False))
def test_from_lambda_trace_is_exact(lam):
    c = EtaEinsteinConstants.from_lambda(lam)
    assert c.lam + c.nu == 2.0
    assert abs(c.lam - lam) <= 4 * math.ulp(max(abs(lam), 2.0))
