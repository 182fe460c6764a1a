import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sasaki_approx.bergman import (
    DEFAULT_TOL,
    LogNorms,
    convergence_report,
    epsilon_function,
    epsilon_periodicity_check,
    index_cap,
    induced_potential,
    normalizer,
    pullback_coordinate,
    pullback_from_epsilon,
)
from sasaki_approx.errors import DomainError, EmptySectionSpace, NonConvergent, WrongModel
from sasaki_approx.models import cylinder, fubini_study, punctured_disc
from sasaki_approx.sections import closed_form_log_norm

MODELS = {"cylinder": cylinder(), "punctured_disc": punctured_disc(), "fubini_study": fubini_study()}


def mp_epsilon(name, k, u, dps=40):
    """Direct high-precision summation of the orthonormal expansion."""
    mpmath.mp.dps = dps
    u = mpmath.mpf(u)
    if name == "cylinder":
        norm = lambda j: mpmath.sqrt(mpmath.mpf(2) / k) * mpmath.pi**1.5 * mpmath.exp(j * j / mpmath.mpf(2 * k))  # noqa: E731
        total = mpmath.nsum(lambda j: mpmath.exp(j * u) / norm(j), [-mpmath.inf, mpmath.inf])
        F = u * u / 2
    elif name == "punctured_disc":
        norm = lambda j: mpmath.pi * mpmath.factorial(k - 2) / mpmath.mpf(j) ** (k - 1)  # noqa: E731
        total = mpmath.nsum(lambda j: mpmath.exp(j * u) / norm(j), [1, mpmath.inf])
        F = -mpmath.log(-u)
    else:
        norm = lambda j: mpmath.pi * mpmath.factorial(j) * mpmath.factorial(k - j) / mpmath.factorial(k + 1)  # noqa: E731
        total = mpmath.fsum(mpmath.exp(j * u) / norm(j) for j in range(k + 1))
        F = mpmath.log(1 + mpmath.exp(u))
    return mpmath.exp(-k * F) * total


@pytest.mark.parametrize("u", [-4.0, -1.0, 0.0, 0.7, 3.3])
def test_fubini_study_constant(u):
    point = epsilon_function(fubini_study(), 3, u)
    assert point.value == pytest.approx(4 / math.pi, rel=1e-14)
    assert epsilon_function(fubini_study(), 3, u, method="closed_form").value == pytest.approx(4 / math.pi, rel=1e-15)


def test_cylinder_unit_level():
    eps = epsilon_function(cylinder(), 1, 0.0).value
    oracle = float(mp_epsilon("cylinder", 1, 0.0))
    assert eps == pytest.approx(oracle, rel=1e-14)
    poisson = (1 / math.pi) * (1 + 2 * sum(math.exp(-2 * math.pi**2 * m * m) for m in range(1, 4)))
    assert eps == pytest.approx(poisson, rel=1e-14)
    # Deviation from 1/pi is the leading Poisson term, about 5.35e-9.
    assert abs(math.pi * eps - 1) < 2 * math.exp(-2 * math.pi**2) * 1.0001
    assert abs(math.pi * eps - 1) < 1e-8


@pytest.mark.parametrize("k, u", [(2, 0.3), (5, -1.1), (9, 2.0)])
def test_cylinder_against_direct_sum(k, u):
    eps = epsilon_function(cylinder(), k, u)
    assert eps.value == pytest.approx(float(mp_epsilon("cylinder", k, u)), rel=1e-14)
    assert eps.value == pytest.approx(epsilon_function(cylinder(), k, u, method="closed_form").value, rel=1e-14)


def test_empty_section_space():
    with pytest.raises(EmptySectionSpace):
        epsilon_function(punctured_disc(), 1, -1.0)
    with pytest.raises(EmptySectionSpace):
        induced_potential(punctured_disc(), 1, -1.0)


def test_argument_errors():
    with pytest.raises(DomainError):
        epsilon_function(punctured_disc(), 3, 0.5)
    with pytest.raises(ValueError):
        epsilon_function(cylinder(), 2, 0.0, tol=0.0)
    with pytest.raises(ValueError):
        epsilon_function(cylinder(), 2, 0.0, method="integral")


def test_induced_potential_examples():
    for k in (1, 4, 9):
        for u in (-2.0, 0.0, 1.5):
            expected = math.log1p(math.exp(u)) + math.log((k + 1) / math.pi) / k
            assert induced_potential(fubini_study(), k, u) == pytest.approx(expected, abs=1e-14)
    mpmath.mp.dps = 40
    series = mpmath.nsum(
        lambda j: 2 * mpmath.exp(-j * j / mpmath.mpf(8)) / (mpmath.sqrt(2) * mpmath.pi**1.5),
        [-mpmath.inf, mpmath.inf],
    )
    assert induced_potential(cylinder(), 4, 0.0) == pytest.approx(float(mpmath.log(series) / 4), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(sorted(MODELS)), st.integers(2, 12), st.floats(0.0, 1.0))
def test_induced_potential_identity(name, k, s):
    model = MODELS[name]
    u = model.window[0] + s * (model.window[1] - model.window[0])
    point = epsilon_function(model, k, u)
    F_hat = induced_potential(model, k, u)
    assert abs(F_hat - float(model.F(u)) - point.log_value / k) < 1e-13
    assert abs(math.exp(-k * float(model.F(u)) + k * F_hat) / point.value - 1) < 1e-13 * max(1, k * abs(F_hat))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["cylinder", "punctured_disc"]), st.integers(2, 16), st.floats(0.0, 1.0))
def test_window_invariants(name, k, s):
    model = MODELS[name]
    u = model.window[0] + s * (model.window[1] - model.window[0])
    point = epsilon_function(model, k, u)
    lo, hi = point.window
    assert point.value > 0
    assert point.tail_bound <= DEFAULT_TOL * point.value
    terms = {j: j * u - closed_form_log_norm(model, k, j) - k * float(model.F(u)) for j in range(lo - 1, hi + 2)
             if j >= (1 if name == "punctured_disc" else -10**9)}
    j_star = max(terms, key=terms.get)
    top = terms[j_star]
    assert lo <= j_star <= hi
    if name == "cylinder" or lo > 1:
        assert lo < j_star
    assert j_star < hi
    # Edges at the lattice boundary are not truncations.
    for edge in {lo, hi} - {j_star} - {1 if name == "punctured_disc" else None}:
        assert terms[edge] <= top + math.log(DEFAULT_TOL)


@pytest.mark.parametrize("k, u", [(2, 0.3), (7, -1.2), (1, 0.0), (3, 2.9)])
def test_periodicity(k, u):
    assert epsilon_periodicity_check(cylinder(), k, u) < 1e-11


def test_periodicity_wrong_model():
    with pytest.raises(WrongModel):
        epsilon_periodicity_check(fubini_study(), 2, 0.0)


def test_pullback_examples():
    fs = pullback_coordinate(fubini_study(), 3, 0.4, 1.0)
    assert fs.tau == pytest.approx(4 / math.pi, rel=1e-14)
    assert fs.normalized == pytest.approx((4 / math.pi) ** (1 / 3), rel=1e-14)
    cyl = pullback_coordinate(cylinder(), 1, 0.0, 2.0)
    assert cyl.tau == pytest.approx(2 / math.pi, rel=1e-8)
    unit = pullback_from_epsilon(1.0, 5, 1.0)
    assert unit.tau == 1.0 and unit.normalized == 1.0
    with pytest.raises(ValueError):
        pullback_coordinate(cylinder(), 1, 0.0, 0.0)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_normalizer_pinned_at_k32(name):
    model = MODELS[name]
    k = 32
    grid = [-2.0, -1.0, -0.6] if name == "punctured_disc" else [-1.5, 0.0, 0.8]
    for u in grid:
        exact = float(mp_epsilon(name, k, u))
        assert abs(normalizer(model, k) * exact - 1) < 1e-12
        # Neighbouring constants are clearly wrong.
        for c in (-1, 0, 1):
            if math.pi / (k + c) != normalizer(model, k):
                assert abs(math.pi / (k + c) * exact - 1) > 1e-2
        assert epsilon_function(model, k, u).value == pytest.approx(exact, rel=1e-13)


@pytest.mark.parametrize("k, u", [(3, -0.2), (8, -0.05), (5, -2.5), (12, -1e-3)])
def test_disc_closed_form_against_polylog(k, u):
    mpmath.mp.dps = 40
    exact = (-mpmath.mpf(u)) ** k / (mpmath.pi * mpmath.factorial(k - 2)) * mpmath.polylog(1 - k, mpmath.exp(u))
    got = epsilon_function(punctured_disc(), k, u, method="closed_form").value
    assert got == pytest.approx(float(exact), rel=1e-13)


def test_disc_closed_form_against_large_cap_sum():
    model = punctured_disc()
    for k, u in [(8, -0.05), (4, -0.01)]:
        summed = epsilon_function(model, k, u, cap=20000).value
        closed = epsilon_function(model, k, u, method="closed_form").value
        assert summed == pytest.approx(closed, rel=1e-13)


def test_index_cap_is_an_error():
    assert index_cap(8) == 1080
    with pytest.raises(NonConvergent):
        epsilon_function(punctured_disc(), 8, -0.05)


def test_disc_boundary_limit():
    for k in range(3, 9):
        value = epsilon_function(punctured_disc(), k, -1e-6, method="closed_form").value
        assert abs(value * math.pi / (k - 1) - 1) < 1e-3


def test_convergence_report_fubini_study():
    report = convergence_report(fubini_study(), [2, 4, 8], np.linspace(-2, 2, 9))
    assert max(report.epsilon_deviation) < 1e-12
    assert max(report.potential_curvature_deviation) < 1e-8


def test_convergence_report_cylinder():
    report = convergence_report(cylinder(), [1, 2, 4], np.linspace(-2, 2, 21))
    assert all(d < 1e-8 for d in report.epsilon_deviation)
    assert all(d >= 0 for d in report.potential_curvature_deviation)


def test_convergence_report_disc():
    report = convergence_report(punctured_disc(), [4, 8, 16], np.linspace(-3, -0.5, 20))
    assert report.monotone_decreasing == {"epsilon": True, "curvature": True}
    data = report.to_dict()
    assert list(data) == [
        "model", "k_list", "grid", "epsilon_deviation", "curvature_deviation",
        "monotone", "tolerances", "metadata",
    ]
    assert data["metadata"]["normalizers"] == ["pi/3", "pi/7", "pi/15"]
    rows = list(report.rows())
    assert len(rows) == 60 and rows[0]["k"] == 4


def test_convergence_report_parallel_is_identical():
    grid = np.linspace(-3, -0.5, 10)
    a = convergence_report(punctured_disc(), [4, 8], grid)
    b = convergence_report(punctured_disc(), [4, 8], grid, workers=4)
    assert a == b


def test_convergence_report_validation():
    with pytest.raises(ValueError):
        convergence_report(cylinder(), [], [0.0])
    with pytest.raises(ValueError):
        convergence_report(cylinder(), [4, 2], [0.0])
    with pytest.raises(DomainError):
        convergence_report(punctured_disc(), [4], [-1e-4])
    with pytest.raises(EmptySectionSpace):
        convergence_report(punctured_disc(), [1, 2], [-1.0])


def test_norm_cache_is_shared():
    norms = LogNorms(cylinder(), 3)
    epsilon_function(cylinder(), 3, 0.2, norms=norms)
    before = len(norms._cache)
    epsilon_function(cylinder(), 3, 0.2, norms=norms)
    assert len(norms._cache) == before > 0
