"""Closed-form cross-check suite run by ``sasaki-approx verify``."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bergman import (
    LogNorms,
    convergence_report,
    epsilon_function,
    epsilon_periodicity_check,
)
from .models import cylinder, fubini_study, punctured_disc, transverse_curvature
from .sasaki import (
    SasakianStructureParams,
    contact_positive,
    d_homothety,
    eta_einstein_constants,
    homothety_of_constants,
    induced_structure,
)
from .sections import closed_form_log_norm, quadrature_log_norm


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool

    def row(self) -> dict:
        return {
            "check": self.name,
            "value": self.value,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def _check(name: str, value: float, tolerance: float) -> Check:
    value = float(value)
    passed = value == 0.0 if tolerance == 0 else value < tolerance
    return Check(name, value, float(tolerance), bool(passed and math.isfinite(value)))


def _map(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _norm_error(model, pairs, workers) -> float:
    def one(pair):
        k, j = pair
        return abs(math.expm1(quadrature_log_norm(model, k, j) - closed_form_log_norm(model, k, j)))

    return max(_map(one, pairs, workers))


def norm_checks(workers: int = 1) -> list[Check]:
    cyl = [(k, j) for k in range(1, 13) for j in range(-20, 21)]
    disc = [(k, j) for k in range(2, 13) for j in range(1, 21)]
    fs = [(k, j) for k in range(1, 13) for j in range(0, k + 1)]
    return [
        _check("norms.cylinder.closed_form", _norm_error(cylinder(), cyl, workers), 1e-10),
        _check("norms.punctured_disc.closed_form", _norm_error(punctured_disc(), disc, workers), 1e-10),
        _check("norms.fubini_study.closed_form", _norm_error(fubini_study(), fs, workers), 1e-10),
    ]


def fubini_study_checks(workers: int = 1) -> list[Check]:
    model = fubini_study()
    grid = np.linspace(-2.0, 2.0, 9)
    spread, level = 0.0, 0.0
    for k in range(1, 11):
        norms = LogNorms(model, k)
        values = np.array([epsilon_function(model, k, u, norms=norms).value for u in grid])
        spread = max(spread, (values.max() - values.min()) / values.min())
        level = max(level, float(np.max(np.abs(values * math.pi / (k + 1) - 1.0))))

    def density_error(k):
        s = induced_structure(model, k)
        return max(abs(float(s.transverse_density(u)) - 0.5 * float(model.F2(u))) for u in grid)

    density = max(_map(density_error, list(range(1, 11)), workers))
    return [
        _check("fubini_study.epsilon_spread", spread, 1e-12),
        _check("fubini_study.epsilon_level", level, 1e-12),
        _check("fubini_study.induced_density", density, 1e-10),
    ]


def cylinder_checks(workers: int = 1) -> list[Check]:
    model = cylinder()
    grid = np.linspace(-2.0, 2.0, 41)

    def deviation(k):
        norms = LogNorms(model, k)
        return max(abs(epsilon_function(model, k, u, norms=norms).value * math.pi / k - 1.0) for u in grid)

    ks = list(range(1, 9))
    dev = max(_map(deviation, ks, workers))
    period = max(
        epsilon_periodicity_check(model, k, float(u)) for k in ks for u in (-1.7, -0.4, 0.0, 0.3, 1.2)
    )
    return [
        _check("cylinder.epsilon_normalization", dev, 1e-8),
        _check("cylinder.periodicity", period, 1e-11),
    ]


def disc_checks(workers: int = 1) -> list[Check]:
    model = punctured_disc()
    report = convergence_report(model, [4, 8, 16], np.linspace(-3.0, -0.5, 50), workers=workers)
    ratios = [
        b / a
        for series in (report.epsilon_deviation, report.potential_curvature_deviation)
        for a, b in zip(series, series[1:])
    ]
    limit = max(
        abs(epsilon_function(model, k, -1e-6, method="closed_form").value * math.pi / (k - 1) - 1.0)
        for k in range(3, 9)
    )
    return [
        _check("punctured_disc.convergence_ratio", max(ratios), 1.0),
        _check("punctured_disc.boundary_limit", limit, 1e-3),
    ]


EXPECTED = {"cylinder": (0.0, -2.0), "punctured_disc": (-4.0, -6.0), "fubini_study": (4.0, 2.0)}


def curvature_checks(workers: int = 1) -> list[Check]:
    curv_err, lam_err, trace_err = 0.0, 0.0, 0.0
    for build in (cylinder, punctured_disc, fubini_study):
        model = build()
        K_expected, lam_expected = EXPECTED[model.name]
        K = [transverse_curvature(model, float(u), method="fd") for u in model.grid(100)]
        curv_err = max(curv_err, max(abs(x - K_expected) for x in K))
        c = eta_einstein_constants(SasakianStructureParams(model), curvature_method="fd")
        lam_err = max(lam_err, abs(c.lam - lam_expected))
        trace_err = max(trace_err, abs(c.lam + c.nu - 2.0))
    return [
        _check("curvature.finite_difference", curv_err, 1e-7),
        _check("eta_einstein.lambda", lam_err, 1e-7),
        _check("eta_einstein.trace", trace_err, 0.0),
    ]


def homothety_checks(workers: int = 1, seed: int = 20240617) -> list[Check]:
    algebra = 0.0
    for build in (cylinder, punctured_disc, fubini_study):
        s = SasakianStructureParams(build())
        back = d_homothety(d_homothety(s, 2.0), 0.5)
        algebra = max(algebra, abs(back.a - s.a), abs(d_homothety(s, 1.0).a - s.a))
        c = eta_einstein_constants(s, curvature_method="analytic")
        for a in (0.5, 2.0, 3.0):
            lhs = eta_einstein_constants(d_homothety(s, a), curvature_method="analytic")
            rhs = homothety_of_constants(c, a)
            algebra = max(algebra, abs(lhs.lam - rhs.lam), abs(lhs.nu - rhs.nu))
    rng = np.random.default_rng(seed)
    factors = np.exp(rng.uniform(math.log(1e-3), math.log(1e3), size=1000))
    failures = 0
    for build in (cylinder, punctured_disc, fubini_study):
        s = SasakianStructureParams(build())
        grid = s.model.grid(20)
        failures += sum(not contact_positive(d_homothety(s, float(a), verify_grid=grid[:2]), grid) for a in factors)
    return [
        _check("homothety.algebra", algebra, 1e-12),
        _check("homothety.contact_positivity_failures", failures, 0.0),
    ]


SUITES = (norm_checks, fubini_study_checks, cylinder_checks, disc_checks, curvature_checks, homothety_checks)


def run_all(workers: int = 1) -> list[Check]:
    checks: list[Check] = []
    for suite in SUITES:
        checks.extend(suite(workers))
    return checks
