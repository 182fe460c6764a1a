"""Radial Sasakian structures on the unit bundle, D-homotheties and
eta-Einstein constants.

Coordinates on the unit bundle are ``(u, theta, alpha)``.  A structure with
homothety factor ``a`` has contact form ``eta_a = a (d alpha + F'(u) d theta)``,
transverse metric ``a F''(u) (du^2/4 + dtheta^2)``, Reeb field ``(1/a) d/d alpha``
and metric ``g_a = a g^T + eta_a (x) eta_a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .bergman import DEFAULT_TOL, LogNorms, epsilon_function
from .errors import EmptySectionSpace, NonPositiveFactor, NotEtaEinstein, NumericalError
from .models import RadialPolarizedModel, transverse_curvature
from .numerics import first_derivative, second_derivative

ETA_EINSTEIN_SPREAD = 1e-6
INDUCED_FD_STEP = 1e-2


@dataclass(frozen=True)
class SasakianStructureParams:
    model: RadialPolarizedModel
    a: float = 1.0
    # Lift to the line bundle X x R instead of X x S^1; no local invariant changes.
    fiber_is_line: bool = False

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise NonPositiveFactor(f"homothety factor must be positive, got {self.a!r}")

    @property
    def reeb_scale(self) -> float:
        return 1.0 / self.a

    def A(self, u):
        """Coefficient of ``d theta`` in ``eta``."""
        return self.a * np.asarray(self.model.F1(u), dtype=float)

    def transverse_density(self, u):
        return 0.5 * self.a * np.asarray(self.model.F2(u), dtype=float)

    def eta(self, u) -> np.ndarray:
        """Components of ``eta`` in the coframe ``(du, dtheta, dalpha)``."""
        return np.array([0.0, float(self.A(u)), self.a])

    def transverse_metric(self, u) -> np.ndarray:
        f2 = self.a * float(self.model.F2(u))
        return np.diag([0.25 * f2, f2, 0.0])

    def metric(self, u) -> np.ndarray:
        e = self.eta(u)
        return self.transverse_metric(u) + np.outer(e, e)


def d_eta_defect(s: SasakianStructureParams, grid=None, step: float = 5e-4) -> float:
    """Largest relative mismatch between ``dA/du`` and twice the transverse density."""
    pts = s.model.grid(20) if grid is None else np.asarray(grid, dtype=float)
    worst = 0.0
    for u in pts:
        slope = first_derivative(lambda x: float(s.A(x)), float(u), step)
        target = 2.0 * float(s.transverse_density(u))
        worst = max(worst, abs(slope - target) / max(1.0, abs(target)))
    return worst


def d_homothety(
    s: SasakianStructureParams, a: float, verify_grid=None
) -> SasakianStructureParams:
    """Apply ``eta -> a eta``, ``R -> R/a``, ``g -> a g + (a^2 - a) eta (x) eta``.

    The new metric is cross-checked against that formula on ``verify_grid``
    (default: 8 points of the model window).
    """
    if not (a > 0 and math.isfinite(a)):
        raise NonPositiveFactor(f"homothety factor must be positive, got {a!r}")
    out = replace(s, a=s.a * a)
    pts = s.model.grid(8) if verify_grid is None else np.asarray(verify_grid, dtype=float)
    for u in pts:
        e = s.eta(u)
        expected = a * s.metric(u) + (a * a - a) * np.outer(e, e)
        got = out.metric(u)
        scale = max(1.0, float(np.max(np.abs(expected))))
        if np.max(np.abs(got - expected)) > 1e-12 * scale:
            raise NumericalError(f"homothety metric identity fails at u={u!r}")
    return out


@dataclass(frozen=True)
class EtaEinsteinConstants:
    """``Ric = lambda g + nu eta (x) eta``; ``nu`` is always ``2 - lambda``."""

    lam: float
    nu: float

    @classmethod
    def from_lambda(cls, lam: float) -> "EtaEinsteinConstants":
        # Snap lam to a multiple of 2^(e-51) with |lam|, 2 < 2^e; then 2 - lam
        # and lam + nu are both exact in floating point.
        _, e = math.frexp(max(abs(lam), 2.0))
        q = math.ldexp(1.0, e - 51)
        lam = round(lam / q) * q
        return cls(lam, 2.0 - lam)

    @property
    def transverse_einstein(self) -> float:
        return self.lam + 2.0


def eta_einstein_constants(
    s: SasakianStructureParams,
    grid=None,
    curvature_method: str = "fd",
    spread: float = ETA_EINSTEIN_SPREAD,
) -> EtaEinsteinConstants:
    """Constants of an eta-Einstein structure from its transverse curvature.

    The curvature is sampled on ``grid`` (default 100 points); a spread above
    ``spread`` raises :class:`NotEtaEinstein`.
    """
    pts = s.model.grid(100) if grid is None else np.asarray(grid, dtype=float)
    K = np.array([transverse_curvature(s.model, float(u), method=curvature_method) for u in pts])
    observed = float(K.max() - K.min())
    if observed > spread:
        raise NotEtaEinstein(observed)
    return EtaEinsteinConstants.from_lambda(float(np.mean(K)) / s.a - 2.0)


def homothety_of_constants(c: EtaEinsteinConstants, a: float) -> EtaEinsteinConstants:
    if not (a > 0 and math.isfinite(a)):
        raise NonPositiveFactor(f"homothety factor must be positive, got {a!r}")
    return EtaEinsteinConstants.from_lambda((c.lam + 2.0) / a - 2.0)


def induced_model(
    model: RadialPolarizedModel,
    k: int,
    tol: float = DEFAULT_TOL,
    step: float = INDUCED_FD_STEP,
    method: str = "sum",
) -> RadialPolarizedModel:
    """Model with potential ``F_k = F + log(eps_k)/k``.

    Derivatives add five-point differences of ``log(eps_k)/k`` to the
    analytic ``F'`` and ``F''``.
    """
    norms = LogNorms(model, k)
    if norms.allowed.is_empty():
        raise EmptySectionSpace(f"{model.name} has no L^2 sections at k={k}")

    def correction(u):
        return epsilon_function(model, k, float(u), tol, method=method, norms=norms).log_value / k

    def lift(fn):
        def call(u):
            if np.ndim(u) == 0:
                return fn(float(u))
            return np.array([fn(float(x)) for x in np.ravel(u)]).reshape(np.shape(u))

        return call

    F, F1, F2 = model.F, model.F1, model.F2
    return replace(
        model,
        name=f"{model.name}[k={k}]",
        F=lift(lambda u: float(F(u)) + correction(u)),
        F1=lift(lambda u: float(F1(u)) + first_derivative(correction, u, step)),
        F2=lift(lambda u: float(F2(u)) + second_derivative(correction, u, step)),
        log_F2_d1=None,
        log_F2_d2=None,
        builtin=None,
        log_density=None,
    )


def induced_structure(
    model: RadialPolarizedModel,
    k: int,
    normalized: bool = True,
    tol: float = DEFAULT_TOL,
    step: float = INDUCED_FD_STEP,
    method: str = "sum",
) -> SasakianStructureParams:
    """Structure pulled back by the k-th immersion.

    The raw pullback has potential ``k F_k``, i.e. the ``D_k``-homothety of the
    normalized structure whose potential is ``F_k``.
    """
    base = SasakianStructureParams(induced_model(model, k, tol, step, method), a=1.0)
    if normalized:
        return base
    return d_homothety(base, float(k), verify_grid=model.grid(3))


def structure_to_dict(s: SasakianStructureParams, grid) -> dict:
    pts = [float(u) for u in grid]
    return {
        "model": s.model.name,
        "a": s.a,
        "reeb_scale": s.reeb_scale,
        "fiber": "R" if s.fiber_is_line else "S1",
        "grid": pts,
        "A": [float(s.A(u)) for u in pts],
        "transverse_density": [float(s.transverse_density(u)) for u in pts],
    }


def contact_positive(s: SasakianStructureParams, grid: Optional[np.ndarray] = None) -> bool:
    pts = s.model.grid(100) if grid is None else np.asarray(grid, dtype=float)
    return bool(np.all(np.asarray(s.transverse_density(pts), dtype=float) > 0))
