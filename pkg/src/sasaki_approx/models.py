"""Radially symmetric polarized Kähler models.

A model is a Kähler potential ``F(u)`` in the variable ``u = log|z|^2`` on an
open interval.  Conventions used throughout the package: the contact form of
the unit bundle is ``eta = d(alpha) + F'(u) d(theta)``, the transverse form is
``omega^T = (1/2) F''(u) du ^ d(theta)`` and the hermitian weight on ``L^k`` is
``exp(-k F)``.  The transverse metric is ``F''(u) (du^2/4 + dtheta^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, PositivityViolation, SingularMetric
from .numerics import second_derivative

# Step for the default derivatives of user potentials given only as F.
POTENTIAL_FD_STEP = 1e-5
# Step of the five-point stencil used for curvature.
CURVATURE_FD_STEP = 1e-3

LATTICE_KINDS = ("all_integers", "integers_ge", "range_k")


@dataclass(frozen=True)
class IndexLattice:
    """Which monomials ``z^j`` are candidates for a finite norm."""

    kind: str = "all_integers"
    start: int = 0

    def __post_init__(self):
        if self.kind not in LATTICE_KINDS:
            raise ValueError(f"unknown lattice kind {self.kind!r}")

    def bounds(self, k: int) -> tuple[Optional[int], Optional[int]]:
        if self.kind == "all_integers":
            return None, None
        if self.kind == "integers_ge":
            return self.start, None
        return 0, k

    def describe(self) -> str:
        if self.kind == "integers_ge":
            return f"integers_ge({self.start})"
        if self.kind == "range_k":
            return "range(0..k)"
        return self.kind


@dataclass(frozen=True)
class RadialPolarizedModel:
    name: str
    u_min: float
    u_max: float
    F: Callable
    F1: Callable
    F2: Callable
    lattice: IndexLattice = field(default_factory=IndexLattice)
    # Sampling window used for default grids (must lie inside the domain).
    window: tuple[float, float] = (-3.0, 3.0)
    # Analytic derivatives of log F2, if known.
    log_F2_d1: Optional[Callable] = None
    log_F2_d2: Optional[Callable] = None
    # Name of the built-in whose closed forms apply; None for anything else.
    builtin: Optional[str] = None
    # Overflow-free log F2, if F2 itself can overflow.
    log_density: Optional[Callable] = None

    def __post_init__(self):
        if not self.u_min < self.u_max:
            raise ValueError(f"empty domain ({self.u_min}, {self.u_max})")
        lo, hi = self.window
        if not (self.u_min < lo < hi < self.u_max):
            raise ValueError(f"window {self.window} is not inside the domain")

    @property
    def domain(self) -> tuple[float, float]:
        return self.u_min, self.u_max

    def contains(self, u) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all((u > self.u_min) & (u < self.u_max)))

    def check_domain(self, u) -> None:
        if not self.contains(u):
            raise DomainError(
                f"u = {u!r} is outside the domain ({self.u_min}, {self.u_max}) of {self.name}"
            )

    def grid(self, count: int = 100) -> np.ndarray:
        return np.linspace(self.window[0], self.window[1], count)

    def log_F2(self, u):
        if self.log_density is not None:
            return self.log_density(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(self.F2(u))

    @classmethod
    def from_potential(
        cls,
        name: str,
        F: Callable,
        domain: tuple[float, float],
        F1: Optional[Callable] = None,
        F2: Optional[Callable] = None,
        lattice: IndexLattice | None = None,
        window: tuple[float, float] | None = None,
        **kwargs,
    ) -> "RadialPolarizedModel":
        """Build a user model; missing derivatives become central differences."""
        h = POTENTIAL_FD_STEP
        if F1 is None:
            F1 = lambda u: (F(u + h) - F(u - h)) / (2 * h)  # noqa: E731
        if F2 is None:
            F2 = lambda u: (F(u + h) - 2 * F(u) + F(u - h)) / (h * h)  # noqa: E731
        lo, hi = float(domain[0]), float(domain[1])
        return cls(
            name=name,
            u_min=lo,
            u_max=hi,
            F=F,
            F1=F1,
            F2=F2,
            lattice=lattice or IndexLattice(),
            window=window or default_window(lo, hi),
            **kwargs,
        )


def default_window(lo: float, hi: float) -> tuple[float, float]:
    """A sampling window strictly inside ``(lo, hi)``."""
    if math.isinf(lo) and math.isinf(hi):
        return -3.0, 3.0
    if math.isinf(lo):
        return hi - 3.0, hi - 0.5
    if math.isinf(hi):
        return lo + 0.5, lo + 3.0
    margin = 0.05 * (hi - lo)
    return lo + margin, hi - margin


# -- built-in models ---------------------------------------------------------


def cylinder() -> RadialPolarizedModel:
    """Flat cylinder metric on the punctured plane, ``F = u^2/2``."""
    return RadialPolarizedModel(
        name="cylinder",
        u_min=-math.inf,
        u_max=math.inf,
        F=lambda u: 0.5 * np.square(u),
        F1=lambda u: 1.0 * np.asarray(u, dtype=float),
        F2=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        lattice=IndexLattice("all_integers"),
        window=(-3.0, 3.0),
        log_F2_d1=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        log_F2_d2=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        builtin="cylinder",
    )


def punctured_disc() -> RadialPolarizedModel:
    """Hyperbolic cusp metric on the punctured disc, ``F = -log(-u)``."""
    return RadialPolarizedModel(
        name="punctured_disc",
        u_min=-math.inf,
        u_max=0.0,
        F=lambda u: -np.log(-np.asarray(u, dtype=float)),
        F1=lambda u: -1.0 / np.asarray(u, dtype=float),
        F2=lambda u: 1.0 / np.square(u),
        lattice=IndexLattice("integers_ge", 1),
        window=(-3.0, -0.5),
        log_F2_d1=lambda u: -2.0 / np.asarray(u, dtype=float),
        log_F2_d2=lambda u: 2.0 / np.square(u),
        builtin="punctured_disc",
        log_density=lambda u: -2.0 * np.log(-np.asarray(u, dtype=float)),
    )


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(u, dtype=float)))


def fubini_study() -> RadialPolarizedModel:
    """Fubini-Study metric on the projective line in an affine chart."""
    return RadialPolarizedModel(
        name="fubini_study",
        u_min=-math.inf,
        u_max=math.inf,
        F=lambda u: np.logaddexp(0.0, u),
        F1=_sigmoid,
        F2=lambda u: 0.25 / np.square(np.cosh(0.5 * np.asarray(u, dtype=float))),
        lattice=IndexLattice("range_k"),
        window=(-3.0, 3.0),
        log_F2_d1=lambda u: -np.tanh(0.5 * np.asarray(u, dtype=float)),
        log_F2_d2=lambda u: -0.5 / np.square(np.cosh(0.5 * np.asarray(u, dtype=float))),
        builtin="fubini_study",
    )


BUILTINS: dict[str, Callable[[], RadialPolarizedModel]] = {
    "cylinder": cylinder,
    "punctured_disc": punctured_disc,
    "fubini_study": fubini_study,
}


def builtin_model(name: str) -> RadialPolarizedModel:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ValueError(
            f"unknown model {name!r}; built-ins are {', '.join(BUILTINS)}"
        ) from None


# -- geometric operations ----------------------------------------------------


def transverse_form_density(model: RadialPolarizedModel, u: float) -> float:
    """Coefficient of ``du ^ dtheta`` in the transverse Kähler form."""
    model.check_domain(u)
    return 0.5 * float(model.F2(u))


def _log_density_second_derivative(model: RadialPolarizedModel, u: float, h: float) -> float:
    # log(F2(u+x)/F2(u)) keeps the stencil values O(h) so only relative
    # rounding of F2 enters, not the size of log F2 itself.
    f0 = float(model.F2(u))

    def g(x):
        if x == 0:
            return 0.0
        return math.log1p((float(model.F2(u + x)) - f0) / f0)

    return second_derivative(g, 0.0, h)


def transverse_curvature(
    model: RadialPolarizedModel,
    u: float,
    method: str = "auto",
    step: float = CURVATURE_FD_STEP,
) -> float:
    """Gaussian curvature ``-2 (log F2)'' / F2`` of the transverse metric.

    ``method`` is ``"analytic"`` (needs ``model.log_F2_d2``), ``"fd"`` or
    ``"auto"``, which prefers the analytic form.
    """
    model.check_domain(u)
    if method not in ("auto", "analytic", "fd"):
        raise ValueError(f"unknown curvature method {method!r}")
    if method == "fd":
        model.check_domain([u - 2 * step, u + 2 * step])
    f2 = float(model.F2(u))
    if not f2 > 0:
        raise SingularMetric(f"F'' = {f2!r} <= 0 at u = {u!r}")
    if method == "analytic" and model.log_F2_d2 is None:
        raise ValueError(f"model {model.name} has no analytic curvature")
    if method != "fd" and model.log_F2_d2 is not None:
        d2 = float(model.log_F2_d2(u))
    else:
        d2 = _log_density_second_derivative(model, u, step)
    return -2.0 * d2 / f2 + 0.0  # normalise -0.0


@dataclass(frozen=True)
class ContactReport:
    ok: bool
    violations: tuple[float, ...]
    checked: int

    def __bool__(self):
        return self.ok


def contact_check(model: RadialPolarizedModel, grid) -> ContactReport:
    """The contact condition holds iff ``F'' > 0``; report every failing point."""
    pts = np.atleast_1d(np.asarray(grid, dtype=float))
    model.check_domain(pts)
    values = np.atleast_1d(np.asarray(model.F2(pts), dtype=float)) * np.ones_like(pts)
    bad = tuple(float(u) for u, v in zip(pts, values) if not v > 0)
    return ContactReport(ok=not bad, violations=bad, checked=len(pts))


def transverse_kahler_deform(
    model: RadialPolarizedModel,
    f: Callable,
    f1: Optional[Callable] = None,
    f2: Optional[Callable] = None,
    grid=None,
) -> RadialPolarizedModel:
    """Replace the cone potential ``t`` by ``exp(f) t``, i.e. ``F -> F + 2f``.

    Missing derivatives of ``f`` are taken by central differences.  The new
    density ``F'' + 2 f''`` is validated on ``grid`` (default: 100 points of
    the model window).
    """
    h = POTENTIAL_FD_STEP
    if f1 is None:
        f1 = lambda u: (f(u + h) - f(u - h)) / (2 * h)  # noqa: E731
    if f2 is None:
        f2 = lambda u: (f(u + h) - 2 * f(u) + f(u - h)) / (h * h)  # noqa: E731
    F, F1, F2 = model.F, model.F1, model.F2
    deformed = replace(
        model,
        name=f"{model.name}+deformed",
        F=lambda u: F(u) + 2.0 * f(u),
        F1=lambda u: F1(u) + 2.0 * f1(u),
        F2=lambda u: F2(u) + 2.0 * f2(u),
        log_F2_d1=None,
        log_F2_d2=None,
        builtin=None,
        log_density=None,
    )
    pts = model.grid(100) if grid is None else np.atleast_1d(np.asarray(grid, dtype=float))
    model.check_domain(pts)
    density = np.array([float(deformed.F2(float(u))) for u in pts])
    bad = pts[~(density > 0)]
    if bad.size:
        raise PositivityViolation(bad.tolist())
    return deformed


def derivative_consistency(model: RadialPolarizedModel, u: float, h: float) -> float:
    """``|central second difference of F - F''|`` at ``u`` with step ``h``."""
    approx = (model.F(u + h) - 2 * model.F(u) + model.F(u - h)) / (h * h)
    return abs(float(approx) - float(model.F2(u)))
