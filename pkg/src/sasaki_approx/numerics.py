"""Quadrature, log-domain summation and log-gamma.

Every routine here is a pure function of its arguments.  Infinite intervals
are never detected automatically: the caller picks the substitution through
:class:`QuadratureSpec.transform`, which keeps results reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DivergentSuspected, DomainError, NonConvergent

# exp(x) for x below this is zero or denormal in IEEE double precision.
UNDERFLOW_CUTOFF = -745.0

TRANSFORMS = ("none", "tanh_sinh", "exp_map_left", "exp_map_right", "exp_map_both")

_HALF_PI = 0.5 * math.pi
# Abscissae closer than this to an endpoint are dropped (their weight underflows).
_TINY_DISTANCE = 1e-300
_T_MAX = 6.2


@dataclass(frozen=True)
class QuadratureSpec:
    """Accuracy target and variable substitution for :func:`integrate`.

    ``max_subdivisions`` is the number of step halvings for the double
    exponential rules; for ``transform="none"`` it bounds the bisection
    budget of the adaptive Gauss-Legendre rule (50 bisections per unit).
    """

    relative_tolerance: float = 1e-12
    absolute_floor: float = 1e-300
    max_subdivisions: int = 12
    transform: str = "tanh_sinh"

    def __post_init__(self):
        if not self.relative_tolerance > 0:
            raise ValueError("relative_tolerance must be positive")
        if not self.absolute_floor >= 0:
            raise ValueError("absolute_floor must be non-negative")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be an integer >= 1")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}; expected one of {TRANSFORMS}")

    @classmethod
    def for_interval(cls, lo: float, hi: float, **kwargs) -> "QuadratureSpec":
        """Spec whose transform matches which endpoints of ``(lo, hi)`` are infinite."""
        left, right = math.isinf(lo), math.isinf(hi)
        if left and right:
            transform = "exp_map_both"
        elif left:
            transform = "exp_map_left"
        elif right:
            transform = "exp_map_right"
        else:
            transform = "tanh_sinh"
        return cls(transform=transform, **kwargs)

    def check_interval(self, lo: float, hi: float) -> None:
        left, right = math.isinf(lo), math.isinf(hi)
        expected = {
            "none": (False, False),
            "tanh_sinh": (False, False),
            "exp_map_left": (True, False),
            "exp_map_right": (False, True),
            "exp_map_both": (True, True),
        }[self.transform]
        if (left, right) != expected:
            raise ValueError(
                f"transform {self.transform!r} is inconsistent with the interval ({lo}, {hi})"
            )


def _evaluate(f: Callable, x: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on an array, falling back to a scalar loop."""
    with np.errstate(all="ignore"):
        try:
            y = np.asarray(f(x), dtype=float)
            if y.shape == x.shape:
                return y
        except (TypeError, ValueError):
            pass
        return np.array([float(f(float(v))) for v in x], dtype=float)


def _unit_nodes(h: float, odd_only: bool):
    """Tanh-sinh nodes on [0, 1] as (distance to 0, distance to 1, weight)."""
    n = int(_T_MAX / h)
    k = np.arange(-n, n + 1)
    if odd_only:
        k = k[k % 2 != 0]
    t = k * h
    s = _HALF_PI * np.sinh(np.abs(t))
    q = np.exp(-2.0 * s)
    near = q / (1.0 + q)  # distance to the nearer endpoint
    far = 1.0 / (1.0 + q)
    weight = _HALF_PI * np.cosh(t) * 2.0 * q / (1.0 + q) ** 2
    da = np.where(t < 0, near, far)
    db = np.where(t < 0, far, near)
    keep = (near > _TINY_DISTANCE) & (weight > 0)
    return da[keep], db[keep], weight[keep], t[keep]


def _double_exponential(g: Callable, spec: QuadratureSpec) -> float:
    """Integrate ``g(da, db)`` over [0, 1] with the tanh-sinh rule."""
    h = 1.0
    da, db, w, t = _unit_nodes(h, odd_only=False)
    values = g(da, db) * w
    if not np.all(np.isfinite(values)):
        raise DivergentSuspected("integrand is not finite at quadrature nodes")
    total = math.fsum(values)
    estimate = h * total
    history = [estimate]
    edge = _edge_contribution(values, t)
    for _level in range(1, spec.max_subdivisions + 1):
        h *= 0.5
        da, db, w, t_new = _unit_nodes(h, odd_only=True)
        new_values = g(da, db) * w
        if not np.all(np.isfinite(new_values)):
            raise DivergentSuspected("integrand is not finite at quadrature nodes")
        total += math.fsum(new_values)
        previous, estimate = estimate, h * total
        history.append(estimate)
        edge = max(edge, _edge_contribution(new_values, t_new))
        tolerance = spec.relative_tolerance * abs(estimate) + spec.absolute_floor
        if _level >= 2 and abs(estimate - previous) <= tolerance:
            if edge * h > max(tolerance, spec.relative_tolerance * abs(estimate)):
                raise DivergentSuspected(
                    "integrand does not decay at the interval endpoints"
                )
            return estimate
    if _growing(history) or edge * h > spec.relative_tolerance * abs(estimate):
        raise DivergentSuspected("quadrature estimates grow across refinements")
    raise NonConvergent(
        f"tolerance {spec.relative_tolerance:g} not reached after "
        f"{spec.max_subdivisions} refinements (last change "
        f"{abs(history[-1] - history[-2]):.3e})"
    )


def _edge_contribution(values: np.ndarray, t: np.ndarray) -> float:
    # Terms at |t| close to the truncation point must be negligible.
    outer = np.abs(t) >= _T_MAX - 1.0
    if not np.any(outer):
        return 0.0
    return float(np.max(np.abs(values[outer])))


def _growing(history: Sequence[float]) -> bool:
    if len(history) < 4:
        return False
    tail = [abs(v) for v in history[-4:]]
    steps = [b - a for a, b in zip(tail, tail[1:])]
    return all(s > 0 for s in steps) and steps[-1] >= 0.5 * steps[0]


def _gauss_legendre(f: Callable, lo: float, hi: float, spec: QuadratureSpec) -> float:
    x10, w10 = np.polynomial.legendre.leggauss(10)
    x21, w21 = np.polynomial.legendre.leggauss(21)

    def panel(a, b):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        coarse = half * float(np.dot(w10, _evaluate(f, mid + half * x10)))
        fine = half * float(np.dot(w21, _evaluate(f, mid + half * x21)))
        if not (math.isfinite(coarse) and math.isfinite(fine)):
            raise DivergentSuspected("integrand is not finite at quadrature nodes")
        return fine, abs(fine - coarse)

    panels = [(lo, hi, *panel(lo, hi))]
    budget = 50 * spec.max_subdivisions
    for _ in range(budget):
        estimate = math.fsum(p[2] for p in panels)
        error = math.fsum(p[3] for p in panels)
        if error <= spec.relative_tolerance * abs(estimate) + spec.absolute_floor:
            return estimate
        worst = max(range(len(panels)), key=lambda i: panels[i][3])
        a, b, _, _ = panels.pop(worst)
        mid = 0.5 * (a + b)
        panels.append((a, mid, *panel(a, mid)))
        panels.append((mid, b, *panel(mid, b)))
        panels.sort(key=lambda p: p[0])
    raise NonConvergent(f"adaptive Gauss-Legendre exhausted {budget} bisections")


def integrate(
    f: Callable,
    interval: tuple[float, float],
    spec: QuadratureSpec | None = None,
) -> float:
    """Integrate ``f`` over ``interval``; endpoints may be infinite.

    ``f`` may be vectorized (preferred) or scalar-only.  The substitution is
    taken from ``spec.transform`` and must match the interval:
    ``exp_map_left`` uses ``u = b + log s`` on ``(-inf, b]``,
    ``exp_map_right`` uses ``u = a - log s`` on ``[a, inf)`` and
    ``exp_map_both`` splits the real line at 0.  All of them reduce to a
    tanh-sinh rule in ``s``.

    Raises
    ------
    NonConvergent
        The refinement budget ran out before the tolerance was met.
    DivergentSuspected
        The estimates or the endpoint contributions do not settle.
    """
    spec = spec or QuadratureSpec()
    lo, hi = float(interval[0]), float(interval[1])
    if lo == hi:
        return 0.0
    if lo > hi:
        return -integrate(f, (hi, lo), spec)
    spec.check_interval(lo, hi)

    if spec.transform == "none":
        return _gauss_legendre(f, lo, hi, spec)

    if spec.transform == "tanh_sinh":
        width = hi - lo

        def g(da, db):
            x = np.where(da <= db, lo + width * da, hi - width * db)
            inside = (x > lo) & (x < hi)
            # Nodes that round onto an endpoint carry negligible weight.
            values = np.zeros_like(x)
            values[inside] = _evaluate(f, x[inside])
            return width * values

        return _double_exponential(g, spec)

    def log_s(da, db):
        with np.errstate(divide="ignore"):
            return np.where(da < 0.5, np.log(da), np.log1p(-db))

    if spec.transform == "exp_map_left":
        def g(da, db):
            return _evaluate(f, hi + log_s(da, db)) / da

        return _double_exponential(g, spec)

    if spec.transform == "exp_map_right":
        def g(da, db):
            return _evaluate(f, lo - log_s(da, db)) / da

        return _double_exponential(g, spec)

    left = integrate(f, (-math.inf, 0.0), _replace_transform(spec, "exp_map_left"))
    right = integrate(f, (0.0, math.inf), _replace_transform(spec, "exp_map_right"))
    return left + right


def _replace_transform(spec: QuadratureSpec, transform: str) -> QuadratureSpec:
    return QuadratureSpec(
        relative_tolerance=spec.relative_tolerance,
        absolute_floor=spec.absolute_floor,
        max_subdivisions=spec.max_subdivisions,
        transform=transform,
    )


def log_sum_exp(terms: Iterable[float]) -> float:
    """Return ``log(sum(exp(t)))`` without overflow.

    Terms are shifted by their maximum, sorted in descending order and added
    with :func:`math.fsum`; terms more than 745 below the maximum are skipped.
    An empty input gives ``-inf``.
    """
    arr = np.asarray(terms if isinstance(terms, np.ndarray) else list(terms), dtype=float).ravel()
    if arr.size == 0:
        return -math.inf
    top = float(np.max(arr))
    if math.isnan(top):
        return math.nan
    if math.isinf(top):
        return top
    shifted = arr - top
    shifted = shifted[shifted > UNDERFLOW_CUTOFF]
    values = np.exp(-np.sort(-shifted))
    return top + math.log(math.fsum(values))


@dataclass(frozen=True)
class LogSum:
    """Running log-domain accumulator; ``add`` returns a new instance."""

    log_value: float = -math.inf
    term_count: int = 0

    def add(self, term: float) -> "LogSum":
        term = float(term)
        count = self.term_count + 1
        if term == -math.inf or term <= self.log_value + UNDERFLOW_CUTOFF:
            return LogSum(self.log_value, count)
        if self.log_value == -math.inf:
            return LogSum(term, count)
        hi, lo = max(term, self.log_value), min(term, self.log_value)
        return LogSum(hi + math.log1p(math.exp(lo - hi)), count)

    @classmethod
    def of(cls, terms: Iterable[float]) -> "LogSum":
        terms = list(terms)
        return cls(log_sum_exp(terms), len(terms))


def log_gamma(x: float) -> float:
    """``log(Gamma(x))`` for ``x > 0``."""
    x = float(x)
    if not (x > 0 and math.isfinite(x)):
        raise DomainError(f"log_gamma requires a finite x > 0, got {x!r}")
    return math.lgamma(x)


def log_factorial(n: int) -> float:
    if n < 0:
        raise DomainError(f"factorial of negative integer {n}")
    return math.lgamma(n + 1.0)


def second_derivative(f: Callable, u: float, h: float) -> float:
    """Five-point central second difference."""
    return (
        -f(u + 2 * h) + 16 * f(u + h) - 30 * f(u) + 16 * f(u - h) - f(u - 2 * h)
    ) / (12 * h * h)


def first_derivative(f: Callable, u: float, h: float) -> float:
    """Five-point central first difference."""
    return (-f(u + 2 * h) + 8 * f(u + h) - 8 * f(u - h) + f(u - 2 * h)) / (12 * h)
