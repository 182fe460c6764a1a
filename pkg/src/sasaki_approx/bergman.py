"""Bergman density (epsilon function), induced potentials and convergence reports.

For an orthonormal basis ``c_j z^j`` of ``H^0(L^k)`` the density is

    eps_k(u) = exp(-k F(u)) * sum_j exp(j u) / N_{k,j}

and the potential induced by the immersion is ``F_k(u) = F(u) + log(eps_k)/k``.
The sum is truncated around its largest term with a certified geometric tail
bound: ``log N_{k,j}`` is convex in ``j`` (it is the log of a moment
sequence), so term ratios decrease away from the maximum.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import EmptySectionSpace, NonConvergent, WrongModel
from .models import RadialPolarizedModel
from .numerics import QuadratureSpec, log_sum_exp, second_derivative
from .sections import IndexSet, allowed_indices, has_closed_form, monomial_log_norm

DEFAULT_TOL = 1e-15
CONVERGENCE_FD_STEP = 1e-3

NORMALIZER_NOTE = (
    "epsilon deviations are measured against pi/(k+c) with c = +1 (fubini_study), "
    "0 (cylinder), -1 (punctured_disc), pinned by direct summation; other models use pi/k"
)


def index_cap(k: int) -> int:
    return 10 * k + 1000


class LogNorms:
    """Memoised ``j -> log N_{k,j}`` for one model and level."""

    def __init__(
        self,
        model: RadialPolarizedModel,
        k: int,
        method: str = "auto",
        spec: QuadratureSpec | None = None,
    ):
        self.model = model
        self.k = k
        self.method = method
        self.spec = spec
        self.allowed = allowed_indices(model, k)
        self._cache: dict[int, float] = {}

    def __call__(self, j: int) -> float:
        value = self._cache.get(j)
        if value is None:
            value = monomial_log_norm(
                self.model, self.k, j, self.spec, method=self.method, allowed=self.allowed
            )
            self._cache[j] = value
        return value


@dataclass(frozen=True)
class EpsilonPoint:
    value: float
    log_value: float
    window: Optional[tuple[int, int]]
    tail_bound: float
    method: str = "sum"


def _initial_index(model: RadialPolarizedModel, k: int, u: float, allowed: IndexSet) -> int:
    guess = float(k * model.F1(u))
    j = int(round(guess)) if math.isfinite(guess) and abs(guess) < 1e15 else 0
    if allowed.lo is not None:
        j = max(j, allowed.lo)
    if allowed.hi is not None:
        j = min(j, allowed.hi)
    return j


def _summed(model, k, u, tol, norms: LogNorms, cap: int) -> EpsilonPoint:
    allowed = norms.allowed
    kF = k * float(model.F(u))

    def term(j):
        return j * u - norms(j) - kF

    # Hill-climb to the largest term; the terms are concave in j.
    j = _initial_index(model, k, u, allowed)
    steps = 0
    while j + 1 in allowed and term(j + 1) > term(j):
        j += 1
        steps += 1
        if steps > cap:
            raise NonConvergent(f"no maximal term within {cap} steps at u={u!r}")
    while j - 1 in allowed and term(j - 1) > term(j):
        j -= 1
        steps += 1
        if steps > cap:
            raise NonConvergent(f"no maximal term within {cap} steps at u={u!r}")

    top = term(j)
    terms = {j: top}
    log_tol = math.log(tol)
    tails = []
    for direction in (1, -1):
        edge = j
        while True:
            nxt = edge + direction
            if nxt not in allowed:
                tails.append(-math.inf)
                break
            t_next = terms.get(nxt)
            if t_next is None:
                t_next = term(nxt)
            log_ratio = t_next - terms[edge]
            partial = log_sum_exp(np.fromiter(terms.values(), float))
            if log_ratio < 0:
                tail = t_next - math.log(-math.expm1(log_ratio))
                small_edge = terms[edge] <= top + log_tol or edge == j
                if small_edge and tail <= partial + log_tol - math.log(2.0):
                    tails.append(tail)
                    break
            terms[nxt] = t_next
            edge = nxt
            if len(terms) > cap:
                raise NonConvergent(
                    f"summation window exceeds the index cap {cap} for "
                    f"{model.name}, k={k}, u={u!r}"
                )
    log_eps = log_sum_exp(np.array([terms[i] for i in sorted(terms)]))
    tail_log = log_sum_exp(tails)
    return EpsilonPoint(
        value=math.exp(log_eps),
        log_value=log_eps,
        window=(min(terms), max(terms)),
        tail_bound=math.exp(tail_log) if tail_log > -math.inf else 0.0,
        method="sum",
    )


@lru_cache(maxsize=None)
def _eulerian_logs(n: int) -> tuple[float, ...]:
    """Logs of the Eulerian numbers A(n, m), m = 0..n-1."""
    row = [1]
    for size in range(2, n + 1):
        row = [
            (m + 1) * (row[m] if m < len(row) else 0)
            + (size - m) * (row[m - 1] if m >= 1 else 0)
            for m in range(size)
        ]
    return tuple(math.log(a) for a in row)


def _closed_form_log_epsilon(model: RadialPolarizedModel, k: int, u: float) -> float:
    if model.builtin == "fubini_study":
        return math.log((k + 1) / math.pi)
    if model.builtin == "cylinder":
        # Poisson dual of the Gaussian lattice sum.
        total, m = 1.0, 1
        while True:
            weight = math.exp(-2.0 * math.pi**2 * k * m * m)
            if weight < 1e-18:
                break
            total += 2.0 * weight * math.cos(2.0 * math.pi * m * k * u)
            m += 1
        return math.log(k / math.pi) + math.log(total)
    if model.builtin == "punctured_disc":
        # sum_{j>=1} j^n x^j = x A_n(x) / (1-x)^(n+1), A_n the Eulerian polynomial.
        n = k - 1
        logs = _eulerian_logs(n)
        series = log_sum_exp([a + (m + 1) * u for m, a in enumerate(logs)])
        return (
            k * math.log(-u)
            + series
            - (n + 1) * math.log(-math.expm1(u))
            - math.log(math.pi)
            - math.lgamma(k - 1)
        )
    raise ValueError(f"no closed-form density for model {model.name!r}")


def epsilon_function(
    model: RadialPolarizedModel,
    k: int,
    u: float,
    tol: float = DEFAULT_TOL,
    method: str = "sum",
    norm_method: str = "auto",
    cap: Optional[int] = None,
    norms: Optional[LogNorms] = None,
) -> EpsilonPoint:
    """Evaluate ``eps_k(u)``.

    ``method="sum"`` truncates the orthonormal expansion so that the bound on
    the omitted terms is below ``tol`` relative to the value; the window may
    hold at most ``cap`` indices (default ``10 k + 1000``).
    ``method="closed_form"`` uses the exact resummations available for the
    built-ins (binomial, Poisson and Eulerian identities).
    """
    u = float(u)
    model.check_domain(u)
    if not tol > 0:
        raise ValueError("tol must be positive")
    if norms is None:
        norms = LogNorms(model, k, norm_method)
    if norms.allowed.is_empty():
        raise EmptySectionSpace(f"{model.name} has no L^2 sections at k={k}")
    if method == "closed_form":
        log_eps = _closed_form_log_epsilon(model, k, u)
        return EpsilonPoint(math.exp(log_eps), log_eps, None, 0.0, "closed_form")
    if method != "sum":
        raise ValueError(f"unknown epsilon method {method!r}")
    return _summed(model, k, u, tol, norms, cap or index_cap(k))


def induced_potential(model: RadialPolarizedModel, k: int, u: float, **kwargs) -> float:
    """``F_k(u) = F(u) + log(eps_k(u)) / k``, the potential pulled back by the immersion."""
    point = epsilon_function(model, k, u, **kwargs)
    return float(model.F(u)) + point.log_value / k


def epsilon_periodicity_check(
    model: RadialPolarizedModel, k: int, u: float, tol: float = DEFAULT_TOL
) -> float:
    """Relative change of ``eps_k`` under ``u -> u + 1/k`` (cylinder only)."""
    if model.builtin != "cylinder":
        raise WrongModel(f"periodicity holds for the cylinder model, not {model.name}")
    norms = LogNorms(model, k)
    a = epsilon_function(model, k, u, tol, norms=norms)
    b = epsilon_function(model, k, u + 1.0 / k, tol, norms=norms)
    return abs(b.value - a.value) / a.value


@dataclass(frozen=True)
class PullbackCoordinate:
    tau: float
    normalized: float


def pullback_from_epsilon(epsilon: float, k: int, t: float) -> PullbackCoordinate:
    if not t > 0:
        raise ValueError(f"t must be positive, got {t!r}")
    return PullbackCoordinate(epsilon * t**k, epsilon ** (1.0 / k) * t)


def pullback_coordinate(
    model: RadialPolarizedModel, k: int, u: float, t: float, **kwargs
) -> PullbackCoordinate:
    """Cone coordinate ``tau = eps_k t^k`` and its ``1/k`` homothetic normalization."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t!r}")
    point = epsilon_function(model, k, u, **kwargs)
    return PullbackCoordinate(
        tau=math.exp(point.log_value + k * math.log(t)),
        normalized=math.exp(point.log_value / k) * t,
    )


def normalizer_shift(model: RadialPolarizedModel) -> int:
    return {"fubini_study": 1, "cylinder": 0, "punctured_disc": -1}.get(model.builtin, 0)


def normalizer(model: RadialPolarizedModel, k: int) -> float:
    """Constant ``pi/(k+c)`` that makes the normalized density tend to 1."""
    return math.pi / (k + normalizer_shift(model))


@dataclass(frozen=True)
class ConvergenceReport:
    model_name: str
    k_list: tuple[int, ...]
    grid: tuple[float, ...]
    epsilon_deviation: tuple[float, ...]
    potential_curvature_deviation: tuple[float, ...]
    monotone_epsilon: bool
    monotone_curvature: bool
    tolerances: dict = field(default_factory=dict)
    normalizers: tuple[str, ...] = ()
    points: tuple[tuple, ...] = ()

    @property
    def monotone_decreasing(self) -> dict:
        return {"epsilon": self.monotone_epsilon, "curvature": self.monotone_curvature}

    def to_dict(self) -> dict:
        return {
            "model": self.model_name,
            "k_list": list(self.k_list),
            "grid": list(self.grid),
            "epsilon_deviation": list(self.epsilon_deviation),
            "curvature_deviation": list(self.potential_curvature_deviation),
            "monotone": {"epsilon": self.monotone_epsilon, "curvature": self.monotone_curvature},
            "tolerances": dict(self.tolerances),
            "metadata": {"normalizers": list(self.normalizers), "note": NORMALIZER_NOTE},
        }

    def rows(self):
        for k, u, eps, eps_dev, curv_dev in self.points:
            yield {
                "model": self.model_name,
                "k": k,
                "u": u,
                "epsilon": eps,
                "epsilon_deviation": eps_dev,
                "curvature_deviation": curv_dev,
            }


def _strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def _map(fn, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def convergence_report(
    model: RadialPolarizedModel,
    k_list: Sequence[int],
    u_grid: Sequence[float],
    tol: float = DEFAULT_TOL,
    fd_step: float = CONVERGENCE_FD_STEP,
    method: str = "sum",
    workers: int = 1,
) -> ConvergenceReport:
    """Per-k sup deviations of the normalized density and of ``F_k''`` from ``F''``.

    ``F_k'' - F''`` is the second difference of ``log(eps_k)/k`` (five-point
    stencil with step ``fd_step``).
    """
    ks = [int(k) for k in k_list]
    if not ks:
        raise ValueError("k_list must not be empty")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("k_list must be strictly increasing")
    grid = [float(u) for u in u_grid]
    if not grid:
        raise ValueError("grid must not be empty")
    offsets = (-2, -1, 0, 1, 2)
    model.check_domain([u + o * fd_step for u in grid for o in (-2, 2)])

    eps_dev, curv_dev, labels, points = [], [], [], []
    for k in ks:
        norms = LogNorms(model, k)
        if norms.allowed.is_empty():
            raise EmptySectionSpace(f"{model.name} has no L^2 sections at k={k}")
        nodes = [u + o * fd_step for u in grid for o in offsets]
        # Warm the norm cache serially so threaded evaluation is read-mostly.
        epsilon_function(model, k, grid[0], tol, method=method, norms=norms)
        logs = _map(
            lambda x: epsilon_function(model, k, x, tol, method=method, norms=norms).log_value,
            nodes,
            workers,
        )
        scale = normalizer(model, k)
        labels.append(f"pi/{k + normalizer_shift(model)}")
        e_dev, c_dev = [], []
        for i, u in enumerate(grid):
            stencil = dict(zip(offsets, logs[5 * i: 5 * i + 5]))
            eps = math.exp(stencil[0])
            d = abs(scale * eps - 1.0)
            second = second_derivative(lambda x: stencil[int(round(x))] / k, 0.0, 1.0) / fd_step**2
            e_dev.append(d)
            c_dev.append(abs(second))
            points.append((k, u, eps, d, abs(second)))
        eps_dev.append(max(e_dev))
        curv_dev.append(max(c_dev))
    return ConvergenceReport(
        model_name=model.name,
        k_list=tuple(ks),
        grid=tuple(grid),
        epsilon_deviation=tuple(eps_dev),
        potential_curvature_deviation=tuple(curv_dev),
        monotone_epsilon=_strictly_decreasing(eps_dev),
        monotone_curvature=_strictly_decreasing(curv_dev),
        tolerances={"epsilon_tail": tol, "fd_step": fd_step},
        normalizers=tuple(labels),
        points=tuple(points),
    )


__all__ = [
    "ConvergenceReport",
    "EpsilonPoint",
    "LogNorms",
    "PullbackCoordinate",
    "convergence_report",
    "epsilon_function",
    "epsilon_periodicity_check",
    "has_closed_form",
    "induced_potential",
    "normalizer",
    "pullback_coordinate",
    "pullback_from_epsilon",
]
