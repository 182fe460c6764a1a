"""Weighted L^2 norms of monomial sections and orthonormal coefficients.

For a radial model the squared norm of ``z^j`` in ``H^0(L^k)`` reduces, after
the angular integration, to

    N_{k,j} = pi * integral of F''(u) exp(j u - k F(u)) du

over the domain of ``u``.  Norms are kept as ``log N`` throughout.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DivergentSuspected, IndexNotAllowed, NumericalError
from .models import RadialPolarizedModel
from .numerics import QuadratureSpec, integrate, log_gamma

LOG_PI = math.log(math.pi)
NORM_SPEC = QuadratureSpec(relative_tolerance=1e-13)
# Radius of the numerical probe used for non-built-in lattices.
PROBE_RADIUS = 16


@dataclass(frozen=True)
class IndexSet:
    """A set of consecutive integers; ``None`` bounds are unbounded."""

    lo: Optional[int] = None
    hi: Optional[int] = None
    empty: bool = False

    @classmethod
    def nothing(cls) -> "IndexSet":
        return cls(0, -1, empty=True)

    def __contains__(self, j) -> bool:
        if self.empty or int(j) != j:
            return False
        return (self.lo is None or j >= self.lo) and (self.hi is None or j <= self.hi)

    def is_empty(self) -> bool:
        return self.empty

    def is_finite(self) -> bool:
        return self.empty or (self.lo is not None and self.hi is not None)

    def __iter__(self):
        if not self.is_finite():
            raise ValueError("cannot iterate over an unbounded index set")
        return iter(()) if self.empty else iter(range(self.lo, self.hi + 1))

    def clip(self, lo: int, hi: int) -> list[int]:
        if self.empty:
            return []
        a = lo if self.lo is None else max(lo, self.lo)
        b = hi if self.hi is None else min(hi, self.hi)
        return list(range(a, b + 1))

    def describe(self) -> str:
        if self.empty:
            return "empty"
        lo = "-inf" if self.lo is None else str(self.lo)
        hi = "inf" if self.hi is None else str(self.hi)
        return f"[{lo}, {hi}]"


# -- closed forms for the built-ins -----------------------------------------


def closed_form_log_norm(model: RadialPolarizedModel, k: int, j: int) -> float:
    """Exact ``log N_{k,j}`` for built-in models."""
    if j not in allowed_indices(model, k):
        raise IndexNotAllowed(f"z^{j} has infinite norm for {model.name}, k={k}")
    if model.builtin == "cylinder":
        return 0.5 * math.log(2.0 / k) + 1.5 * LOG_PI + j * j / (2.0 * k)
    if model.builtin == "punctured_disc":
        return LOG_PI + log_gamma(k - 1) - (k - 1) * math.log(j)
    if model.builtin == "fubini_study":
        return LOG_PI + log_gamma(j + 1) + log_gamma(k - j + 1) - log_gamma(k + 2)
    raise ValueError(f"no closed form for model {model.name!r}")


def has_closed_form(model: RadialPolarizedModel) -> bool:
    return model.builtin in ("cylinder", "punctured_disc", "fubini_study")


# -- quadrature path ---------------------------------------------------------


def _log_weight(model: RadialPolarizedModel, k: int, j: int):
    def g(u):
        u = np.asarray(u, dtype=float)
        return model.log_F2(u) + j * u - k * np.asarray(model.F(u), dtype=float)

    return g


def _locate_peak(model: RadialPolarizedModel, g) -> float:
    """Maximiser of ``g`` on the domain (or a point next to a finite endpoint)."""
    lo, hi = model.window
    for _ in range(60):
        grid = np.linspace(lo, hi, 65)
        values = np.asarray(g(grid), dtype=float)
        values = np.where(np.isfinite(values), values, -np.inf)
        i = int(np.argmax(values))
        if 0 < i < 64:
            res = minimize_scalar(
                lambda x: -float(g(x)),
                bounds=(grid[i - 1], grid[i + 1]),
                method="bounded",
                options={"xatol": 1e-10 * max(1.0, abs(grid[i]))},
            )
            return float(res.x) if -res.fun >= values[i] else float(grid[i])
        width = hi - lo
        if i == 0:
            if math.isinf(model.u_min):
                lo -= width
            elif lo - model.u_min < 1e-280:
                return float(lo)
            else:
                lo = model.u_min + (lo - model.u_min) / 16.0
        else:
            if math.isinf(model.u_max):
                hi += width
            elif model.u_max - hi < 1e-280:
                return float(hi)
            else:
                hi = model.u_max - (model.u_max - hi) / 16.0
    edge = lo if i == 0 else hi
    if (i == 0 and math.isinf(model.u_min)) or (i == 64 and math.isinf(model.u_max)):
        raise DivergentSuspected("weight grows without bound towards an infinite end")
    return float(edge)


def _pieces(model: RadialPolarizedModel, center: float, spec: QuadratureSpec):
    """Split the domain at ``center`` into pieces with matching transforms."""
    out = []
    for a, b in ((model.u_min, center), (center, model.u_max)):
        if a == b:
            continue
        if math.isinf(a):
            transform = "exp_map_left"
        elif math.isinf(b):
            transform = "exp_map_right"
        else:
            transform = "tanh_sinh"
        out.append(((a, b), QuadratureSpec(
            relative_tolerance=spec.relative_tolerance,
            absolute_floor=spec.absolute_floor,
            max_subdivisions=spec.max_subdivisions,
            transform=transform,
        )))
    return out


def quadrature_log_norm(
    model: RadialPolarizedModel, k: int, j: int, spec: QuadratureSpec | None = None
) -> float:
    """``log N_{k,j}`` by quadrature of the radial integral.

    The weight is shifted by its maximum before exponentiation and the domain
    is split at that maximum; ``spec`` supplies the tolerances, the transform
    of each piece follows from its endpoints.
    """
    spec = spec or NORM_SPEC
    g = _log_weight(model, k, j)
    center = _locate_peak(model, g)
    shift = float(g(center))
    if not math.isfinite(shift):
        raise DivergentSuspected(f"weight is unbounded for j={j}, k={k}")

    def integrand(u):
        return np.exp(g(u) - shift)

    total = 0.0
    for interval, piece_spec in _pieces(model, center, spec):
        total += integrate(integrand, interval, piece_spec)
    if not total > 0:
        raise NumericalError(f"non-positive norm integral for j={j}, k={k}")
    return LOG_PI + shift + math.log(total)


def norm_is_finite(
    model: RadialPolarizedModel, k: int, j: int, steps: int = 6
) -> bool:
    """Numerical divergence guard for ``N_{k,j}``.

    The domain is truncated towards each end in ``steps`` stages (distance to
    a finite end shrinks 100-fold per stage, an infinite cut moves out
    geometrically).  The norm is declared infinite when the increments fail
    to shrink by a factor of 10 on three successive stages.
    """
    g = _log_weight(model, k, j)
    try:
        center = _locate_peak(model, g)
    except DivergentSuspected:
        return False
    shift = float(g(center))
    if not math.isfinite(shift):
        return False

    def integrand(u):
        return np.exp(g(u) - shift)

    spec = QuadratureSpec(relative_tolerance=1e-10, max_subdivisions=10)
    scale = max(1.0, model.window[1] - model.window[0])
    for end, direction in ((model.u_min, -1.0), (model.u_max, 1.0)):
        cuts = [center]
        for m in range(1, steps + 1):
            if math.isinf(end):
                cuts.append(center + direction * scale * 4.0 * 2.0**m)
            else:
                cuts.append(end - (end - center) * 10.0 ** (-2 * m))
        increments = []
        try:
            for a, b in zip(cuts, cuts[1:]):
                increments.append(abs(integrate(integrand, (a, b), spec)))
        except DivergentSuspected:
            return False
        except NumericalError:
            pass
        total = sum(increments)
        stalls = 0
        for prev, cur in zip(increments, increments[1:]):
            stalled = cur > 1e-15 * total and cur > prev / 10.0
            stalls = stalls + 1 if stalled else 0
            if stalls >= 3:
                return False
    return True


def allowed_indices(model: RadialPolarizedModel, k: int, probe: int = PROBE_RADIUS) -> IndexSet:
    """Indices ``j`` whose monomials ``z^j`` have a finite norm at level ``k``.

    Built-ins use the analytic rules.  Other models start from their declared
    lattice and are narrowed by :func:`norm_is_finite` within ``+-probe`` of
    a seed index; a bound reached by the probe is treated as unbounded.
    """
    if k < 1 or int(k) != k:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if model.builtin == "cylinder":
        return IndexSet(None, None)
    if model.builtin == "punctured_disc":
        return IndexSet(1, None) if k >= 2 else IndexSet.nothing()
    if model.builtin == "fubini_study":
        return IndexSet(0, k)

    lo, hi = model.lattice.bounds(k)
    if probe <= 0:
        return IndexSet(lo, hi)
    mid = 0.5 * (model.window[0] + model.window[1])
    seed = int(round(k * float(model.F1(mid))))
    floor_ = seed - probe if lo is None else max(lo, seed - probe)
    ceil_ = seed + probe if hi is None else min(hi, seed + probe)
    if floor_ > ceil_:
        floor_, ceil_ = (lo, lo + 2 * probe) if lo is not None else (hi - 2 * probe, hi)
    seed = min(max(seed, floor_), ceil_)
    finite = {}

    def ok(j):
        if j not in finite:
            finite[j] = norm_is_finite(model, k, j)
        return finite[j]

    if not ok(seed):
        candidates = [j for j in range(floor_, ceil_ + 1) if ok(j)]
        if not candidates:
            return IndexSet.nothing()
        seed = candidates[0]
    a = seed
    while a - 1 >= floor_ and ok(a - 1):
        a -= 1
    b = seed
    while b + 1 <= ceil_ and ok(b + 1):
        b += 1
    return IndexSet(
        None if (lo is None and a == floor_) else a,
        None if (hi is None and b == ceil_) else b,
    )


def monomial_log_norm(
    model: RadialPolarizedModel,
    k: int,
    j: int,
    spec: QuadratureSpec | None = None,
    method: str = "quadrature",
    allowed: IndexSet | None = None,
) -> float:
    """``log <z^j, z^j>_k``.

    ``method`` is ``"quadrature"``, ``"closed_form"`` (built-ins only) or
    ``"auto"`` (closed form when available).
    """
    allowed = allowed if allowed is not None else allowed_indices(model, k)
    if j not in allowed:
        raise IndexNotAllowed(
            f"z^{j} is not in the section space of {model.name} at k={k} "
            f"(allowed {allowed.describe()})"
        )
    if method == "auto":
        method = "closed_form" if has_closed_form(model) else "quadrature"
    if method == "closed_form":
        return closed_form_log_norm(model, k, j)
    if method == "quadrature":
        return quadrature_log_norm(model, k, j, spec)
    raise ValueError(f"unknown norm method {method!r}")


def gram_offdiagonal(
    model: RadialPolarizedModel,
    k: int,
    j: int,
    l: int,
    numeric: bool = False,
    points: int = 64,
    spec: QuadratureSpec | None = None,
) -> float:
    """``<z^j, z^l>_k`` for ``j != l``.

    The angular factor integrates ``exp(i (j-l) theta)`` over a full period and
    vanishes, so the exact answer is 0.  With ``numeric=True`` the radial
    factor is computed by quadrature and the angular factor by a ``points``
    point trapezoidal rule; the modulus of the product is returned.
    """
    allowed = allowed_indices(model, k)
    for idx in (j, l):
        if idx not in allowed:
            raise IndexNotAllowed(f"z^{idx} is not in the section space at k={k}")
    if j == l:
        raise ValueError("gram_offdiagonal needs j != l")
    if not numeric:
        return 0.0
    # Radial factor: (1/2) * integral F'' exp((j+l)u/2 - kF) du, in log form.
    half = 0.5 * (j + l)
    g = lambda u: model.log_F2(u) + half * np.asarray(u, dtype=float) - k * np.asarray(model.F(u), dtype=float)  # noqa: E731
    center = _locate_peak(model, g)
    shift = float(g(center))
    radial = 0.0
    for interval, piece_spec in _pieces(model, center, spec or NORM_SPEC):
        radial += integrate(lambda u: np.exp(g(u) - shift), interval, piece_spec)
    theta = 2.0 * math.pi * np.arange(points) / points
    angular = complex(np.sum(np.exp(1j * (j - l) * theta))) * (2.0 * math.pi / points)
    log_radial = math.log(0.5 * radial) + shift
    return abs(angular) * math.exp(log_radial)


@dataclass(frozen=True)
class MonomialNormTable:
    model_name: str
    k: int
    entries: dict = field(default_factory=dict)
    method: str = "quadrature"
    tolerance: float = 0.0
    allowed: IndexSet = field(default_factory=IndexSet)

    def __post_init__(self):
        for j, value in self.entries.items():
            if not math.isfinite(value):
                raise ValueError(f"log norm for j={j} is not finite")

    def log_norm(self, j: int) -> float:
        return self.entries[j]

    def rows(self):
        for j in sorted(self.entries):
            yield {
                "model": self.model_name,
                "k": self.k,
                "j": j,
                "log_norm": self.entries[j],
                "method": self.method,
                "tolerance": self.tolerance,
            }


def norm_table(
    model: RadialPolarizedModel,
    k: int,
    indices: Iterable[int],
    method: str = "quadrature",
    spec: QuadratureSpec | None = None,
    workers: int = 1,
) -> MonomialNormTable:
    """Tabulate ``log N_{k,j}`` over ``indices``; work is merged in index order."""
    spec = spec or NORM_SPEC
    allowed = allowed_indices(model, k)
    js = sorted(set(int(j) for j in indices))
    for j in js:
        if j not in allowed:
            raise IndexNotAllowed(f"z^{j} is not in the section space of {model.name} at k={k}")
    if method == "auto":
        method = "closed_form" if has_closed_form(model) else "quadrature"

    def one(j):
        return monomial_log_norm(model, k, j, spec, method=method, allowed=allowed)

    if workers > 1 and len(js) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, js))
    else:
        values = [one(j) for j in js]
    return MonomialNormTable(
        model_name=model.name,
        k=k,
        entries=dict(zip(js, values)),
        method=method,
        tolerance=spec.relative_tolerance if method == "quadrature" else 0.0,
        allowed=allowed,
    )


@dataclass(frozen=True)
class OrthonormalCoefficient:
    """``c = N^{-1/2}``; ``value`` is None when it does not fit in a double."""

    log_value: float
    value: Optional[float]


def orthonormal_coefficients(table: MonomialNormTable, indices: Iterable[int]) -> dict:
    out = {}
    for j in indices:
        if j not in table.allowed:
            raise IndexNotAllowed(f"z^{j} is not in the section space at k={table.k}")
        if j not in table.entries:
            raise KeyError(f"j={j} is not tabulated")
        log_c = -0.5 * table.entries[j]
        value = math.exp(log_c) if -708.0 < log_c < 709.0 else None
        out[j] = OrthonormalCoefficient(log_c, value)
    return out


NORM_CSV_COLUMNS = ("model", "k", "j", "log_norm", "method", "tolerance")


def write_norm_csv(tables: Iterable[MonomialNormTable], stream) -> None:
    writer = csv.DictWriter(stream, fieldnames=NORM_CSV_COLUMNS)
    writer.writeheader()
    for table in tables:
        for row in table.rows():
            writer.writerow({key: _fmt(value) for key, value in row.items()})


def _fmt(value):
    return repr(float(value)) if isinstance(value, float) else value
