"""Plain-text model definitions.

One ``key = value`` pair per line; ``#`` starts a comment.  Recognised keys::

    name        = my_model
    u_min       = -inf              # domain bounds, "inf"/"-inf" allowed
    u_max       = inf
    potential   = builtin | polynomial | table
    builtin     = cylinder          # potential = builtin
    coefficients = 0, 0, 0.5        # potential = polynomial: F(u) = sum c_i u^i
    table_u     = -2, -1, 0, 1, 2   # potential = table
    table_F     = 2, 0.5, 0, 0.5, 2
    spline      = true              # table: quintic (true) or cubic (false) spline
    lattice     = all_integers | integers_ge 1 | range_k
    window      = -3, 3             # optional sampling window

Table potentials are only defined on the tabulated range, so the domain is
clipped to it.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.interpolate import make_interp_spline

from .errors import ModelFileError
from .models import BUILTINS, IndexLattice, RadialPolarizedModel, builtin_model, default_window

_KNOWN_KEYS = {
    "name", "u_min", "u_max", "potential", "builtin", "coefficients",
    "table_u", "table_F", "spline", "lattice", "window",
}


def _float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ModelFileError(f"{key}: expected a number, got {text!r}") from None


def _floats(text: str, key: str) -> list[float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise ModelFileError(f"{key}: expected a list of numbers")
    return [_float(p, key) for p in parts]


def _lattice(text: str) -> IndexLattice:
    parts = text.split()
    if parts == ["all_integers"]:
        return IndexLattice("all_integers")
    if parts == ["range_k"]:
        return IndexLattice("range_k")
    if len(parts) == 2 and parts[0] == "integers_ge":
        try:
            return IndexLattice("integers_ge", int(parts[1]))
        except ValueError:
            pass
    raise ModelFileError(f"lattice: cannot parse {text!r}")


def parse_model_text(text: str) -> RadialPolarizedModel:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ModelFileError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ModelFileError(f"line {lineno}: unknown key {key!r}")
        if key in entries:
            raise ModelFileError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value

    kind = entries.get("potential")
    if kind is None:
        raise ModelFileError("missing key 'potential'")

    if kind == "builtin":
        which = entries.get("builtin")
        if which not in BUILTINS:
            raise ModelFileError(f"builtin: expected one of {sorted(BUILTINS)}, got {which!r}")
        return builtin_model(which)

    name = entries.get("name")
    if not name:
        raise ModelFileError("missing key 'name'")
    lattice = _lattice(entries["lattice"]) if "lattice" in entries else IndexLattice()
    lo = _float(entries.get("u_min", "-inf"), "u_min")
    hi = _float(entries.get("u_max", "inf"), "u_max")

    if kind == "polynomial":
        if "coefficients" not in entries:
            raise ModelFileError("polynomial potential needs 'coefficients'")
        poly = np.polynomial.Polynomial(_floats(entries["coefficients"], "coefficients"))
        d1, d2 = poly.deriv(1), poly.deriv(2)
        d3, d4 = poly.deriv(3), poly.deriv(4)
        funcs = dict(F=poly, F1=d1, F2=d2)
        log_d1 = lambda u: d3(u) / d2(u)  # noqa: E731
        log_d2 = lambda u: d4(u) / d2(u) - (d3(u) / d2(u)) ** 2  # noqa: E731
    elif kind == "table":
        if "table_u" not in entries or "table_F" not in entries:
            raise ModelFileError("table potential needs 'table_u' and 'table_F'")
        us = np.array(_floats(entries["table_u"], "table_u"))
        fs = np.array(_floats(entries["table_F"], "table_F"))
        if us.shape != fs.shape:
            raise ModelFileError("table_u and table_F differ in length")
        if np.any(np.diff(us) <= 0):
            raise ModelFileError("table_u must be strictly increasing")
        smooth = entries.get("spline", "true").lower()
        if smooth not in ("true", "false"):
            raise ModelFileError("spline: expected true or false")
        degree = 5 if smooth == "true" else 3
        if us.size <= degree:
            raise ModelFileError(f"a degree-{degree} spline needs more than {degree} points")
        spline = make_interp_spline(us, fs, k=degree)
        funcs = dict(F=spline, F1=spline.derivative(1), F2=spline.derivative(2))
        log_d1 = log_d2 = None
        lo, hi = max(lo, float(us[0])), min(hi, float(us[-1]))
    else:
        raise ModelFileError(f"potential: expected builtin, polynomial or table, got {kind!r}")

    if not lo < hi:
        raise ModelFileError(f"empty domain ({lo}, {hi})")
    window = tuple(_floats(entries["window"], "window")) if "window" in entries else default_window(lo, hi)
    if len(window) != 2:
        raise ModelFileError("window: expected two numbers")
    try:
        return RadialPolarizedModel(
            name=name,
            u_min=lo,
            u_max=hi,
            lattice=lattice,
            window=window,
            log_F2_d1=log_d1,
            log_F2_d2=log_d2,
            **{key: _wrap(fn) for key, fn in funcs.items()},
        )
    except ValueError as exc:
        raise ModelFileError(str(exc)) from None


def _wrap(fn):
    def call(u):
        out = fn(u)
        return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)

    return call


def load_model_file(path) -> RadialPolarizedModel:
    return parse_model_text(Path(path).read_text(encoding="utf-8"))


def format_bound(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))
