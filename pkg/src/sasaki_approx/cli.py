"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 failed
verification.  Floats are written with ``repr`` (shortest round-trip form),
CSV follows RFC 4180 with a header row, JSON keeps a fixed key order.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bergman import convergence_report, epsilon_function, LogNorms
from .errors import (
    DomainError,
    EmptySectionSpace,
    IndexNotAllowed,
    ModelFileError,
    NonPositiveFactor,
    SasakiError,
    WrongModel,
)
from .modelfile import format_bound, load_model_file
from .models import BUILTINS, builtin_model, contact_check, transverse_curvature, transverse_form_density
from .numerics import QuadratureSpec
from .sasaki import (
    SasakianStructureParams,
    d_homothety,
    eta_einstein_constants,
    structure_to_dict,
)
from .sections import allowed_indices, closed_form_log_norm, has_closed_form, norm_table
from .verification import run_all

COMMANDS = ("models", "norms", "epsilon", "curvature", "homothety", "converge", "verify")
# Options whose values may start with '-' (negative numbers in ranges and grids).
_VALUE_OPTIONS = ("--grid", "--j", "--k", "--a")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: Optional[str] = None
    model_file: Optional[str] = None
    k: tuple = ()
    j_range: Optional[tuple] = None
    grid: Optional[tuple] = None
    tolerance: float = 1e-15
    quadrature_tolerance: float = 1e-13
    a: float = 1.0
    method: str = "auto"
    check_closed_form: bool = False
    output: Optional[str] = None
    output_format: str = "csv"
    worker_count: int = 1
    dump_config: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.grid is not None and self.grid[2] < 2:
            raise UsageError("grid count must be at least 2")
        if not (self.tolerance > 0 and self.quadrature_tolerance > 0):
            raise UsageError("tolerances must be positive")
        if self.worker_count < 1:
            raise UsageError("--workers must be at least 1")
        if any(k < 1 for k in self.k):
            raise UsageError("k values must be positive integers")
        if self.output_format not in ("csv", "json"):
            raise UsageError("--format must be csv or json")

    def record(self) -> dict:
        """Reproducibility record; excludes settings that cannot change results."""
        data = asdict(self)
        for key in ("output", "worker_count", "dump_config"):
            data.pop(key)
        return {key: list(v) if isinstance(v, tuple) else v for key, v in data.items()}

    def grid_points(self) -> list[float]:
        if self.grid is None:
            raise UsageError(f"{self.command} needs --grid lo:hi:count")
        lo, hi, count = self.grid
        return [float(x) for x in np.linspace(lo, hi, count)]


def parse_grid(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must be lo:hi:count, got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"grid must be lo:hi:count, got {text!r}") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise UsageError(f"grid bounds must be finite with lo <= hi, got {text!r}")
    return lo, hi, count


def parse_range(text: str) -> tuple:
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise UsageError(f"index range must be A..B, got {text!r}") from None
    if hi < lo:
        raise UsageError(f"empty index range {text!r}")
    return lo, hi


def parse_k(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"k must be an integer or a comma separated list, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="sasaki-approx",
        description="Bergman densities, monomial norms and Sasakian structures of radial models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, default_format="csv"):
        p.add_argument("--model", help=f"built-in model ({', '.join(BUILTINS)})")
        p.add_argument("--model-file", help="model definition file")
        p.add_argument("--tol", type=float, default=1e-15, help="series truncation tolerance")
        p.add_argument("--quad-tol", type=float, default=1e-13, help="quadrature relative tolerance")
        p.add_argument("-o", "--output", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=default_format)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--dump-config", action="store_true", help="embed the run configuration in JSON output")

    p = sub.add_parser("models", help="describe models")
    common(p)
    p = sub.add_parser("norms", help="tabulate log monomial norms")
    common(p)
    p.add_argument("--k", required=True)
    p.add_argument("--j", required=True, help="index range A..B (clipped to the allowed set)")
    p.add_argument("--method", choices=("auto", "quadrature", "closed_form"), default="quadrature")
    p.add_argument("--check-closed-form", action="store_true")
    p = sub.add_parser("epsilon", help="evaluate the Bergman density on a grid")
    common(p)
    p.add_argument("--k", required=True)
    p.add_argument("--grid", required=True, help="lo:hi:count, inclusive")
    p.add_argument("--method", choices=("sum", "closed_form"), default="sum")
    p = sub.add_parser("curvature", help="transverse density and curvature on a grid")
    common(p)
    p.add_argument("--grid", required=True)
    p.add_argument("--method", choices=("auto", "analytic", "fd"), default="fd")
    p = sub.add_parser("homothety", help="apply a D-homothety and report the structure")
    common(p, default_format="json")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--grid", required=True)
    p = sub.add_parser("converge", help="convergence report over a list of k")
    common(p, default_format="json")
    p.add_argument("--k", required=True)
    p.add_argument("--grid", required=True)
    p = sub.add_parser("verify", help="run the closed-form cross-check suite")
    common(p, default_format="json")
    return parser


def _join_value_options(argv: Sequence[str]) -> list[str]:
    out, it = [], iter(argv)
    for arg in it:
        if arg in _VALUE_OPTIONS:
            value = next(it, None)
            out.append(arg if value is None else f"{arg}={value}")
        else:
            out.append(arg)
    return out


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=ns.command,
        model=ns.model,
        model_file=ns.model_file,
        k=parse_k(ns.k) if getattr(ns, "k", None) else (),
        j_range=parse_range(ns.j) if getattr(ns, "j", None) else None,
        grid=parse_grid(ns.grid) if getattr(ns, "grid", None) else None,
        tolerance=ns.tol,
        quadrature_tolerance=ns.quad_tol,
        a=getattr(ns, "a", 1.0),
        method=getattr(ns, "method", "auto"),
        check_closed_form=getattr(ns, "check_closed_form", False),
        output=ns.output,
        output_format=ns.format,
        worker_count=ns.workers,
        dump_config=ns.dump_config,
    )


def _load_model(config: RunConfig, required: bool = True):
    if config.model and config.model_file:
        raise UsageError("give either --model or --model-file, not both")
    if config.model_file:
        return load_model_file(config.model_file)
    if config.model:
        try:
            return builtin_model(config.model)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if required:
        raise UsageError(f"{config.command} needs --model or --model-file")
    return None


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if value is None:
        return ""
    return str(value)


def render_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _fmt(v) for key, v in row.items()})
    return buf.getvalue()


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return format_bound(value) if math.isinf(value) else "nan"
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.floating):
        return _jsonable(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def render_json(payload: dict, config: RunConfig) -> str:
    if config.dump_config:
        payload = {**payload, "config": config.record()}
    return json.dumps(_jsonable(payload), indent=2, allow_nan=False) + "\n"


# -- commands ------------------------------------------------------------------


def cmd_models(config: RunConfig):
    chosen = _load_model(config, required=False)
    models = [chosen] if chosen is not None else [build() for build in BUILTINS.values()]
    rows = []
    for model in models:
        mid = 0.5 * (model.window[0] + model.window[1])
        rows.append({
            "name": model.name,
            "u_min": model.u_min,
            "u_max": model.u_max,
            "lattice": model.lattice.describe(),
            "window_lo": model.window[0],
            "window_hi": model.window[1],
            "curvature_mid": transverse_curvature(model, mid),
            "contact": bool(contact_check(model, model.grid(100))),
        })
    return rows, {"models": rows}


def cmd_norms(config: RunConfig):
    model = _load_model(config)
    if not config.k or config.j_range is None:
        raise UsageError("norms needs --k and --j")
    spec = QuadratureSpec(relative_tolerance=config.quadrature_tolerance)
    if config.check_closed_form and not has_closed_form(model):
        raise UsageError(f"model {model.name} has no closed-form norms")
    rows = []
    for k in config.k:
        table = norm_table(
            model, k, _clip(model, k, config.j_range), method=config.method,
            spec=spec, workers=config.worker_count,
        )
        for row in table.rows():
            if config.check_closed_form:
                exact = closed_form_log_norm(model, k, row["j"])
                row["closed_form_log_norm"] = exact
                row["relative_error"] = abs(math.expm1(row["log_norm"] - exact))
            rows.append(row)
    payload = {"model": model.name, "rows": rows}
    if config.check_closed_form:
        payload["max_relative_error"] = max((r["relative_error"] for r in rows), default=0.0)
    return rows, payload


def _clip(model, k, j_range):
    allowed = allowed_indices(model, k)
    if allowed.is_empty():
        raise EmptySectionSpace(f"{model.name} has no L^2 sections at k={k}")
    return allowed.clip(*j_range)


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def cmd_epsilon(config: RunConfig):
    model = _load_model(config)
    if not config.k:
        raise UsageError("epsilon needs --k")
    grid = config.grid_points()
    method = config.method if config.method in ("sum", "closed_form") else "sum"
    rows = []
    for k in config.k:
        norms = LogNorms(model, k)
        if norms.allowed.is_empty():
            raise EmptySectionSpace(f"{model.name} has no L^2 sections at k={k}")
        epsilon_function(model, k, grid[0], config.tolerance, method=method, norms=norms)
        points = _map(
            lambda u: epsilon_function(model, k, u, config.tolerance, method=method, norms=norms),
            grid,
            config.worker_count,
        )
        for u, p in zip(grid, points):
            rows.append({
                "model": model.name,
                "k": k,
                "u": u,
                "epsilon": p.value,
                "log_epsilon": p.log_value,
                "window_lo": p.window[0] if p.window else None,
                "window_hi": p.window[1] if p.window else None,
                "tail_bound": p.tail_bound,
            })
    return rows, {"model": model.name, "method": method, "rows": rows}


def cmd_curvature(config: RunConfig):
    model = _load_model(config)
    grid = config.grid_points()
    method = config.method if config.method in ("auto", "analytic", "fd") else "fd"
    rows = [
        {
            "model": model.name,
            "u": u,
            "transverse_density": transverse_form_density(model, u),
            "curvature": transverse_curvature(model, u, method=method),
        }
        for u in grid
    ]
    payload = {"model": model.name, "method": method, "rows": rows}
    try:
        c = eta_einstein_constants(SasakianStructureParams(model), grid=grid, curvature_method=method)
        payload["eta_einstein"] = {"lambda": c.lam, "nu": c.nu}
    except SasakiError as exc:
        payload["eta_einstein"] = {"error": str(exc)}
    return rows, payload


def cmd_homothety(config: RunConfig):
    model = _load_model(config)
    grid = config.grid_points()
    base = SasakianStructureParams(model)
    moved = d_homothety(base, config.a, verify_grid=grid)
    payload = {
        "model": model.name,
        "factor": config.a,
        "structure": structure_to_dict(moved, grid),
    }
    try:
        payload["eta_einstein"] = {
            "before": _constants(eta_einstein_constants(base, grid=grid)),
            "after": _constants(eta_einstein_constants(moved, grid=grid)),
        }
    except SasakiError as exc:
        payload["eta_einstein"] = {"error": str(exc)}
    rows = [
        {"model": model.name, "a": moved.a, "u": u, "A": A, "transverse_density": d}
        for u, A, d in zip(grid, payload["structure"]["A"], payload["structure"]["transverse_density"])
    ]
    return rows, payload


def _constants(c):
    return {"lambda": c.lam, "nu": c.nu}


def cmd_converge(config: RunConfig):
    model = _load_model(config)
    if not config.k:
        raise UsageError("converge needs --k")
    report = convergence_report(
        model, config.k, config.grid_points(), config.tolerance, workers=config.worker_count
    )
    return list(report.rows()), report.to_dict()


def cmd_verify(config: RunConfig):
    checks = run_all(config.worker_count)
    rows = [c.row() for c in checks]
    payload = {"passed": all(c.passed for c in checks), "checks": rows}
    return rows, payload


HANDLERS = {
    "models": cmd_models,
    "norms": cmd_norms,
    "epsilon": cmd_epsilon,
    "curvature": cmd_curvature,
    "homothety": cmd_homothety,
    "converge": cmd_converge,
    "verify": cmd_verify,
}


def _print_table(rows, stream):
    width = max(len(r["check"]) for r in rows)
    for r in rows:
        status = "PASS" if r["passed"] else "FAIL"
        stream.write(f"{status}  {r['check']:<{width}}  {r['value']:.3e}  (tol {r['tolerance']:.1e})\n")


def run(config: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    rows, payload = HANDLERS[config.command](config)
    text = render_json(payload, config) if config.output_format == "json" else render_csv(rows)
    if config.command == "verify":
        _print_table(rows, stdout)
    if config.output:
        with open(config.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    elif config.command != "verify":
        stdout.write(text)
    if config.command == "verify" and not payload["passed"]:
        return EXIT_VERIFY
    return EXIT_OK


_USAGE_ERRORS = (UsageError, ModelFileError, DomainError, IndexNotAllowed, WrongModel, NonPositiveFactor)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    ns = parser.parse_args(_join_value_options(argv))
    try:
        config = config_from_args(ns)
        return run(config)
    except _USAGE_ERRORS as exc:
        sys.stderr.write(f"sasaki-approx: error: {exc}\n")
        return EXIT_USAGE
    except (SasakiError, ArithmeticError) as exc:
        sys.stderr.write(f"sasaki-approx: numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except OSError as exc:
        sys.stderr.write(f"sasaki-approx: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
