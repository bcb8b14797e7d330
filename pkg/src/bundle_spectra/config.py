"""JSON run configuration.

A config file holds either a single case at top level or a ``cases`` array.
Angles may be given as numbers or as simple expressions in ``pi`` such as
``"pi/4"`` or ``"-3*pi/4"``.
"""

from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass, field

from .lattice import BundleSpec, LineComponent, TorusSpec

__all__ = ["ConfigError", "SolverConfig", "CaseConfig", "RunConfig", "load_config", "parse_config", "CHECK_IDS"]

CHECK_IDS = ("eigenpair", "moser", "holonomy", "near_orthonormal", "frame")
FORMATS = ("csv", "json")

_ANGLE = re.compile(r"^[\s0-9.eE+\-*/()pi]+$")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _number(value, where: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(where, f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str) and _ANGLE.match(value) and "**" not in value:
        try:
            return float(eval(value, {"__builtins__": {}}, {"pi": math.pi}))  # noqa: S307 - charset checked above
        except Exception as exc:  # SyntaxError, ZeroDivisionError, ...
            raise ConfigError(where, f"cannot evaluate {value!r}") from exc
    raise ConfigError(where, f"expected a number, got {value!r}")


def _matrix(value, where: str):
    if value is None:
        return None
    if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
        raise ConfigError(where, "expected a list of lists")
    return [[_number(v, f"{where}[{i}][{j}]") for j, v in enumerate(row)] for i, row in enumerate(value)]


@dataclass(frozen=True)
class SolverConfig:
    num_pairs: int = 2
    tol: float = 1e-8
    max_iter: int | None = None
    seed: int = 0


@dataclass
class CaseConfig:
    case_id: str
    torus: TorusSpec
    bundle: BundleSpec
    overrides: dict = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=SolverConfig)
    checks: tuple = ()
    moser_j_max: int = 6
    beta_search_radius: int = 8
    refinements: tuple = ()
    raw: dict = field(default_factory=dict, repr=False)


@dataclass
class RunConfig:
    cases: list
    output_format: str = "csv"
    output_path: str | None = None


def _parse_bundle(spec, n: int, where: str) -> BundleSpec:
    if not isinstance(spec, dict):
        raise ConfigError(where, "expected an object")
    kind = spec.get("kind", "flat")
    try:
        if kind == "flat":
            theta = _matrix(spec.get("theta", [[0.0] * n]), f"{where}.theta")
            return BundleSpec.flat(theta)
        if kind == "magnetic":
            flux = _matrix(spec.get("flux"), f"{where}.flux")
            if flux is None:
                raise ConfigError(f"{where}.flux", "magnetic bundle needs a flux matrix")
            theta = spec.get("theta")
            theta = None if theta is None else [_number(t, f"{where}.theta") for t in theta]
            if spec.get("rank", 1) != 1:
                raise ConfigError(f"{where}.rank", "magnetic bundles must have rank 1")
            return BundleSpec.magnetic(flux, theta)
        if kind == "sum":
            comps = spec.get("components")
            if not isinstance(comps, list) or not comps:
                raise ConfigError(f"{where}.components", "expected a nonempty list")
            lines = []
            for c, comp in enumerate(comps):
                w = f"{where}.components[{c}]"
                theta = [_number(t, f"{w}.theta") for t in comp.get("theta", [0.0] * n)]
                lines.append(LineComponent(tuple(theta), flux=_matrix(comp.get("flux"), f"{w}.flux"),
                                           modulation=_matrix(comp.get("modulation"), f"{w}.modulation")))
            return BundleSpec(tuple(lines))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(where, str(exc)) from exc
    raise ConfigError(f"{where}.kind", f"unknown bundle kind {kind!r} (flat, magnetic, sum)")


def _int(value, where, minimum):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(where, f"expected an integer >= {minimum}, got {value!r}")
    return value


def _parse_case(raw: dict, index: int) -> CaseConfig:
    where = f"cases[{index}]"
    if not isinstance(raw, dict):
        raise ConfigError(where, "expected an object")
    case_id = str(raw.get("case_id", f"case{index}"))

    torus_raw = raw.get("torus")
    if not isinstance(torus_raw, dict):
        raise ConfigError(f"{where}.torus", "missing torus object")
    lengths = [_number(v, f"{where}.torus.lengths[{j}]") for j, v in enumerate(torus_raw.get("lengths", []))]
    grid = torus_raw.get("grid", [])
    if len(lengths) != len(grid):
        raise ConfigError(f"{where}.torus", "lengths and grid differ in length")
    if len(grid) < 3:
        raise ConfigError(f"{where}.torus.grid", "dimension must be >= 3")
    for j, N in enumerate(grid):
        _int(N, f"{where}.torus.grid[{j}]", 4)
    for j, L in enumerate(lengths):
        if not L > 0:
            raise ConfigError(f"{where}.torus.lengths[{j}]", f"must be positive, got {L}")
    torus = TorusSpec(tuple(lengths), tuple(grid))
    bundle = _parse_bundle(raw.get("bundle", {"kind": "flat"}), torus.n, f"{where}.bundle")
    if bundle.n != torus.n:
        raise ConfigError(f"{where}.bundle", f"bundle dimension {bundle.n} != torus dimension {torus.n}")

    overrides = {}
    for key, value in (raw.get("overrides") or {}).items():
        if key not in ("K", "r", "d"):
            raise ConfigError(f"{where}.overrides.{key}", "only K, r, d can be overridden")
        if value is not None:
            overrides[key] = _number(value, f"{where}.overrides.{key}")

    s = raw.get("solver") or {}
    solver = SolverConfig(
        num_pairs=_int(s.get("num_pairs", 2), f"{where}.solver.num_pairs", 1),
        tol=_number(s.get("tol", 1e-8), f"{where}.solver.tol"),
        max_iter=None if s.get("max_iter") is None else _int(s["max_iter"], f"{where}.solver.max_iter", 1),
        seed=_int(s.get("seed", 0), f"{where}.solver.seed", 0),
    )
    if not solver.tol > 0:
        raise ConfigError(f"{where}.solver.tol", "must be positive")

    default_checks = ["eigenpair", "moser", "near_orthonormal"] + (["holonomy"] if bundle.kind == "flat" else [])
    checks = raw.get("checks", default_checks)
    for c in checks:
        if c not in CHECK_IDS:
            raise ConfigError(f"{where}.checks", f"unknown check id {c!r}; known: {', '.join(CHECK_IDS)}")
    if "holonomy" in checks and bundle.kind != "flat":
        raise ConfigError(f"{where}.checks", "holonomy check needs a flat bundle")
    if "frame" in checks and solver.num_pairs < bundle.rank:
        raise ConfigError(f"{where}.solver.num_pairs", "frame check needs num_pairs >= bundle rank")

    refinements = raw.get("refinements", [])
    for i, f in enumerate(refinements):
        _int(f, f"{where}.refinements[{i}]", 1)

    return CaseConfig(
        case_id=case_id,
        torus=torus,
        bundle=bundle,
        overrides=overrides,
        solver=solver,
        checks=tuple(checks),
        moser_j_max=_int(raw.get("moser_j_max", 6), f"{where}.moser_j_max", 1),
        beta_search_radius=_int(raw.get("beta_search_radius", 8), f"{where}.beta_search_radius", 1),
        refinements=tuple(refinements),
        raw=copy.deepcopy(raw),
    )


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a JSON object")
    raw_cases = data["cases"] if "cases" in data else [{k: v for k, v in data.items() if k != "output"}]
    if not isinstance(raw_cases, list) or not raw_cases:
        raise ConfigError("cases", "expected a nonempty list")
    cases = [_parse_case(c, i) for i, c in enumerate(raw_cases)]
    ids = [c.case_id for c in cases]
    if len(set(ids)) != len(ids):
        raise ConfigError("cases", "case_id values must be unique")
    out = data.get("output") or {}
    fmt = out.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError("output.format", f"expected csv or json, got {fmt!r}")
    return RunConfig(cases, fmt, out.get("path"))


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"{path} is not valid JSON: {exc}") from exc
    return parse_config(data)
