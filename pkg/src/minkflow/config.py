"""Strict JSON run-configuration parsing.

Unknown keys anywhere in the document are rejected (typo safety); every
section is validated for types before any numerical work starts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .flow import FlowConfig, build_initial_support
from .orlicz import DensitySpec, PhiSpec
from .sphere import SphereGrid, build_grid

__all__ = ["RunSetup", "load_config", "parse_config"]

_SECTION_KEYS = {
    "grid": {"dim", "resolution"},
    "phi": {"kind", "q", "a", "s", "phi", "domain", "base_point"},
    "density": {"kind", "value", "c0", "terms", "values", "even"},
    "initial": {"kind", "radius", "base", "terms", "values"},
    "flow": {
        "dt0", "dt_min", "dt_max", "safety", "tol_stop", "tol_theta",
        "theta_window", "max_steps", "case", "seed",
    },
    "output": {"directory", "emit_profiles_every"},
}

_TERM_KEYS_S1 = {"k", "cos", "sin"}
_TERM_KEYS_S2 = {"axis", "power", "coeff"}


@dataclass
class RunSetup:
    grid: SphereGrid
    phi: PhiSpec
    density: DensitySpec
    u0: np.ndarray
    flow: FlowConfig
    out_dir: Path
    emit_profiles_every: int
    raw: dict


def load_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return doc


def _check_keys(section: str, obj: dict) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"section {section!r} must be an object")
    unknown = set(obj) - _SECTION_KEYS[section]
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r} in section {section!r}")


def _number(section: str, obj: dict, key: str, default=None):
    if key not in obj:
        if default is not None:
            return default
        raise ConfigError(f"section {section!r} needs key {key!r}")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {v!r}")
    return float(v)


def _parse_grid(doc: dict) -> SphereGrid:
    g = doc.get("grid")
    if g is None:
        raise ConfigError("config needs a 'grid' section")
    _check_keys("grid", g)
    dim = g.get("dim")
    if dim not in (1, 2):
        raise ConfigError(f"grid.dim must be 1 or 2, got {dim!r}")
    res = g.get("resolution")
    if res is None:
        raise ConfigError("grid.resolution is required")
    try:
        if dim == 1:
            return build_grid(1, int(res))
        if not isinstance(res, (list, tuple)) or len(res) != 2:
            raise ConfigError("grid.resolution must be [latitudes, longitudes] for dim 2")
        return build_grid(2, (int(res[0]), int(res[1])))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_phi(doc: dict) -> PhiSpec:
    p = doc.get("phi")
    if p is None:
        raise ConfigError("config needs a 'phi' section")
    _check_keys("phi", p)
    kind = p.get("kind")
    domain = p.get("domain", [1e-3, 1e3])
    if not isinstance(domain, (list, tuple)) or len(domain) != 2:
        raise ConfigError("phi.domain must be [lo, hi]")
    base = p.get("base_point")
    try:
        if kind == "power":
            return PhiSpec.power(_number("phi", p, "q"), tuple(domain), base)
        if kind == "power_exp":
            return PhiSpec.power_exp(_number("phi", p, "q"), _number("phi", p, "a"), tuple(domain), base)
        if kind == "tabulated":
            return PhiSpec("tabulated", {"s": p.get("s"), "phi": p.get("phi")}, tuple(domain), base)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid phi section: {exc}") from exc
    raise ConfigError(f"phi.kind must be power | power_exp | tabulated, got {kind!r}")


def _check_terms(dim: int, terms) -> list:
    if not isinstance(terms, list):
        raise ConfigError("'terms' must be a list")
    allowed = _TERM_KEYS_S1 if dim == 1 else _TERM_KEYS_S2
    for t in terms:
        if not isinstance(t, dict):
            raise ConfigError("each harmonic term must be an object")
        unknown = set(t) - allowed
        if unknown:
            raise ConfigError(f"unknown key {sorted(unknown)[0]!r} in harmonic term")
    return terms


def _parse_density(doc: dict, grid: SphereGrid) -> DensitySpec:
    d = doc.get("density")
    if d is None:
        raise ConfigError("config needs a 'density' section")
    _check_keys("density", d)
    kind = d.get("kind")
    even = d.get("even", False)
    if not isinstance(even, bool):
        raise ConfigError("density.even must be a boolean")
    if kind == "constant":
        return DensitySpec("constant", {"value": _number("density", d, "value")}, even)
    if kind == "harmonic":
        terms = _check_terms(grid.dim, d.get("terms", []))
        return DensitySpec("harmonic", {"c0": _number("density", d, "c0", 1.0), "terms": terms}, even)
    if kind == "tabulated":
        return DensitySpec("tabulated", {"values": d.get("values")}, even)
    raise ConfigError(f"density.kind must be constant | harmonic | tabulated, got {kind!r}")


def _parse_initial(doc: dict, grid: SphereGrid) -> np.ndarray:
    b = doc.get("initial")
    if b is None:
        raise ConfigError("config needs an 'initial' section")
    _check_keys("initial", b)
    kind = b.get("kind")
    try:
        if kind == "sphere":
            return build_initial_support(grid, "sphere", {"radius": _number("initial", b, "radius")})
        if kind == "harmonic":
            terms = _check_terms(grid.dim, b.get("terms", []))
            return build_initial_support(
                grid, "harmonic", {"base": _number("initial", b, "base", 1.0), "terms": terms}
            )
        if kind == "tabulated":
            return build_initial_support(grid, "tabulated", {"values": b.get("values")})
    except ValueError as exc:
        raise ConfigError(f"invalid initial section: {exc}") from exc
    raise ConfigError(f"initial.kind must be sphere | harmonic | tabulated, got {kind!r}")


def parse_config(doc: dict, out_override: str | None = None) -> RunSetup:
    """Validate the whole document and assemble a ready-to-run setup."""
    unknown = set(doc) - set(_SECTION_KEYS)
    if unknown:
        raise ConfigError(f"unknown section {sorted(unknown)[0]!r}")

    grid = _parse_grid(doc)
    phi = _parse_phi(doc)
    density = _parse_density(doc, grid)
    u0 = _parse_initial(doc, grid)

    fl = doc.get("flow", {})
    _check_keys("flow", fl)
    case = fl.get("case", "ii")
    if case not in ("i", "ii"):
        raise ConfigError(f"flow.case must be 'i' or 'ii', got {case!r}")
    flow_cfg = FlowConfig(
        grid=grid,
        phi=phi,
        density=density,
        u0=u0,
        case=case,
        dt0=fl.get("dt0"),
        dt_min=fl.get("dt_min"),
        dt_max=_number("flow", fl, "dt_max", 1.0),
        safety=_number("flow", fl, "safety", 1.3),
        tol_stop=_number("flow", fl, "tol_stop", 1e-8),
        tol_theta=_number("flow", fl, "tol_theta", 1e-9),
        theta_window=int(_number("flow", fl, "theta_window", 50)),
        max_steps=int(_number("flow", fl, "max_steps", 200_000)),
        seed=int(_number("flow", fl, "seed", 0)),
    )

    out = doc.get("output", {})
    _check_keys("output", out)
    out_dir = Path(out_override) if out_override else Path(out.get("directory", "out"))
    emit = int(_number("output", out, "emit_profiles_every", 0))
    if emit < 0:
        raise ConfigError("output.emit_profiles_every must be >= 0")

    return RunSetup(
        grid=grid,
        phi=phi,
        density=density,
        u0=u0,
        flow=flow_cfg,
        out_dir=out_dir,
        emit_profiles_every=emit,
        raw=doc,
    )
