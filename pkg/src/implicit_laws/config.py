"""Flat ``key = value`` run configuration with line-numbered errors."""
from __future__ import annotations

from pathlib import Path

from . import expressions
from .errors import ConfigError, ImplicitLawError
from .fem import SolveConfig, boundary_kind, build_mesh
from .models import ModelKind, make_builtin
from .selector import SchemeConfig, scheme_key

DEFAULTS = {
    "model": "linear",
    "p": None,
    "scheme": "stretch",
    "eps": 0.1,
    "n_elements": 64,
    "L": 1.0,
    "bc_left": "dirichlet",
    "bc_right": "dirichlet",
    "T": 0.1,
    "tau": 1e-3,
    "f": "zero",
    "u0": "zero",
    "oracle": "none",
    "newton_tol": 1e-10,
    "newton_max": 50,
}


def _float(value):
    return float(value)


def _int(value):
    v = float(value)
    if v != int(v):
        raise ValueError(f"expected an integer, got {value}")
    return int(v)


def _eps(value):
    v = float(value)
    if not 0 < v < 1:
        raise ValueError(f"eps must lie strictly inside (0, 1), got {v}")
    return v


def _positive(value):
    v = float(value)
    if not v > 0:
        raise ValueError(f"expected a positive number, got {v}")
    return v


def _model(value):
    return str(ModelKind.parse(value))


def _named(lookup):
    def check(value):
        lookup(value)
        return value.strip()
    return check


_COERCE = {
    "model": _model,
    "p": _float,
    "scheme": scheme_key,
    "eps": _eps,
    "n_elements": _int,
    "L": _positive,
    "bc_left": boundary_kind,
    "bc_right": boundary_kind,
    "T": _positive,
    "tau": _positive,
    "f": _named(expressions.source),
    "u0": _named(expressions.initial),
    "oracle": _named(expressions.oracle),
    "newton_tol": _positive,
    "newton_max": _int,
}


def parse_config_text(text: str) -> dict:
    values = dict(DEFAULTS)
    lines = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", number)
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}", number)
        try:
            values[key] = _COERCE[key](value)
        except (ValueError, ImplicitLawError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}", number) from None
        lines[key] = number
    _cross_check(values, lines)
    return values


def _cross_check(values, lines):
    if values["T"] < values["tau"]:
        raise ConfigError("T must be at least tau", lines.get("T", lines.get("tau")))
    try:
        resolve_model(values)
    except ImplicitLawError as exc:
        raise ConfigError(f"bad model: {exc}", lines.get("model", lines.get("p"))) from None


def parse_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {str(path)!r} not found")
    return parse_config_text(path.read_text())


def resolve_model(values):
    kind = ModelKind.parse(values["model"])
    if values.get("p") is not None:
        return make_builtin(kind, p=values["p"])
    return make_builtin(kind)


def build_solve_config(values: dict) -> SolveConfig:
    mesh = build_mesh(values["n_elements"], values["L"], values["bc_left"], values["bc_right"])
    return SolveConfig(
        mesh=mesh,
        model=resolve_model(values),
        scheme=SchemeConfig(values["scheme"], values["eps"]),
        T=values["T"],
        tau=values["tau"],
        f=expressions.source(values["f"]),
        u0=expressions.initial(values["u0"]),
        newton_tol=values["newton_tol"],
        newton_max=values["newton_max"],
        oracle=expressions.oracle(values["oracle"]),
    )
