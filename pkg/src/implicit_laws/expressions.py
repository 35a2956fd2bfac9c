"""Named data for sources f(t, x), initial values u0(x) and exact solutions.

A name may carry one numeric argument after a colon, e.g. ``const:10`` or
``bingham:0.1``.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError


def _const_source(c):
    return lambda t, x: np.full_like(np.asarray(x, dtype=float), c)


def _bingham_profile(sigma):
    # u' = (|1/2 - x| - sigma)^+ sign(1/2 - x), u(0) = u(1) = 0
    def u(t, x):
        s = np.abs(np.asarray(x, dtype=float) - 0.5)
        return 0.5 * (0.5 - sigma) ** 2 - 0.5 * np.maximum(s - sigma, 0.0) ** 2
    return u


SOURCES = {
    "zero": lambda arg: (lambda t, x: np.zeros_like(np.asarray(x, dtype=float))),
    "one": lambda arg: _const_source(1.0),
    "const": lambda arg: _const_source(_need(arg, "const")),
    "sine-pi2": lambda arg: (lambda t, x: np.pi ** 2 * np.sin(np.pi * np.asarray(x, dtype=float))),
    "plap3": lambda arg: (lambda t, x: 4.0 * np.abs(1.0 - 2.0 * np.asarray(x, dtype=float))),
}

INITIAL = {
    "zero": lambda arg: (lambda x: np.zeros_like(np.asarray(x, dtype=float))),
    "sin-pi": lambda arg: (lambda x: (1.0 if arg is None else arg) * np.sin(np.pi * np.asarray(x, dtype=float))),
    "const": lambda arg: (lambda x: np.full_like(np.asarray(x, dtype=float), _need(arg, "const"))),
    "hat": lambda arg: (lambda x: 0.5 - np.abs(np.asarray(x, dtype=float) - 0.5)),
}

ORACLES = {
    "heat-sine": lambda arg: (lambda t, x: np.sin(np.pi * np.asarray(x, dtype=float)) * np.exp(-np.pi ** 2 * t)),
    "sine": lambda arg: (lambda t, x: np.sin(np.pi * np.asarray(x, dtype=float))),
    "plap3": lambda arg: (lambda t, x: np.asarray(x, dtype=float) * (1.0 - np.asarray(x, dtype=float))),
    "bingham": lambda arg: _bingham_profile(_need(arg, "bingham")),
}


def _need(arg, name):
    if arg is None:
        raise ConfigError(f"{name!r} needs a numeric argument, e.g. {name}:1")
    return arg


def _split(text: str):
    name, sep, arg = str(text).strip().lower().partition(":")
    if not sep:
        return name, None
    try:
        return name, float(arg)
    except ValueError:
        raise ConfigError(f"non-numeric argument in {text!r}") from None


def _lookup(table, text, what):
    name, arg = _split(text)
    if name not in table:
        raise ConfigError(f"unknown {what} {text!r}; known: {', '.join(sorted(table))}")
    return table[name](arg)


def source(text: str):
    return _lookup(SOURCES, text, "source")


def initial(text: str):
    return _lookup(INITIAL, text, "initial datum")


def oracle(text: str):
    if str(text).strip().lower() in ("", "none"):
        return None
    return _lookup(ORACLES, text, "oracle")
