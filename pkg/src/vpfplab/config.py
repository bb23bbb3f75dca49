"""Flat ``key = value`` configuration files.

Blank lines and ``#`` comments are ignored. Lists are comma separated.
Initial data are truncated Fourier series on the unit-period torus::

    rho0_cos = 1.0, 0.2      # a_0 + a_1 cos(2 pi x) + ...
    rho0_sin = 0.0           # b_1 sin(2 pi x) + ...
    u0_cos = 0.0
    u0_sin = 0.1
"""
from __future__ import annotations

import configparser
import dataclasses
import typing

import numpy as np

from .core import SimConfig, SpatialGrid

IC_KEYS = ("rho0_cos", "rho0_sin", "u0_cos", "u0_sin")


def read_flat(path):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str
    with open(path) as fh:
        cp.read_string("[root]\n" + fh.read())
    return dict(cp["root"])


def parse_list(text):
    text = str(text).strip()
    if not text:
        return []
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _coerce(value, tp):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or (origin is not None and type(None) in args):
        inner = [a for a in args if a is not type(None)]
        if str(value).strip().lower() in ("", "none", "auto"):
            return None
        return _coerce(value, inner[0])
    if tp in (bool, "bool"):
        return str(value).strip().lower() in ("1", "true", "yes", "on")
    if tp in (int, "int"):
        return int(float(value))
    if tp in (float, "float"):
        return float(value)
    if tp in (tuple, "tuple") or origin is tuple:
        return tuple(parse_list(value))
    return str(value).strip()


def build(cls, mapping, strict=True):
    """Instantiate dataclass ``cls`` from string values, ignoring IC keys."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kw = {}
    for k, v in mapping.items():
        if k in names:
            kw[k] = _coerce(v, hints[k])
        elif strict and k not in IC_KEYS:
            raise KeyError(f"unknown config key {k!r} for {cls.__name__}")
    return cls(**kw)


def sim_config(mapping, strict=False) -> SimConfig:
    return build(SimConfig, mapping, strict=strict)


@dataclasses.dataclass(frozen=True)
class FourierIC:
    rho_cos: tuple = (1.0, 0.2)
    rho_sin: tuple = ()
    u_cos: tuple = ()
    u_sin: tuple = (0.1,)

    @classmethod
    def from_mapping(cls, m):
        get = lambda k, d: tuple(parse_list(m[k])) if k in m else d  # noqa: E731
        return cls(get("rho0_cos", cls.rho_cos), get("rho0_sin", cls.rho_sin),
                   get("u0_cos", cls.u_cos), get("u0_sin", cls.u_sin))

    @staticmethod
    def _series(cos, sin, grid: SpatialGrid):
        x = grid.x / grid.length
        out = np.zeros(grid.n_x)
        for k, a in enumerate(cos):
            out += a * np.cos(2 * np.pi * k * x)
        for k, b in enumerate(sin, start=1):
            out += b * np.sin(2 * np.pi * k * x)
        return out

    def rho(self, grid):
        return self._series(self.rho_cos, self.rho_sin, grid)

    def u(self, grid):
        return self._series(self.u_cos, self.u_sin, grid)
