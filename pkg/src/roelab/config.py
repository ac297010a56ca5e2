"""INI-style experiment configuration.

Sections and keys (all optional, defaults in brackets):

``[model]``
    kind [hofstadter], d [2], L [8], boundary [open], N [1], hopping [1.0],
    flux [0] (flux quanta per plaquette, e.g. ``1/3``), gauge [cocycle],
    t1 [0.5], t2 [1.0], axis [2], coupling [0.1]
``[disorder]``
    W [0], hopping_W [0], positional [0], seed [0]
``[pairing]``
    E_F [0], L_list [8, 12, 16], tau [0.05] (number or ``auto``),
    min_gap [0.1], bulk_fraction [0.5], oracle [yes]
``[decay]``
    margin [L], rapid_order [6]
``[edge]``
    E_F [pairing E_F], width [24], momenta [400], threshold [0.5]
``[untwist]``
    flux [1/3], L [3], samples [1000], seed [0], coboundaries [0]
``[sweep]``
    W_list [0], seeds [0]
``[output]``
    dir [out]

Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

from .models import DisorderSpec, ModelError, ModelSpec


class ConfigError(ValueError):
    """Malformed or unknown configuration entry."""


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(t) for t in s.replace(",", " ").split())


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(t) for t in s.replace(",", " ").split())


def _tau(s: str):
    return "auto" if s.strip().lower() == "auto" else float(s)


SCHEMA: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "model": {
        "kind": (str, "hofstadter"),
        "d": (int, 2),
        "L": (int, 8),
        "boundary": (str, "open"),
        "N": (int, 1),
        "hopping": (float, 1.0),
        "flux": (Fraction, Fraction(0)),
        "gauge": (str, "cocycle"),
        "t1": (float, 0.5),
        "t2": (float, 1.0),
        "axis": (int, 2),
        "coupling": (float, 0.1),
    },
    "disorder": {
        "W": (float, 0.0),
        "hopping_W": (float, 0.0),
        "positional": (float, 0.0),
        "seed": (int, 0),
    },
    "pairing": {
        "E_F": (float, 0.0),
        "L_list": (_ints, (8, 12, 16)),
        "tau": (_tau, 0.05),
        "min_gap": (float, 0.1),
        "bulk_fraction": (float, 0.5),
        "oracle": (_bool, True),
    },
    "decay": {
        "margin": (float, None),
        "rapid_order": (float, 6.0),
    },
    "edge": {
        "E_F": (float, None),
        "width": (int, 24),
        "momenta": (int, 400),
        "threshold": (float, 0.5),
    },
    "untwist": {
        "flux": (Fraction, Fraction(1, 3)),
        "L": (int, 3),
        "samples": (int, 1000),
        "seed": (int, 0),
        "coboundaries": (int, 0),
    },
    "sweep": {
        "W_list": (_floats, (0.0,)),
        "seeds": (_ints, (0,)),
    },
    "output": {
        "dir": (str, "out"),
    },
}


@dataclass(frozen=True)
class Config:
    values: dict[str, dict[str, Any]]
    path: str | None = None
    present: frozenset = field(default_factory=frozenset)

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def model(self) -> ModelSpec:
        try:
            return ModelSpec(**self.values["model"])
        except (TypeError, ModelError) as exc:
            raise ConfigError(str(exc)) from exc

    def disorder(self, **override) -> DisorderSpec:
        try:
            return DisorderSpec(**{**self.values["disorder"], **override})
        except ModelError as exc:
            raise ConfigError(str(exc)) from exc

    def resolved(self) -> dict[str, dict[str, Any]]:
        """JSON-ready copy of every value (fractions and tuples as text/lists)."""
        out = {}
        for sec, kv in self.values.items():
            out[sec] = {k: (str(v) if isinstance(v, Fraction) else list(v) if isinstance(v, tuple) else v)
                        for k, v in kv.items()}
        return out


def defaults() -> Config:
    return Config({s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()})


def parse_config(text: str, path: str | None = None) -> Config:
    """Parse INI text against :data:`SCHEMA`; raises :class:`ConfigError`."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=path or "<config>")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    values = defaults().values
    values = {s: dict(kv) for s, kv in values.items()}
    present = set()
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]; expected one of {sorted(SCHEMA)}")
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]; expected one of {sorted(SCHEMA[sec])}")
            conv, _ = SCHEMA[sec][key]
            try:
                values[sec][key] = conv(raw)
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"[{sec}] {key} = {raw!r}: {exc}") from exc
            present.add((sec, key))
    return Config(values, path, frozenset(present))


def load_config(path: str | Path) -> Config:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return parse_config(text, str(path))


__all__ = ["Config", "ConfigError", "SCHEMA", "defaults", "parse_config", "load_config"]
