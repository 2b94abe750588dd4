"""Run configuration: flat ``section.key = value unit`` text with SI resolution.

Dimensional values carry a mandatory unit. Lengths accept ``m, mm, um, nm,
pm``; transverse lengths may also be given in grating periods (``d``) and
longitudinal ones in Talbot distances (``zT``). The localisation strength
takes ``m^-3`` or ``mm^-1um^-2`` and may be a comma-separated ladder sharing
one trailing unit, e.g. ``decoherence.Lambda = 0, 1e-3, 1 mm^-1um^-2``.

A resolved configuration prints back as the same format in SI units, so the
manifest of a run is itself a valid configuration.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .decoherence import CHANNELS
from .model import (
    LAMBDA_UNITS,
    LENGTH_UNITS,
    BeamParams,
    GratingSpec,
    SimulationGrid,
    TalbotSetup,
    talbot_distance,
)

__all__ = ["ConfigError", "RunConfig", "SCHEMA", "FAR_FIELD_DEFAULTS", "parse_config_text", "load_config"]


class ConfigError(ValueError):
    """Malformed, unknown or inconsistent configuration entry."""


# key -> (kind, default text)
SCHEMA: dict[str, tuple[str, str]] = {
    "beam.lambda": ("length", "16 pm"),
    "grating.period": ("length", "0.4 um"),
    "grating.slit_width": ("length", "0.2 um"),
    "grating.n_slits": ("int", "50"),
    "grating.sigma0": ("length_or_auto", "auto"),
    "decoherence.Lambda": ("lambda_list", "0 m^-3"),
    "grid.x_min": ("xlength", "-15 um"),
    "grid.x_max": ("xlength", "15 um"),
    "grid.z_min": ("zlength", "0 zT"),
    "grid.z_max": ("zlength", "8 zT"),
    "grid.nx": ("int", "601"),
    "grid.nz": ("int", "401"),
    "ensemble.per_slit": ("int", "11"),
    "ensemble.z_start": ("zlength", "0 zT"),
    "ensemble.z_end": ("zlength", "2 zT"),
    "outputs.formats": ("words", "csv, pnm"),
    "outputs.channels": ("words", ""),
    "render.clip": ("float", "0.5"),
    "diagnose.checks": ("words", "crossing, revival, orders, plateaus, onaxis"),
    "diagnose.revival_min": ("float", "0.9"),
    "diagnose.far_z": ("zlength", "1 m"),
    "diagnose.max_order": ("int", "2"),
    "diagnose.order_tol": ("float", "0.05"),
    "diagnose.plateau_cut": ("float", "0.1"),
    "diagnose.plateau_tol": ("float", "0.1"),
    "diagnose.onaxis_points": ("int", "81"),
}

FAR_FIELD_DEFAULTS = {
    "grid.x_min": "-120 um",
    "grid.x_max": "120 um",
    "grid.z_max": "50 zT",
    "grid.nx": "801",
    "render.clip": "4",
}

WORD_CHOICES = {
    "outputs.formats": {"csv", "npz", "pnm"},
    "outputs.channels": set(CHANNELS),
    "diagnose.checks": {"crossing", "revival", "orders", "plateaus", "onaxis"},
}

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_LINE = re.compile(r"^\s*([A-Za-z_][\w]*\.[A-Za-z_][\w]*)\s*=\s*(.*?)\s*$")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw ``key -> value text`` pairs; comments and blank lines are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value', got {raw.strip()!r}")
        key, value = m.groups()
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path) -> dict[str, str]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from exc
    return parse_config_text(text, str(p))


def _split_quantity(key, text):
    m = re.fullmatch(rf"\s*({_NUMBER})\s*(\S+)?\s*", text)
    if not m:
        raise ConfigError(f"{key}: cannot parse {text!r} as 'number unit'")
    if m.group(2) is None:
        raise ConfigError(f"{key}: a unit is required, got {text!r}")
    return float(m.group(1)), m.group(2)


def _length(key, text, extra=None):
    value, unit = _split_quantity(key, text)
    if unit in LENGTH_UNITS:
        return value * LENGTH_UNITS[unit]
    if extra and unit in extra:
        return value * extra[unit]
    allowed = sorted(LENGTH_UNITS) + sorted(extra or {})
    raise ConfigError(f"{key}: unit {unit!r} not one of {allowed}")


def _lambda_list(key, text):
    m = re.fullmatch(r"\s*(.*?)\s+(\S+)\s*", text)
    if not m or re.fullmatch(_NUMBER, m.group(2)):
        raise ConfigError(f"{key}: a unit is required, got {text!r}")
    numbers, unit = m.groups()
    if unit not in LAMBDA_UNITS:
        raise ConfigError(f"{key}: unit {unit!r} not one of {sorted(LAMBDA_UNITS)}")
    values = []
    for item in numbers.split(","):
        item = item.strip()
        if not re.fullmatch(_NUMBER, item):
            raise ConfigError(f"{key}: cannot parse {item!r} as a number")
        v = float(item) * LAMBDA_UNITS[unit]
        if not v >= 0:
            raise ConfigError(f"{key}: Lambda must be non-negative")
        values.append(v)
    return tuple(values)


def _int(key, text):
    if not re.fullmatch(r"\s*[-+]?\d+\s*", text):
        raise ConfigError(f"{key}: expected an integer, got {text!r}")
    return int(text)


def _float(key, text):
    if not re.fullmatch(rf"\s*{_NUMBER}\s*", text):
        raise ConfigError(f"{key}: expected a dimensionless number, got {text!r}")
    return float(text)


def _words(key, text):
    items = tuple(w.strip() for w in text.split(",") if w.strip())
    bad = [w for w in items if w not in WORD_CHOICES[key]]
    if bad:
        raise ConfigError(f"{key}: unknown entries {bad}; choose from {sorted(WORD_CHOICES[key])}")
    return items


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration; every value is SI or dimensionless."""

    values: dict

    @classmethod
    def resolve(cls, *layers: dict[str, str]) -> "RunConfig":
        """Merge raw layers (later wins) over the schema defaults and convert to SI."""
        raw = {k: v for k, (_, v) in SCHEMA.items()}
        for layer in layers:
            for k, v in layer.items():
                if k not in SCHEMA:
                    raise ConfigError(f"unknown key {k!r}")
                raw[k] = v

        vals: dict = {}
        for key in ("beam.lambda", "grating.period", "grating.slit_width"):
            vals[key] = _length(key, raw[key])
            if not vals[key] > 0:
                raise ConfigError(f"{key} must be positive")
        d = vals["grating.period"]
        zT = talbot_distance(d, vals["beam.lambda"])
        for key, (kind, _) in SCHEMA.items():
            if key in vals:
                continue
            text = raw[key]
            if kind == "length_or_auto":
                vals[key] = None if text.strip() == "auto" else _length(key, text)
            elif kind == "xlength":
                vals[key] = _length(key, text, {"d": d})
            elif kind == "zlength":
                vals[key] = _length(key, text, {"zT": zT})
            elif kind == "lambda_list":
                vals[key] = _lambda_list(key, text)
            elif kind == "int":
                vals[key] = _int(key, text)
            elif kind == "float":
                vals[key] = _float(key, text)
            elif kind == "words":
                vals[key] = _words(key, text)
            else:  # pragma: no cover
                raise AssertionError(kind)

        cfg = cls(vals)
        cfg._validate()
        return cfg

    def _validate(self):
        v = self.values
        try:
            setup = self.setup()
            self.grid()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        v["grating.sigma0"] = setup.sigma0
        if v["ensemble.per_slit"] < 1:
            raise ConfigError("ensemble.per_slit must be >= 1")
        if not 0 <= v["ensemble.z_start"] < v["ensemble.z_end"]:
            raise ConfigError("need 0 <= ensemble.z_start < ensemble.z_end")
        if not v["render.clip"] > 0:
            raise ConfigError("render.clip must be positive")
        if v["diagnose.max_order"] < 1:
            raise ConfigError("diagnose.max_order must be >= 1")
        if v["diagnose.onaxis_points"] < 1:
            raise ConfigError("diagnose.onaxis_points must be >= 1")
        if not 0 < v["diagnose.plateau_cut"] < 1:
            raise ConfigError("diagnose.plateau_cut must lie in (0, 1)")

    def __getitem__(self, key):
        return self.values[key]

    def setup(self) -> TalbotSetup:
        v = self.values
        return TalbotSetup(
            BeamParams(v["beam.lambda"]),
            GratingSpec(v["grating.period"], v["grating.slit_width"], v["grating.n_slits"], v["grating.sigma0"]),
        )

    def grid(self) -> SimulationGrid:
        v = self.values
        return SimulationGrid(v["grid.x_min"], v["grid.x_max"], v["grid.z_min"], v["grid.z_max"], v["grid.nx"], v["grid.nz"])

    @property
    def lambdas(self) -> tuple[float, ...]:
        return self.values["decoherence.Lambda"]

    def to_text(self) -> str:
        """The configuration in SI units, parseable by :func:`parse_config_text`."""
        lines = []
        for key, (kind, _) in SCHEMA.items():
            val = self.values[key]
            if kind in ("length", "length_or_auto", "xlength", "zlength"):
                text = f"{float(val)!r} m"
            elif kind == "lambda_list":
                text = ", ".join(repr(float(x)) for x in val) + " m^-3"
            elif kind == "words":
                text = ", ".join(val)
            else:
                text = repr(val)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"
