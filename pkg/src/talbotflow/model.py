"""Physical parameters, derived scales and unit handling.

Everything inside the package is SI: lengths in metres, the localisation
strength in m^-3. Conversions from the mixed laboratory units (pm, um, mm,
mm^-1 um^-2) happen only at the boundary, through :func:`to_si` and
:func:`from_si`.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "BeamParams",
    "GratingSpec",
    "DecoherenceParams",
    "SimulationGrid",
    "TalbotSetup",
    "derive_wavenumber",
    "talbot_distance",
    "beam_width",
    "complex_width",
    "coherence_range",
    "to_si",
    "from_si",
    "parse_quantity",
    "LAMBDA_DISPLAY_UNIT",
    "reference_setup",
]

LENGTH_UNITS = {
    "m": 1.0,
    "mm": 1e-3,
    "um": 1e-6,
    "µm": 1e-6,
    "nm": 1e-9,
    "pm": 1e-12,
}
# 1 mm^-1 um^-2 = 1e3 * 1e12 m^-3
LAMBDA_UNITS = {
    "m^-3": 1.0,
    "mm^-1um^-2": 1e15,
    "mm^-1µm^-2": 1e15,
}
LAMBDA_DISPLAY_UNIT = "mm^-1um^-2"

OVERLAP_LIMIT = 1e-3


def to_si(value: float, unit: str) -> float:
    """Convert ``value`` expressed in ``unit`` to SI."""
    unit = unit.replace(" ", "")
    if unit in LENGTH_UNITS:
        return value * LENGTH_UNITS[unit]
    if unit in LAMBDA_UNITS:
        return value * LAMBDA_UNITS[unit]
    raise ValueError(f"unknown unit {unit!r}")


def from_si(value: float, unit: str) -> float:
    """Inverse of :func:`to_si`."""
    unit = unit.replace(" ", "")
    if unit in LENGTH_UNITS:
        return value / LENGTH_UNITS[unit]
    if unit in LAMBDA_UNITS:
        return value / LAMBDA_UNITS[unit]
    raise ValueError(f"unknown unit {unit!r}")


_QUANTITY = re.compile(r"^\s*([-+0-9.eE]+)\s*(\S.*?)?\s*$")


def parse_quantity(text: str) -> tuple[float, str]:
    """Split ``"16 pm"`` into ``(16.0, "pm")``; the unit may be empty."""
    match = _QUANTITY.match(text)
    if match is None:
        raise ValueError(f"cannot parse quantity {text!r}")
    try:
        value = float(match.group(1))
    except ValueError:
        raise ValueError(f"cannot parse quantity {text!r}") from None
    return value, (match.group(2) or "").replace(" ", "")


def derive_wavenumber(lambda_dB: float) -> float:
    """Return ``2*pi/lambda_dB``."""
    if not lambda_dB > 0:
        raise ValueError(f"wavelength must be positive, got {lambda_dB!r}")
    return 2.0 * math.pi / lambda_dB


def talbot_distance(d: float, lambda_dB: float) -> float:
    """Talbot revival length ``2 d**2 / lambda_dB``."""
    if not d > 0 or not lambda_dB > 0:
        raise ValueError("period and wavelength must be positive")
    return 2.0 * d * d / lambda_dB


def beam_width(sigma0, k, z):
    """Real width of a freely spreading Gaussian slit mode at distance ``z``.

    Works elementwise on arrays of ``z``.
    """
    s = np.asarray(z, dtype=float) / (2.0 * k * sigma0 * sigma0)
    out = sigma0 * np.sqrt(1.0 + s * s)
    return float(out) if np.ndim(out) == 0 else out


def complex_width(sigma0, k, z):
    """Complex width ``sigma0 * (1 + i z / (2 k sigma0**2))``."""
    s = np.asarray(z, dtype=float) / (2.0 * k * sigma0 * sigma0)
    out = sigma0 * (1.0 + 1j * s)
    return complex(out) if np.ndim(out) == 0 else out


def coherence_range(Lambda, z):
    """Transverse separation ``1/sqrt(Lambda z)`` over which pair coherence survives.

    Returns ``inf`` when ``Lambda * z == 0`` (no decoherence has acted yet).
    """
    lz = np.asarray(Lambda, dtype=float) * np.asarray(z, dtype=float)
    if np.any(lz < 0):
        raise ValueError("Lambda and z must be non-negative")
    with np.errstate(divide="ignore"):
        out = np.where(lz > 0, 1.0 / np.sqrt(np.where(lz > 0, lz, 1.0)), np.inf)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class BeamParams:
    lambda_dB: float

    def __post_init__(self):
        if not self.lambda_dB > 0:
            raise ValueError(f"lambda_dB must be positive, got {self.lambda_dB!r}")

    @property
    def k(self) -> float:
        return derive_wavenumber(self.lambda_dB)


@dataclass(frozen=True)
class GratingSpec:
    """Finite periodic array of Gaussian slits centred on ``x = 0``.

    ``sigma0`` defaults to a quarter of the geometric slit width.
    """

    period: float
    slit_width: float
    n_slits: int
    sigma0: float | None = None
    overlap_warning: bool = field(init=False, default=False)

    def __post_init__(self):
        if not self.period > 0 or not self.slit_width > 0:
            raise ValueError("period and slit width must be positive")
        if not self.slit_width < self.period:
            raise ValueError("slit width must be smaller than the period")
        if int(self.n_slits) != self.n_slits or self.n_slits < 1:
            raise ValueError(f"n_slits must be a positive integer, got {self.n_slits!r}")
        object.__setattr__(self, "n_slits", int(self.n_slits))
        if self.sigma0 is None:
            object.__setattr__(self, "sigma0", self.slit_width / 4.0)
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if self.adjacent_overlap >= OVERLAP_LIMIT:
            object.__setattr__(self, "overlap_warning", True)
            warnings.warn(
                f"adjacent slit modes overlap by {self.adjacent_overlap:.3g} "
                f"(>= {OVERLAP_LIMIT:g}); the separable-slit picture is degraded",
                stacklevel=2,
            )

    @property
    def adjacent_overlap(self) -> float:
        return math.exp(-self.period**2 / (8.0 * self.sigma0**2))

    @cached_property
    def centers(self) -> np.ndarray:
        n = np.arange(1, self.n_slits + 1)
        out = (n - (self.n_slits + 1) / 2.0) * self.period
        out.setflags(write=False)
        return out

    @property
    def k0(self) -> float:
        """Grating wavenumber ``2 pi / d``."""
        return derive_wavenumber(self.period)


@dataclass(frozen=True)
class DecoherenceParams:
    Lambda: float = 0.0

    def __post_init__(self):
        if not self.Lambda >= 0:
            raise ValueError(f"Lambda must be non-negative, got {self.Lambda!r}")

    @classmethod
    def from_display(cls, value: float) -> "DecoherenceParams":
        """Build from a value in mm^-1 um^-2."""
        return cls(to_si(value, LAMBDA_DISPLAY_UNIT))

    @property
    def display(self) -> float:
        return from_si(self.Lambda, LAMBDA_DISPLAY_UNIT)


@dataclass(frozen=True)
class SimulationGrid:
    """Uniform closed-interval (x, z) lattice, endpoints included."""

    x_min: float
    x_max: float
    z_min: float
    z_max: float
    nx: int
    nz: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be < x_max")
        if not 0 <= self.z_min < self.z_max:
            raise ValueError("need 0 <= z_min < z_max")
        if self.nx < 2 or self.nz < 2:
            raise ValueError("nx and nz must be >= 2")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def z(self) -> np.ndarray:
        return np.linspace(self.z_min, self.z_max, self.nz)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nz, self.nx)


@dataclass(frozen=True)
class TalbotSetup:
    """Beam plus grating: the coherent system every field routine consumes."""

    beam: BeamParams
    grating: GratingSpec

    @property
    def k(self) -> float:
        return self.beam.k

    @property
    def z_T(self) -> float:
        return talbot_distance(self.grating.period, self.beam.lambda_dB)

    @property
    def sigma0(self) -> float:
        return self.grating.sigma0

    @property
    def centers(self) -> np.ndarray:
        return self.grating.centers

    @property
    def n_slits(self) -> int:
        return self.grating.n_slits

    def sigma_z(self, z):
        return beam_width(self.sigma0, self.k, z)

    def sigma_tilde(self, z):
        return complex_width(self.sigma0, self.k, z)

    def with_slits(self, n_slits: int) -> "TalbotSetup":
        g = self.grating
        return TalbotSetup(self.beam, GratingSpec(g.period, g.slit_width, n_slits, g.sigma0))


def reference_setup(n_slits: int = 50) -> TalbotSetup:
    """Sodium beam at 16 pm on a 0.4 um / 0.2 um grating, sigma0 = w/4."""
    return TalbotSetup(
        BeamParams(16e-12),
        GratingSpec(period=0.4e-6, slit_width=0.2e-6, n_slits=n_slits),
    )
