"""Independent validators for the coherent analytic field.

Two routes that share no code with :mod:`talbotflow.wavefield`: an exact
spectral (split-step) propagator for the free paraxial equation on a
periodic lattice, and direct adaptive quadrature of the Huygens-Fresnel
integral for a single slit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .model import TalbotSetup, beam_width

__all__ = [
    "AliasingError",
    "QuadratureError",
    "SpectralField",
    "grating_lattice",
    "split_step_propagate",
    "fresnel_quadrature_mode",
    "compare_fields",
]

ALIAS_BAND = 0.9
ALIAS_LIMIT = 1e-10


class AliasingError(ValueError):
    """Spectral content reaches the lattice Nyquist band."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


@dataclass(frozen=True)
class SpectralField:
    """Complex transverse field on a uniform power-of-two lattice."""

    x: np.ndarray
    values: np.ndarray
    k: float
    dz: float | None = None

    def __post_init__(self):
        n = len(self.x)
        if n < 2 or n & (n - 1):
            raise ValueError(f"lattice size must be a power of two, got {n}")
        if self.values.shape != self.x.shape:
            raise ValueError("values and lattice differ in length")

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def kx(self) -> np.ndarray:
        return 2.0 * math.pi * np.fft.fftfreq(len(self.x), d=self.dx)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return float(np.sum(self.density) * self.dx)


def grating_lattice(setup: TalbotSetup, z_max: float, points_per_sigma0: float = 4.0) -> SpectralField:
    """Initial grating field on a lattice sized for propagation up to ``z_max``.

    The span covers the grating plus ``10 sigma_z(z_max)`` padding on each
    side; the spacing resolves ``sigma0`` with ``points_per_sigma0`` samples.
    """
    sigma0 = setup.sigma0
    xn = np.asarray(setup.centers, dtype=float)
    pad = 10.0 * beam_width(sigma0, setup.k, z_max)
    span = (xn[-1] - xn[0]) + 2.0 * max(pad, 12.0 * sigma0)
    n = 1 << int(math.ceil(math.log2(span * points_per_sigma0 / sigma0)))
    dx = span / n
    x = (np.arange(n) - n // 2) * dx
    psi = np.zeros(n, dtype=complex)
    norm = (2.0 * math.pi * sigma0**2) ** -0.25 / math.sqrt(len(xn))
    for c in xn:
        psi += norm * np.exp(-((x - c) ** 2) / (4.0 * sigma0**2))
    return SpectralField(x, psi, setup.k)


def _check_aliasing(field: SpectralField) -> None:
    spec = np.abs(np.fft.fft(field.values)) ** 2
    kx = np.abs(field.kx)
    kmax = kx.max()
    total = spec.sum()
    tail = spec[kx > ALIAS_BAND * kmax].sum()
    if total > 0 and tail > ALIAS_LIMIT * total:
        raise AliasingError(
            f"spectral power above {ALIAS_BAND} k_max is {tail / total:.3e} of the total "
            f"(limit {ALIAS_LIMIT:g}); k_max = {kmax:.4g} 1/m, dx = {field.dx:.4g} m, "
            f"n = {len(field.x)}"
        )


def split_step_propagate(initial: SpectralField, z_target: float) -> SpectralField:
    """Propagate a field to ``z_target`` with the free paraxial propagator.

    Free propagation is diagonal in the spectral basis, so each step is an
    exact multiplication by ``exp(-i kx**2 dz / 2k)``. With ``initial.dz``
    unset the distance is covered in one step.
    """
    if z_target < 0:
        raise ValueError("z_target must be non-negative")
    _check_aliasing(initial)
    if z_target == 0:
        return initial
    if initial.dz:
        n_steps = max(1, int(math.ceil(z_target / initial.dz - 1e-9)))
    else:
        n_steps = 1
    h = z_target / n_steps
    phase = np.exp(-1j * initial.kx**2 * h / (2.0 * initial.k))
    spec = np.fft.fft(initial.values)
    n0 = np.sum(np.abs(spec) ** 2)
    for _ in range(n_steps):
        spec = spec * phase
        n1 = np.sum(np.abs(spec) ** 2)
        if abs(n1 - n0) > 1e-12 * n0:
            raise RuntimeError(f"norm drift {abs(n1 - n0) / n0:.3e} in spectral step")
    return SpectralField(initial.x, np.fft.ifft(spec), initial.k, initial.dz)


def fresnel_quadrature_mode(n: int, x: float, z: float, setup: TalbotSetup, rtol: float = 1e-8) -> complex:
    """Single-slit amplitude from the Huygens-Fresnel integral.

    Integrates the initial Gaussian of slit ``n`` (1-based) against the
    Fresnel kernel over ``x_n +- 12 sigma0``.
    """
    if not z > 0:
        raise ValueError("the Fresnel kernel needs z > 0")
    k, sigma0 = setup.k, setup.sigma0
    xn = float(setup.centers[n - 1])
    a0 = (2.0 * math.pi * sigma0**2) ** -0.25
    rel = float(x) - xn

    def f(u):
        return a0 * math.exp(-u * u / (4.0 * sigma0**2))

    def re(u):
        return f(u) * math.cos(k * (rel - u) ** 2 / (2.0 * z))

    def im(u):
        return f(u) * math.sin(k * (rel - u) ** 2 / (2.0 * z))

    lo, hi = -12.0 * sigma0, 12.0 * sigma0
    scale = a0 * 2.0 * math.sqrt(math.pi) * sigma0
    parts = []
    for g in (re, im):
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err, info = integrate.quad(
                    g, lo, hi, epsabs=rtol * 1e-2 * scale, epsrel=rtol, limit=1000, full_output=1
                )[:3]
            except integrate.IntegrationWarning as exc:
                raise QuadratureError(f"quadrature failed at x={x!r}, z={z!r}: {exc}") from None
        if err > rtol * scale:
            raise QuadratureError(
                f"error estimate {err:.3e} above tolerance after {info['neval']} evaluations "
                f"({info['last']} subintervals)"
            )
        parts.append(val)
    pref = np.sqrt(k / (2.0j * math.pi * z))
    return complex(pref * (parts[0] + 1j * parts[1]))


def compare_fields(a, b, x_a=None, x_b=None) -> dict:
    """Agreement metrics of ``b`` against the reference samples ``a``.

    ``max_rel`` only looks where the reference exceeds ``1e-6`` of its maximum.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"sample counts differ: {a.shape} vs {b.shape}")
    if x_a is not None or x_b is not None:
        if x_a is None or x_b is None or not np.array_equal(np.asarray(x_a), np.asarray(x_b)):
            raise ValueError("samples are not on identical lattices")
    mask = np.abs(a) > 1e-6 * np.abs(a).max()
    diff = b - a
    max_rel = float(np.max(np.abs(diff[mask]) / np.abs(a[mask])))
    l2_rel = float(np.linalg.norm(diff) / np.linalg.norm(a))
    if np.std(a) == 0 or np.std(b) == 0:
        pearson = float("nan")
    else:
        pearson = float(np.corrcoef(a, b)[0, 1])
    return {"max_rel": max_rel, "l2_rel": l2_rel, "pearson": pearson}
