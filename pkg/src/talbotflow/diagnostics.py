"""Scalar reductions of the field: revivals, coherence crossing, far-field orders."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .decoherence import _lam, density, field_sample
from .model import TalbotSetup, coherence_range

log = logging.getLogger(__name__)

__all__ = [
    "RevivalReport",
    "OrderReport",
    "revival_correlation",
    "fringe_contrast",
    "coherence_crossing",
    "diffraction_order_positions",
    "detect_momentum_plateaus",
    "multislit_reference",
    "onaxis_profile",
]


@dataclass(frozen=True)
class RevivalReport:
    z_probe: float
    window_half_width: float
    shift: float
    pearson: float

    @property
    def defined(self) -> bool:
        return not math.isnan(self.pearson)


@dataclass(frozen=True)
class OrderReport:
    """Detected far-field peak for diffraction order ``order``.

    ``relative_error`` is taken against ``|predicted_x|``, or against the
    order spacing for the central order.
    """

    order: int
    peak_x: float
    predicted_x: float
    relative_error: float


def revival_correlation(
    setup: TalbotSetup,
    Lambda,
    z_probe: float,
    window: float | None = None,
    shift: float = 0.0,
    samples: int = 1024,
) -> RevivalReport:
    """Pearson correlation of ``rho(x + shift, z_probe)`` with ``rho(x, 0)`` for ``|x| <= window``.

    ``window`` defaults to five grating periods.
    """
    if z_probe < 0:
        raise ValueError("z_probe must be non-negative")
    if samples < 512:
        raise ValueError("need at least 512 samples")
    if window is None:
        window = 5.0 * setup.grating.period
    x = np.linspace(-window, window, samples)
    ref = density(x, 0.0, setup, Lambda)
    probe = density(x + shift, z_probe, setup, Lambda)
    if np.ptp(ref) == 0 or np.ptp(probe) == 0:
        r = math.nan
    else:
        r = float(np.corrcoef(probe, ref)[0, 1])
    return RevivalReport(z_probe, window, shift, r)


def fringe_contrast(setup: TalbotSetup, Lambda, z: float, x_center: float = 0.0, samples: int = 801) -> float:
    """``(max - min) / (max + min)`` of the density over one period around ``x_center``."""
    d = setup.grating.period
    x = np.linspace(x_center - d / 2, x_center + d / 2, samples)
    rho = density(x, z, setup, Lambda)
    return float((rho.max() - rho.min()) / (rho.max() + rho.min()))


def coherence_crossing(setup: TalbotSetup, Lambda, xtol_fraction: float = 1e-3) -> float | None:
    """Distance where the coherence range shrinks to the single-slit beam width.

    Bisection on ``[1e-6 z_T, 1e3 z_T]``; returns ``None`` when the two
    curves do not cross inside that bracket.
    """
    lam = _lam(Lambda)
    if not lam > 0:
        raise ValueError("Lambda must be positive")
    zT = setup.z_T

    def gap(z):
        return coherence_range(lam, z) - setup.sigma_z(z)

    a, b = 1e-6 * zT, 1e3 * zT
    if gap(a) * gap(b) > 0:
        return None
    return float(optimize.bisect(gap, a, b, xtol=xtol_fraction * zT))


def _parabolic(x, y, i):
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    den = y0 - 2.0 * y1 + y2
    if den == 0:
        return x[i], y1
    off = 0.5 * (y0 - y2) / den
    h = x[i + 1] - x[i]
    return x[i] + off * h, y1 - 0.25 * (y0 - y2) * off


def diffraction_order_positions(
    setup: TalbotSetup,
    Lambda,
    z: float,
    max_order: int = 2,
    min_relative_density: float = 1e-3,
) -> list[OrderReport]:
    """Locate the far-field density peak of every order ``|l| <= max_order``.

    For each order the density is scanned within a quarter order-spacing of
    the predicted ``l * lambda z / d``; the interior local maximum nearest to
    the prediction is refined by a three-point parabola. Orders without such
    a maximum, or whose peak lies below ``min_relative_density`` times the
    slice maximum, are left out (and logged).
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    if z < 10 * setup.z_T:
        raise ValueError("order detection needs the far field, z >= 10 z_T")
    d, N = setup.grating.period, setup.n_slits
    spacing = setup.beam.lambda_dB * z / d
    dx = min(spacing / 400.0, spacing / (N * 8.0))
    half = int(math.ceil((max_order + 0.5) * spacing / dx))
    x = np.arange(-half, half + 1) * dx
    rho = density(x, z, setup, Lambda)
    top = rho.max()

    out = []
    for order in range(-max_order, max_order + 1):
        pred = order * spacing
        sel = np.flatnonzero(np.abs(x - pred) <= spacing / 4.0)
        i0, i1 = sel[0], sel[-1]
        r = rho[i0 : i1 + 1]
        peaks = np.flatnonzero((r[1:-1] > r[:-2]) & (r[1:-1] >= r[2:])) + 1
        if peaks.size == 0:
            log.info("order %d omitted: no local maximum near %.4g m", order, pred)
            continue
        j = i0 + peaks[np.argmin(np.abs(x[i0 + peaks] - pred))]
        px, py = _parabolic(x, rho, j)
        if py < min_relative_density * top:
            log.info("order %d omitted: peak density %.3g of slice maximum", order, py / top)
            continue
        scale = abs(pred) if order else spacing
        out.append(OrderReport(order, float(px), float(pred), float(abs(px - pred) / scale)))
    return out


def detect_momentum_plateaus(
    setup: TalbotSetup,
    Lambda,
    z: float,
    density_cut: float = 0.1,
    slope_fraction: float = 0.1,
    half_width: float | None = None,
    samples: int | None = None,
    min_points: int = 3,
    min_run: int = 3,
    merge_tol: float = 0.25,
) -> list[float]:
    """Levels of the flat, well-populated stretches of ``k_x / k0`` on one slice.

    A sample qualifies when ``|d(k_x/k0)/dx|`` is below ``slope_fraction``
    times the slice median of that slope and the density exceeds
    ``density_cut`` times the slice maximum. Runs of qualifying samples
    whose mean levels differ by less than ``merge_tol`` are merged. A merged
    group is kept when it holds at least ``min_points`` samples and at least
    one run of ``min_run`` consecutive ones; isolated flat samples on the
    ramps between orders never form such a run.
    """
    if not 0 < density_cut < 1:
        raise ValueError("density_cut must lie in (0, 1)")
    d, N = setup.grating.period, setup.n_slits
    spacing = setup.beam.lambda_dB * z / d
    if half_width is None:
        half_width = 3.0 * spacing
    if samples is None:
        dx = min(spacing / 400.0, spacing / (N * 32.0))
        samples = int(2 * math.ceil(half_width / dx) + 1)
    x = np.linspace(-half_width, half_width, samples)
    fs = field_sample(x, z, setup, Lambda)
    kx = fs.kx_over_k0
    ok = np.isfinite(kx)
    slope = np.abs(np.gradient(np.where(ok, kx, 0.0), x))
    med = np.median(slope[ok])
    qual = ok & (slope < slope_fraction * med) & (fs.rho > density_cut * fs.rho.max())

    runs = []
    i = 0
    while i < samples:
        if not qual[i]:
            i += 1
            continue
        j = i
        while j + 1 < samples and qual[j + 1]:
            j += 1
        runs.append((float(np.mean(kx[i : j + 1])), j - i + 1))
        i = j + 1

    # [level, samples, longest run]
    groups: list[list[float]] = []
    for level, count in runs:
        if groups and abs(groups[-1][0] - level) < merge_tol:
            g = groups[-1]
            g[0] = (g[0] * g[1] + level * count) / (g[1] + count)
            g[1] += count
            g[2] = max(g[2], count)
        else:
            groups.append([level, count, count])
    return [g[0] for g in groups if g[1] >= min_points and g[2] >= min_run]


def multislit_reference(x, z: float, setup: TalbotSetup):
    """Paraxial far-field grating law: Gaussian envelope times the N-slit array factor.

    At the principal maxima the removable singularity takes its limit ``N**2``.
    """
    if not z > 0:
        raise ValueError("z must be positive")
    x = np.asarray(x, dtype=float)
    k, s0 = setup.k, setup.sigma0
    d, N, lam = setup.grating.period, setup.n_slits, setup.beam.lambda_dB
    a = math.pi * d * x / (lam * z)
    red = a - math.pi * np.round(a / math.pi)
    near = np.abs(red) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio2 = np.where(near, float(N * N), (np.sin(N * a) / np.sin(np.where(near, 1.0, a))) ** 2)
    out = np.exp(-2.0 * (k * s0 * x / z) ** 2) * ratio2
    return float(out) if out.ndim == 0 else out


def onaxis_profile(setup: TalbotSetup, Lambda, z_list) -> np.ndarray:
    """``(z, rho(0, z))`` rows for every requested ``z``."""
    z = np.asarray(z_list, dtype=float)
    if np.any(z < 0):
        raise ValueError("z must be non-negative")
    rho = np.array([density(0.0, float(zz), setup, Lambda) for zz in z])
    return np.column_stack([z, rho])
