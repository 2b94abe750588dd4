"""Probability-flow streamlines ``dx/dz = v_eff(x, z)``.

Streamlines are advanced with classical RK4 over a fixed base lattice in z.
Each base interval is split into ``2**level`` substeps, where ``level`` is
the smallest value for which every substep passes a step-doubling error
test. A whole ensemble is integrated as one vector, but refinement is
decided per streamline, so each result is independent of its companions.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._kernels import fast_slice_fields
from .decoherence import DENSITY_FLOOR, density_scale, offset_damping
from .model import GratingSpec, TalbotSetup

__all__ = [
    "Termination",
    "StepControl",
    "Streamline",
    "SeedEnsemble",
    "OrderingReport",
    "seed_ensemble",
    "integrate_streamline",
    "integrate_ensemble",
    "ordering_check",
]


class Termination(str, Enum):
    COMPLETED = "completed"
    ENTERED_INVALID_REGION = "entered_invalid_region"
    STEP_UNDERFLOW = "step_underflow"


@dataclass(frozen=True)
class StepControl:
    """Step policy; lengths given as fractions of the Talbot distance and the period.

    ``base_fraction`` sets the base step ``z_T * base_fraction``; the local
    error tolerance is ``tol_fraction * d``; at most ``max_halvings``
    successive halvings are tried before giving up.
    """

    base_fraction: float = 1.0 / 2000.0
    tol_fraction: float = 1e-4
    max_halvings: int = 10

    def base_step(self, setup: TalbotSetup) -> float:
        return setup.z_T * self.base_fraction

    def tolerance(self, setup: TalbotSetup) -> float:
        return self.tol_fraction * setup.grating.period


@dataclass
class Streamline:
    seed_x: float
    z: np.ndarray
    x: np.ndarray
    terminated_early: bool = False
    reason: Termination = Termination.COMPLETED

    def __post_init__(self):
        if len(self.z) != len(self.x):
            raise ValueError("z and x sample counts differ")
        if len(self.z) > 1 and np.any(np.diff(self.z) <= 0):
            raise ValueError("z samples must be strictly increasing")


@dataclass(frozen=True)
class SeedEnsemble:
    seeds: np.ndarray
    per_slit: int


def seed_ensemble(spec: GratingSpec, per_slit: int) -> SeedEnsemble:
    """Seeds spread evenly across the geometric width of every slit."""
    if per_slit < 1:
        raise ValueError("per_slit must be >= 1")
    if per_slit == 1:
        offsets = np.zeros(1)
    else:
        offsets = spec.slit_width * (np.arange(per_slit) / (per_slit - 1) - 0.5)
    seeds = (spec.centers[:, None] + offsets[None, :]).ravel()
    return SeedEnsemble(seeds, per_slit)


def _velocity(x, z, setup, Lambda):
    rho, cur = fast_slice_fields(x, z, setup, offset_damping(z, Lambda, setup))
    floor = DENSITY_FLOOR * density_scale(z, setup)
    ok = rho >= floor
    v = np.full_like(rho, np.nan)
    v[ok] = cur[ok] / rho[ok]
    return v


def _rk4(x, z, h, setup, Lambda, k1=None):
    if k1 is None:
        k1 = _velocity(x, z, setup, Lambda)
    k2 = _velocity(x + 0.5 * h * k1, z + 0.5 * h, setup, Lambda)
    k3 = _velocity(x + 0.5 * h * k2, z + 0.5 * h, setup, Lambda)
    k4 = _velocity(x + h * k3, z + h, setup, Lambda)
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _advance(x, za, zb, level, tol, setup, Lambda):
    """Cross ``[za, zb]`` in ``2**level`` doubled substeps; return (x, failed, invalid)."""
    nsub = 1 << level
    h = (zb - za) / nsub
    failed = np.zeros(x.shape, dtype=bool)
    z = za
    for j in range(nsub):
        k1 = _velocity(x, z, setup, Lambda)
        full = _rk4(x, z, h, setup, Lambda, k1)
        half = _rk4(x, z, 0.5 * h, setup, Lambda, k1)
        half = _rk4(half, z + 0.5 * h, 0.5 * h, setup, Lambda)
        with np.errstate(invalid="ignore"):
            failed |= np.abs(half - full) / 15.0 > tol
        x = half
        z = za + (j + 1) * h
    invalid = ~np.isfinite(x)
    return x, failed & ~invalid, invalid


def _z_lattice(z_start, z_end, h0):
    n = max(1, int(math.ceil((z_end - z_start) / h0 - 1e-9)))
    zs = z_start + h0 * np.arange(n + 1)
    zs[-1] = z_end
    if n > 1 and zs[-1] - zs[-2] <= 0:
        zs = np.delete(zs, -2)
    return zs


def integrate_ensemble(
    seeds,
    z_range: tuple[float, float],
    setup: TalbotSetup,
    Lambda=0.0,
    control: StepControl | None = None,
    threads: int = 1,
) -> list[Streamline]:
    """Integrate every seed over ``z_range``; samples sit on the shared base lattice.

    With ``threads > 1`` the seeds are split into contiguous chunks run
    concurrently; since refinement is per streamline the result is the same.
    """
    if isinstance(seeds, SeedEnsemble):
        seeds = seeds.seeds
    seeds = np.atleast_1d(np.asarray(seeds, dtype=float))
    z_start, z_end = map(float, z_range)
    if not (0 <= z_start < z_end):
        raise ValueError(f"need 0 <= z_start < z_end, got {z_range!r}")
    if not np.all(np.isfinite(seeds)):
        raise ValueError("seeds must be finite")
    control = control or StepControl()
    zs = _z_lattice(z_start, z_end, control.base_step(setup))
    if threads > 1 and len(seeds) > 1:
        chunks = [c for c in np.array_split(seeds, threads) if c.size]
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = pool.map(lambda c: _integrate(c, zs, setup, Lambda, control), chunks)
            return [s for part in parts for s in part]
    return _integrate(seeds, zs, setup, Lambda, control)


def _integrate(seeds, zs, setup, Lambda, control):
    z_start = zs[0]
    tol = control.tolerance(setup)

    S = len(seeds)
    xs = np.full((len(zs), S), np.nan)
    xs[0] = seeds
    last = np.zeros(S, dtype=int)
    reason = [Termination.COMPLETED] * S
    alive = np.ones(S, dtype=bool)
    # a seed already sitting in a node region never starts
    start_bad = ~np.isfinite(_velocity(seeds, z_start, setup, Lambda))
    for s in np.flatnonzero(start_bad):
        alive[s] = False
        reason[s] = Termination.ENTERED_INVALID_REGION

    for i in range(len(zs) - 1):
        pending = np.flatnonzero(alive)
        level = 0
        while pending.size:
            xn, failed, invalid = _advance(xs[i, pending], zs[i], zs[i + 1], level, tol, setup, Lambda)
            good = ~failed & ~invalid
            xs[i + 1, pending[good]] = xn[good]
            last[pending[good]] = i + 1
            for s in pending[invalid]:
                alive[s] = False
                reason[s] = Termination.ENTERED_INVALID_REGION
            pending = pending[failed]
            if pending.size and level >= control.max_halvings:
                for s in pending:
                    alive[s] = False
                    reason[s] = Termination.STEP_UNDERFLOW
                break
            level += 1
        if not alive.any():
            break

    out = []
    for s in range(S):
        n = last[s] + 1
        out.append(
            Streamline(
                seed_x=float(seeds[s]),
                z=zs[:n].copy(),
                x=xs[:n, s].copy(),
                terminated_early=reason[s] is not Termination.COMPLETED,
                reason=reason[s],
            )
        )
    return out


def integrate_streamline(
    seed: float,
    z_start: float,
    z_end: float,
    setup: TalbotSetup,
    Lambda=0.0,
    control: StepControl | None = None,
) -> Streamline:
    return integrate_ensemble([seed], (z_start, z_end), setup, Lambda, control)[0]


@dataclass(frozen=True)
class OrderingReport:
    crossings: int
    first_crossing_z: float | None


def ordering_check(streamlines: list[Streamline]) -> OrderingReport:
    """Count adjacent streamline pairs whose transverse order flips.

    Streamlines are ordered by seed; at every shared z sample the ones still
    running are compared with their running neighbours. Each inverted pair
    is counted once.
    """
    if not streamlines:
        return OrderingReport(0, None)
    order = sorted(range(len(streamlines)), key=lambda i: streamlines[i].seed_x)
    lines = [streamlines[i] for i in order]
    ref = max(lines, key=lambda s: len(s.z)).z
    for s in lines:
        if not np.array_equal(s.z, ref[: len(s.z)]):
            raise ValueError("streamlines do not share a z sample lattice")
    X = np.full((len(ref), len(lines)), np.nan)
    for j, s in enumerate(lines):
        X[: len(s.x), j] = s.x

    pairs = set()
    first = None
    complete = np.all(np.isfinite(X), axis=1)
    if complete.any():
        rows = np.flatnonzero(complete)
        inv = np.diff(X[rows], axis=1) < 0
        for r, c in zip(*np.nonzero(inv)):
            pairs.add((c, c + 1))
            z = ref[rows[r]]
            first = z if first is None else min(first, z)
    for r in np.flatnonzero(~complete):
        cols = np.flatnonzero(np.isfinite(X[r]))
        for a, b in zip(cols[:-1], cols[1:]):
            if X[r, b] < X[r, a]:
                pairs.add((a, b))
                first = ref[r] if first is None else min(first, ref[r])
    return OrderingReport(len(pairs), None if first is None else float(first))
