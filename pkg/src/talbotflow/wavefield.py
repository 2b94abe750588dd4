"""Propagated Gaussian slit modes and the coherent grating field."""

from __future__ import annotations

import math

import numpy as np

from .model import TalbotSetup

__all__ = [
    "EXPONENT_CUTOFF",
    "mode_amplitude",
    "mode_gradient",
    "mode_stack",
    "coherent_wave",
    "coherent_density",
    "pair_density_form",
]

# exp(-46) ~ 1e-20: anything smaller is dropped as an exact zero
EXPONENT_CUTOFF = 46.0


def _prefactor(sigma_t):
    # (2 pi sigma~^2)^(-1/4) on the principal branch; Re sigma~ > 0 keeps it continuous
    return (2.0 * math.pi) ** -0.25 * np.exp(-0.5 * np.log(sigma_t))


def mode_amplitude(n: int, x, z, setup: TalbotSetup):
    """Closed-form amplitude of slit ``n`` (1-based) at ``(x, z)``."""
    N = setup.n_slits
    if not 1 <= n <= N:
        raise IndexError(f"slit index {n} outside 1..{N}")
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("z must be non-negative")
    sigma_t = setup.sigma_tilde(z)
    u = np.asarray(x, dtype=float) - setup.centers[n - 1]
    out = _prefactor(sigma_t) * np.exp(-(u * u) / (4.0 * setup.sigma0 * sigma_t))
    return complex(out) if np.ndim(out) == 0 else out


def mode_gradient(n: int, x, z, setup: TalbotSetup):
    """Analytic x-derivative of :func:`mode_amplitude`."""
    sigma_t = setup.sigma_tilde(np.asarray(z, dtype=float))
    u = np.asarray(x, dtype=float) - setup.centers[n - 1]
    out = -u / (2.0 * setup.sigma0 * sigma_t) * mode_amplitude(n, x, z, setup)
    return complex(out) if np.ndim(out) == 0 else out


def _phase_recurrence(u0, b, d, N, block=8):
    """``exp(-i b (u0 - n d)**2)`` for ``n = 0..N-1`` by a product recurrence.

    Consecutive phases differ by ``b (2 u_n d - d**2)``, and that increment
    itself steps by the constant ``-2 b d**2``. The recurrence restarts from
    a direct evaluation every ``block`` slits: a far anchor carries a large
    phase whose rounding would otherwise leak into the nearby slits.
    """
    steps = np.exp(-2j * b * d * d * np.arange(block - 1))
    out = np.empty((N, len(u0)), dtype=complex)
    for j in range(0, N, block):
        m = min(block, N - j)
        u = u0 - j * d
        w = np.exp(-1j * b * u * u)
        out[j] = w
        if m > 1:
            s = np.exp(1j * b * (2.0 * u * d - d * d))
            np.cumprod(s[None, :] * steps[: m - 1, None], axis=0, out=out[j + 1 : j + m])
            out[j + 1 : j + m] *= w
    return out


def mode_stack(x, z, setup: TalbotSetup, gradient: bool = False, cutoff: bool = True):
    """Amplitudes of all slits at the broadcast points ``(x, z)``.

    Returns an ``(N, P)`` complex array (and the matching gradient array when
    ``gradient`` is set), where ``P`` is the flattened broadcast size. Modes
    whose amplitude exponent exceeds :data:`EXPONENT_CUTOFF` at a point are
    exact zeros there when ``cutoff`` is on.
    """
    sigma0 = setup.sigma0
    if np.ndim(z) == 0:
        # single slice: one complex width shared by every point
        if z < 0:
            raise ValueError("z must be non-negative")
        x = np.asarray(x, dtype=float).ravel()
        sigma_t = complex(setup.sigma_tilde(float(z)))
    else:
        x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
        x = x.ravel()
        z = z.ravel()
        if np.any(z < 0):
            raise ValueError("z must be non-negative")
        sigma_t = setup.sigma_tilde(z)
    u = x[None, :] - setup.centers[:, None]
    u2 = u * u
    c = 1.0 / (4.0 * sigma0 * sigma_t)
    # Re c = 1 / (4 sigma_z^2), so the real exponent is the amplitude decay
    er = -u2 * np.real(c)
    if cutoff:
        # clamp first: subnormal intermediates are very slow on x86
        keep = er >= -EXPONENT_CUTOFF
        mag = np.exp(np.maximum(er, -EXPONENT_CUTOFF))
        mag *= keep
    else:
        mag = np.exp(er)
    if np.ndim(sigma_t) == 0 and setup.n_slits > 2:
        rot = _phase_recurrence(u[0], np.imag(c), setup.grating.period, setup.n_slits)
    else:
        ph = -u2 * np.imag(c)
        rot = np.cos(ph) + 1j * np.sin(ph)
    amp = _prefactor(sigma_t) * (mag * rot)
    if not gradient:
        return amp
    grad = (-2.0 * c) * u * amp
    return amp, grad


def coherent_wave(x, z, setup: TalbotSetup):
    """Total coherent field ``N**-0.5 * sum_n phi_n`` with unit output amplitude."""
    shape = np.broadcast(np.asarray(x), np.asarray(z)).shape
    psi = mode_stack(x, z, setup).sum(axis=0) / math.sqrt(setup.n_slits)
    return psi.reshape(shape) if shape else complex(psi[0])


def coherent_density(x, z, setup: TalbotSetup):
    psi = coherent_wave(x, z, setup)
    out = psi.real**2 + psi.imag**2
    return float(out) if np.ndim(out) == 0 else out


def pair_density_form(x, z, setup: TalbotSetup, prefactor: str = "normalized"):
    """Coherent density as the real cosine double sum over slit pairs.

    ``prefactor="normalized"`` uses ``(2 pi sigma_z**2)**-0.5``, which keeps
    the total probability at one; ``"geometric"`` uses
    ``(2 pi sigma0 sigma_z)**-0.5`` and only agrees in shape.
    """
    x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
    shape = x.shape
    x = x.ravel()
    z = z.ravel()
    k, sigma0 = setup.k, setup.sigma0
    sz2 = setup.sigma_z(z) ** 2
    u2 = (x[None, :] - setup.centers[:, None]) ** 2
    total = np.zeros_like(x)
    for n in range(setup.n_slits):
        beta = (u2[n] + u2) / (4.0 * sz2)
        phase = z / (8.0 * k * sigma0**2 * sz2) * (u2[n] - u2)
        total += np.sum(np.cos(phase) * np.exp(-beta), axis=0)
    if prefactor == "normalized":
        pref = 1.0 / np.sqrt(2.0 * math.pi * sz2)
    elif prefactor == "geometric":
        pref = 1.0 / np.sqrt(2.0 * math.pi * sigma0 * np.sqrt(sz2))
    else:
        raise ValueError(f"unknown prefactor convention {prefactor!r}")
    out = (pref * total / setup.n_slits).reshape(shape)
    return float(out) if out.ndim == 0 else out
