import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from talbotflow.model import reference_setup
from talbotflow.wavefield import (
    _phase_recurrence,
    coherent_density,
    coherent_wave,
    mode_amplitude,
    mode_gradient,
    mode_stack,
    pair_density_form,
)


def test_initial_mode_is_real_gaussian(small_setups):
    s = small_setups[3]
    x = np.linspace(-1e-6, 1e-6, 101)
    s0 = s.sigma0
    expect = (2 * math.pi * s0**2) ** -0.25 * np.exp(-((x - s.centers[0]) ** 2) / (4 * s0**2))
    np.testing.assert_allclose(mode_amplitude(1, x, 0.0, s), expect, rtol=1e-14, atol=0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 60.0))
def test_mode_stays_normalized(z_over_zT):
    s = reference_setup(1)
    z = z_over_zT * s.z_T
    w = 12 * s.sigma_z(z)
    val, _ = integrate.quad(lambda x: abs(mode_amplitude(1, x, z, s)) ** 2, -w, w, limit=200)
    assert val == pytest.approx(1.0, abs=1e-9)


def test_mode_index_bounds(small_setups):
    s = small_setups[3]
    for bad in (0, 4):
        with pytest.raises(IndexError):
            mode_amplitude(bad, 0.0, 0.0, s)
    with pytest.raises(ValueError):
        mode_amplitude(1, 0.0, -1.0, s)


def test_mode_gradient_matches_finite_difference(small_setups):
    s = small_setups[2]
    z = 0.37 * s.z_T
    x = np.linspace(-0.5e-6, 0.5e-6, 31)
    h = 1e-11
    fd = (mode_amplitude(2, x + h, z, s) - mode_amplitude(2, x - h, z, s)) / (2 * h)
    g = mode_gradient(2, x, z, s)
    assert np.max(np.abs(fd - g)) < 1e-6 * np.max(np.abs(g))


def test_mode_stack_matches_single_modes(setup50):
    x = np.linspace(-12e-6, 12e-6, 257)
    z = 0.83 * setup50.z_T
    amp, grad = mode_stack(x, z, setup50, gradient=True, cutoff=False)
    ref = np.array([mode_amplitude(n, x, z, setup50) for n in range(1, 51)])
    gref = np.array([mode_gradient(n, x, z, setup50) for n in range(1, 51)])
    scale = np.abs(ref).max()
    assert np.max(np.abs(amp - ref)) < 1e-12 * scale
    assert np.max(np.abs(grad - gref)) < 1e-12 * np.abs(gref).max()


def test_cutoff_only_drops_negligible_terms(setup50):
    x = np.linspace(-12e-6, 12e-6, 257)
    z = 0.4 * setup50.z_T
    cut = mode_stack(x, z, setup50)
    full = mode_stack(x, z, setup50, cutoff=False)
    pref = np.abs(full).max()
    assert np.max(np.abs(cut - full)) < 1e-19 * pref
    assert np.count_nonzero(cut == 0) > 0


def test_mode_stack_broadcast_z(small_setups):
    s = small_setups[3]
    x = np.array([-1e-7, 0.0, 2e-7])
    z = np.array([0.1, 0.2, 0.3]) * s.z_T
    amp = mode_stack(x, z, s, cutoff=False)
    for p in range(3):
        np.testing.assert_allclose(amp[:, p], mode_stack(x[p : p + 1], z[p], s, cutoff=False)[:, 0], rtol=1e-13)


def test_phase_recurrence_exact():
    u0 = np.linspace(-3e-6, 3e-6, 11)
    b, d, N = 2.3e11, 0.4e-6, 50
    rec = _phase_recurrence(u0, b, d, N)
    n = np.arange(N)[:, None]
    direct = np.exp(-1j * b * (u0[None, :] - n * d) ** 2)
    assert np.max(np.abs(rec - direct)) < 1e-11


def test_coherent_wave_shapes(small_setups):
    s = small_setups[2]
    assert isinstance(coherent_wave(0.0, 0.1, s), complex)
    assert coherent_wave(np.zeros((2, 3)), 0.1, s).shape == (2, 3)
    assert isinstance(coherent_density(0.0, 0.1, s), float)


def test_cosine_form_equals_complex_product():
    rng = np.random.default_rng(7)
    for N in (1, 2, 3, 4, 5):
        s = reference_setup(N)
        x = rng.uniform(-1.2 * N * s.grating.period, 1.2 * N * s.grating.period, 1000)
        z = rng.uniform(0.0, 3.0, 1000) * s.z_T
        a = coherent_density(x, z, s)
        b = pair_density_form(x, z, s)
        mask = a > 1e-8 * a.max()
        assert np.max(np.abs(a[mask] - b[mask]) / a[mask]) < 1e-10


def test_geometric_prefactor_differs_only_in_scale(small_setups):
    s = small_setups[3]
    z = 0.6 * s.z_T
    x = np.linspace(-1e-6, 1e-6, 51)
    ratio = pair_density_form(x, z, s, "geometric") / pair_density_form(x, z, s)
    np.testing.assert_allclose(ratio, math.sqrt(s.sigma_z(z) / s.sigma0), rtol=1e-12)
    with pytest.raises(ValueError):
        pair_density_form(x, z, s, "other")


def test_coherent_normalization(setup50):
    for z in (0.0, setup50.z_T, 50 * setup50.z_T):
        w = 10e-6 + 10 * setup50.sigma_z(z)
        x = np.linspace(-w, w, 400001)
        val = np.trapezoid(coherent_density(x, z, setup50), x)
        # neighbouring slit modes overlap slightly at z = 0
        assert val == pytest.approx(1.0, abs=2e-3)
