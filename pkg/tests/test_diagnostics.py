import math

import numpy as np
import pytest
from scipy import optimize, signal

import talbotflow.diagnostics as diag
from talbotflow.decoherence import density
from talbotflow.diagnostics import (
    coherence_crossing,
    detect_momentum_plateaus,
    diffraction_order_positions,
    fringe_contrast,
    multislit_reference,
    onaxis_profile,
    revival_correlation,
)

LADDER = (0.0, 1e12, 1e13, 1e14, 1e15)


def test_revival_at_talbot_distance(setup50):
    r = revival_correlation(setup50, 0.0, setup50.z_T)
    assert r.defined and r.pearson >= 0.99
    half = revival_correlation(setup50, 0.0, setup50.z_T / 2, shift=setup50.grating.period / 2)
    assert half.pearson >= 0.99
    # unshifted half-period image is out of phase
    assert revival_correlation(setup50, 0.0, setup50.z_T / 2).pearson < 0
    assert r.window_half_width == 5 * setup50.grating.period


def test_revival_ladder_decreases(setup50):
    vals = [revival_correlation(setup50, L, setup50.z_T).pearson for L in LADDER]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 0.5


def test_revival_undefined_on_flat_profile(setup50, monkeypatch):
    monkeypatch.setattr(diag, "density", lambda x, z, s, L: np.ones_like(x))
    r = revival_correlation(setup50, 0.0, setup50.z_T)
    assert not r.defined


def test_revival_argument_checks(setup50):
    with pytest.raises(ValueError):
        revival_correlation(setup50, 0.0, -1.0)
    with pytest.raises(ValueError):
        revival_correlation(setup50, 0.0, 1.0, samples=100)


def test_fringe_contrast_falls_with_decoherence(setup50):
    c = [fringe_contrast(setup50, L, setup50.z_T / 2) for L in LADDER]
    assert all(a >= b for a, b in zip(c, c[1:]))
    assert c[0] > 0.99 and c[-1] < 0.5


def test_coherence_crossing_against_root_finder(setup50):
    zT = setup50.z_T
    for lam in (1e12, 1e13, 1e15):
        z = coherence_crossing(setup50, lam)
        ref = optimize.brentq(lambda q: 1 / math.sqrt(lam * q) - setup50.sigma_z(q), 1e-9, 100.0, xtol=1e-15)
        assert abs(z - ref) <= 1e-3 * zT
    assert 5 * zT <= coherence_crossing(setup50, 1e12) <= 7 * zT
    assert coherence_crossing(setup50, 1e15) < zT


def test_coherence_crossing_none_and_invalid(setup50):
    assert coherence_crossing(setup50, 1e-3) is None
    with pytest.raises(ValueError):
        coherence_crossing(setup50, 0.0)


def test_multislit_reference_shape(small_setups):
    s = small_setups[5]
    z = 1.0
    assert multislit_reference(0.0, z, s) == pytest.approx(25.0)
    spacing = s.beam.lambda_dB * z / s.grating.period
    x = np.linspace(0.0, spacing, 20001)
    ref = multislit_reference(x, z, s)
    np.testing.assert_allclose(ref, multislit_reference(-x, z, s), rtol=1e-12)
    inner = ref[1:-1] / np.exp(-2 * (s.k * s.sigma0 * x[1:-1] / z) ** 2)
    peaks, _ = signal.find_peaks(inner)
    assert len(peaks) == s.n_slits - 2
    # principal maximum limit
    assert multislit_reference(spacing, z, s) / math.exp(-2 * (s.k * s.sigma0 * spacing / z) ** 2) == pytest.approx(25.0)
    with pytest.raises(ValueError):
        multislit_reference(0.0, 0.0, s)


def test_far_field_density_follows_grating_law(small_setups):
    s = small_setups[5]
    z = 1.0
    spacing = s.beam.lambda_dB * z / s.grating.period
    x = np.linspace(-2.5 * spacing, 2.5 * spacing, 4001)
    rho = density(x, z, s)
    ref = multislit_reference(x, z, s)
    assert np.corrcoef(rho, ref)[0, 1] > 0.999


def test_order_positions(setup50):
    z = 50 * setup50.z_T
    rep = {r.order: r for r in diffraction_order_positions(setup50, 0.0, z)}
    assert set(rep) == {-2, -1, 0, 1, 2}
    for l in (1, 2):
        assert rep[l].peak_x == pytest.approx(40e-6 * l, rel=0.05)
        assert rep[l].peak_x == pytest.approx(-rep[-l].peak_x, rel=1e-9)
    assert abs(rep[0].peak_x) < 1e-12 * 40e-6


def test_orders_vanish_when_incoherent(setup50):
    rep = diffraction_order_positions(setup50, 1e15, 50 * setup50.z_T)
    assert [r.order for r in rep] == [0]


def test_order_positions_needs_far_field(setup50):
    with pytest.raises(ValueError):
        diffraction_order_positions(setup50, 0.0, 5 * setup50.z_T)
    with pytest.raises(ValueError):
        diffraction_order_positions(setup50, 0.0, 50 * setup50.z_T, max_order=0)


def test_plateaus(setup50):
    z = 50 * setup50.z_T
    levels = detect_momentum_plateaus(setup50, 0.0, z, density_cut=3e-3)
    assert len(levels) == 5
    np.testing.assert_allclose(levels, [-2, -1, 0, 1, 2], atol=0.1)
    assert len(detect_momentum_plateaus(setup50, 0.0, z)) == 3
    assert detect_momentum_plateaus(setup50, 1e15, z) == []
    with pytest.raises(ValueError):
        detect_momentum_plateaus(setup50, 0.0, z, density_cut=1.5)


def test_plateaus_absent_for_single_slit(small_setups):
    s = small_setups[1]
    assert detect_momentum_plateaus(s, 0.0, 50 * s.z_T, density_cut=3e-3) == []


def test_onaxis_profile(setup50):
    zs = [0.0, 0.5 * setup50.z_T, setup50.z_T]
    prof = onaxis_profile(setup50, 0.0, zs)
    assert prof.shape == (3, 2)
    np.testing.assert_array_equal(prof[:, 0], zs)
    assert prof[0, 1] == density(0.0, 0.0, setup50)
    with pytest.raises(ValueError):
        onaxis_profile(setup50, 0.0, [-1.0])
