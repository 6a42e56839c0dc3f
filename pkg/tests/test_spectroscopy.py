import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.signal import windows

from biphoton_lab import units
from biphoton_lab.biphoton import SpectralDensity, SpectralGrid, build_state, signal_marginal
from biphoton_lab.interferometer import Interferogram, MichelsonConfig, UndersampledCarrier, simulate_scan
from biphoton_lab.spectroscopy import (
    Envelope,
    InsufficientSamples,
    bandwidth_from_base,
    base_from_bandwidth,
    extract_envelope,
    fit_notch,
    fit_report,
    gaussian_coherence_fwhm_um,
    natural_grid,
    recover_spectrum,
)
from conftest import DL_REF, OMEGA_SIGNAL, sinc2

ARM = "delta_is_arm_difference"
BASE_REF = 2.0 * DL_REF * units.C_UM_PER_PS / 2.0  # full base c * DL for the arm convention


def rel_l2(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def make_spectra(grid):
    s = signal_marginal(build_state(grid, DL_REF))
    g = SpectralDensity.from_unnormalized(grid, np.exp(-0.5 * (grid.nu / 5.0) ** 2))
    c = SpectralDensity.from_unnormalized(grid, 0.7 * s.weights + 0.3 * g.weights)
    return {"sinc2": s, "gaussian": g, "composite": c}


@pytest.fixture(scope="module")
def clean_gram(sinc2_marginal):
    return simulate_scan(sinc2_marginal, MichelsonConfig(background_weight=0.0))


@pytest.fixture(scope="module")
def clean_fit(clean_gram):
    return fit_notch(extract_envelope(clean_gram))


def test_monochromatic_line_recovered():
    dL = np.arange(-100.0, 100.0 + 1e-9, 0.05)
    tau = units.delay_from_path(dL, ARM)
    gram = Interferogram(dL, 500.0 * (1.0 + np.cos(OMEGA_SIGNAL * tau)), {"center_omega_rad_per_ps": OMEGA_SIGNAL})
    grid = natural_grid(gram, OMEGA_SIGNAL, ARM)
    rec = recover_spectrum(gram)
    assert rec.grid == grid
    c = grid.center_index
    assert int(np.argmax(rec.weights)) == c
    # oracle: the line shape is the window's transform sampled at half the natural resolution
    w = windows.tukey(dL.size, 0.5)
    W = np.abs(np.fft.fft(w, 2 * (dL.size - 1)))
    for k in (1, 2):
        assert rec.weights[c + k] / rec.weights[c] == pytest.approx(W[k] / W[0], rel=1e-3)
        assert rec.weights[c - k] == pytest.approx(rec.weights[c + k], rel=1e-6)
    assert "window=tukey" in rec.flags


@pytest.mark.parametrize("name", ["sinc2", "gaussian", "composite"])
def test_roundtrip_recovery(default_grid, name):
    d = make_spectra(default_grid)[name]
    gram = simulate_scan(d, MichelsonConfig(background_weight=0.0))
    rec = recover_spectrum(gram, grid=default_grid)
    assert rel_l2(rec.weights, d.weights) < 0.01


def test_recovered_spectrum_resimulates_same_envelope(default_grid, clean_gram):
    rec = recover_spectrum(clean_gram, grid=default_grid)
    again = simulate_scan(rec, MichelsonConfig(background_weight=0.0))
    a = extract_envelope(clean_gram).visibility
    b = extract_envelope(again).visibility
    assert np.max(np.abs(a - b)) < 0.02 * a.max()


def test_recover_errors(clean_gram):
    short = Interferogram(clean_gram.delta_L[:10], clean_gram.counts[:10], clean_gram.meta)
    with pytest.raises(InsufficientSamples, match="insufficient samples"):
        recover_spectrum(short)
    coarse = Interferogram(clean_gram.delta_L[::20], clean_gram.counts[::20], clean_gram.meta)
    with pytest.raises(UndersampledCarrier):
        recover_spectrum(coarse)
    with pytest.raises(ValueError):
        recover_spectrum(clean_gram, window="kaiser")


def test_envelope_is_triangle(clean_gram):
    env = extract_envelope(clean_gram)
    tau = units.delay_from_path(env.delta_L, ARM)
    triangle = np.clip(1.0 - np.abs(tau) / DL_REF, 0.0, None)
    assert np.max(np.abs(env.visibility - triangle)) < 0.01
    assert np.allclose(env.mean_rate, 500.0, rtol=2e-3)
    assert np.allclose(env.upper - env.lower, 2.0 * env.mean_rate * env.visibility)


def test_envelope_requires_three_periods(clean_gram):
    with pytest.raises(ValueError):
        extract_envelope(clean_gram, lowpass_periods=2.0)


def test_clean_fit_base(clean_fit):
    assert clean_fit.base_width == pytest.approx(BASE_REF, rel=0.005)
    assert clean_fit.peak_visibility == pytest.approx(1.0, abs=0.02)
    assert clean_fit.flags == ()


def synthetic_envelope(base=225.0, v0=0.8, noise=0.0, seed=0, step=0.5):
    x = np.arange(-300.0, 300.0 + 1e-9, step)
    y = v0 * np.clip(1.0 - np.abs(x) / (0.5 * base), 0.0, None)
    if noise:
        y = y + np.random.default_rng(seed).normal(0.0, noise, x.size)
    return Envelope(x, y, np.full(x.size, 500.0))


@pytest.mark.parametrize("base", [60.0, 225.0, 400.0])
def test_fit_exact_triangle(base):
    fit = fit_notch(synthetic_envelope(base), spike="none")
    assert fit.base_width == pytest.approx(base, rel=0.005)
    assert fit.peak_visibility == pytest.approx(0.8, rel=1e-6)
    assert fit.residual_rms < 1e-6


def test_fit_under_noise_monte_carlo():
    bases = np.array([fit_notch(synthetic_envelope(noise=0.03, seed=s, step=1.0)).base_width for s in range(100)])
    assert np.all(np.abs(bases - 225.0) / 225.0 < 0.03)
    assert abs(bases.mean() - 225.0) / 225.0 < 0.005


def test_poisson_scan_fit(sinc2_marginal):
    cfg = MichelsonConfig(background_weight=0.0, noise="poisson", seed=11)
    fit = fit_notch(extract_envelope(simulate_scan(sinc2_marginal, cfg)))
    assert fit.base_width == pytest.approx(BASE_REF, rel=0.02)


def test_flat_envelope_flagged():
    x = np.arange(-300.0, 300.0 + 1e-9, 0.5)
    env = Envelope(x, np.full(x.size, 0.5), np.full(x.size, 500.0))
    assert "h_at_scan_limit" in fit_notch(env).flags


def test_fit_needs_samples():
    x = np.linspace(-10.0, 10.0, 10)
    with pytest.raises(InsufficientSamples):
        fit_notch(Envelope(x, np.ones(10), np.ones(10)))
    with pytest.raises(ValueError):
        fit_notch(synthetic_envelope(), spike="ignore")


def test_fit_is_scale_equivariant(clean_gram, clean_fit):
    k = 3.7
    scaled = Interferogram(clean_gram.delta_L, k * clean_gram.counts, clean_gram.meta)
    env = extract_envelope(scaled)
    fit = fit_notch(env)
    assert fit.base_width == pytest.approx(clean_fit.base_width, rel=1e-9)
    ref = clean_fit.envelope.mean_rate
    assert np.allclose(fit.peak_visibility * env.mean_rate, k * clean_fit.peak_visibility * ref, rtol=1e-9)


def test_spike_feature(sinc2_marginal):
    from biphoton_lab.biphoton import FilterSpec
    from biphoton_lab.interferometer import detected_spectrum
    from biphoton_lab.spectroscopy import spike_fwhm

    filt = FilterSpec(702.2, 83.0)
    nu_max = filt.detuning_extent(OMEGA_SIGNAL)
    grid = SpectralGrid.with_spacing(OMEGA_SIGNAL, nu_max, sinc2_marginal.grid.spacing)
    spec = detected_spectrum(signal_marginal(build_state(grid, DL_REF)), filt, 0.3)
    gram = simulate_scan(spec, MichelsonConfig(scan_min_um=-150.0, scan_max_um=150.0))
    fit = fit_notch(extract_envelope(gram), spike="fit")
    oracle = gaussian_coherence_fwhm_um(702.2, 83.0, ARM)
    assert oracle == pytest.approx(2.6215, abs=1e-4)
    assert spike_fwhm(fit) == pytest.approx(oracle, rel=0.2)
    assert fit.spike_amplitude > 0.2
    assert fit.base_width == pytest.approx(BASE_REF, rel=0.02)


def test_bandwidth_numbers():
    x_half = brentq(lambda x: sinc2(x) - 0.5, 1.0, 2.0)
    bw = bandwidth_from_base(225.0)
    DL = 225.0 / units.C_UM_PER_PS
    assert bw.DL == pytest.approx(DL, rel=1e-12)
    # FWHM in nu is 4 x_half / DL; THz divides by 2 pi
    assert bw.fwhm_frequency == pytest.approx(4.0 * x_half / DL / (2.0 * math.pi), rel=1e-6)
    assert bw.fwhm_frequency == pytest.approx(1.180, abs=1e-3)
    assert bw.fwhm_wavelength == pytest.approx(702.2**2 * bw.fwhm_frequency / 299792.458, rel=1e-12)
    assert bw.fwhm_wavelength == pytest.approx(1.94, abs=0.005)


def test_reverse_bandwidth_check():
    df = 2.2 * 299792.458 / 702.2**2
    assert df == pytest.approx(1.34, abs=0.005)
    assert bandwidth_from_base(base_from_bandwidth(2.2)).fwhm_frequency == pytest.approx(df, rel=1e-12)


def test_bandwidth_vanishes_for_long_base():
    widths = [bandwidth_from_base(b).fwhm_wavelength for b in (1e2, 1e4, 1e6, 1e9)]
    assert all(a > b for a, b in zip(widths, widths[1:]))
    assert widths[-1] < 1e-6


@settings(max_examples=100, deadline=None)
@given(
    st.floats(1e-3, 1e3),
    st.floats(200.0, 2000.0),
    st.sampled_from(["sinc2", "gaussian"]),
    st.sampled_from([ARM, "delta_is_optical_path"]),
)
def test_bandwidth_inverse_identity(dlam, ref, model, conv):
    base = base_from_bandwidth(dlam, ref, model, conv)
    assert bandwidth_from_base(base, ref, model, conv).fwhm_wavelength == pytest.approx(dlam, rel=1e-9)


def test_bandwidth_rejects_bad_input():
    with pytest.raises(ValueError):
        bandwidth_from_base(0.0)
    with pytest.raises(ValueError):
        bandwidth_from_base(225.0, model="lorentzian")
    with pytest.raises(ValueError):
        base_from_bandwidth(-1.0)


def test_fit_report_format(clean_fit):
    text = fit_report(clean_fit, bandwidth_from_base(clean_fit.base_width))
    rows = dict(line.split(" = ", 1) for line in text.splitlines())
    assert float(rows["base_width_um"]) == clean_fit.base_width
    assert "np.float64" not in text
    assert rows["bandwidth_model"] == "sinc2"
