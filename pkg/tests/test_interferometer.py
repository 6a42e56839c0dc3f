import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from biphoton_lab import units
from biphoton_lab.biphoton import (
    FilterSpec,
    SpectralDensity,
    SpectralGrid,
    apply_filter,
    gaussian_background,
)
from biphoton_lab.interferometer import (
    GridMismatch,
    Interferogram,
    MichelsonConfig,
    UndersampledCarrier,
    carrier_period_um,
    coherence,
    coherence_uniform,
    counting_rate,
    detected_spectrum,
    mix_densities,
    read_interferogram_csv,
    sample_counts,
    simulate_scan,
    write_interferogram_csv,
)
from conftest import DL_REF, OMEGA_SIGNAL, sinc2

ARM = "delta_is_arm_difference"
OPT = "delta_is_optical_path"


def line_density(n=101):
    grid = SpectralGrid(OMEGA_SIGNAL, 1.0, n)
    w = np.zeros(n)
    w[n // 2] = 1.0
    return SpectralDensity.from_unnormalized(grid, w)


def test_zero_delay_rate(sinc2_marginal):
    assert counting_rate(sinc2_marginal, 0.0, rate_scale=1000.0) == pytest.approx(1000.0, rel=1e-12)


@pytest.mark.parametrize("conv,factor", [(ARM, 2.0), (OPT, 1.0)])
def test_monochromatic_fringes(conv, factor):
    dL = np.linspace(-3.0, 3.0, 601)
    got = counting_rate(line_density(), dL, conv)
    want = 0.5 * (1.0 + np.cos(OMEGA_SIGNAL * factor * dL / units.C_UM_PER_PS))
    assert np.max(np.abs(got - want)) < 1e-12


def test_sinc2_coherence_is_triangle(sinc2_marginal):
    tau = np.linspace(-1.2 * DL_REF, 1.2 * DL_REF, 241)
    G = coherence(sinc2_marginal, tau)
    assert np.max(np.abs(G.imag)) < 1e-12
    triangle = np.clip(1.0 - np.abs(tau) / DL_REF, 0.0, None)
    # the default grid keeps 99.5% of the sinc^2 mass
    assert np.max(np.abs(G.real - triangle)) < 0.01


@pytest.mark.parametrize("tau", [0.1, 0.37, 0.6, 0.9])
def test_coherence_matches_quadrature(sinc2_marginal, tau):
    nu_max = sinc2_marginal.grid.nu_max
    Z = quad(lambda v: sinc2(0.5 * DL_REF * v), -nu_max, nu_max, limit=500)[0]
    want = quad(lambda v: sinc2(0.5 * DL_REF * v) * math.cos(v * tau), -nu_max, nu_max, limit=2000)[0] / Z
    assert coherence(sinc2_marginal, tau)[0].real == pytest.approx(want, abs=1e-4)


def test_chirp_z_matches_direct_sum(sinc2_marginal):
    tau0, dtau, m = -2.0, 0.0013, 3001
    fast = coherence_uniform(sinc2_marginal, tau0, dtau, m)
    slow = coherence(sinc2_marginal, tau0 + dtau * np.arange(m))
    assert np.max(np.abs(fast - slow)) < 1e-8


def test_rate_bounds_and_symmetry(sinc2_marginal, wide_filter):
    spec = detected_spectrum(sinc2_marginal, wide_filter, 0.3)
    dL = np.linspace(-300.0, 300.0, 12001)
    R = counting_rate(spec, dL, rate_scale=1000.0)
    assert np.all(R >= 0.0) and np.all(R <= 1000.0)
    assert np.max(np.abs(R - R[::-1])) < 1e-9 * 1000.0


def test_convention_scaling(sinc2_marginal):
    dL = np.linspace(-120.0, 120.0, 2001)
    arm = counting_rate(sinc2_marginal, dL, ARM)
    opt = counting_rate(sinc2_marginal, 2.0 * dL, OPT)
    assert np.max(np.abs(arm - opt)) < 1e-12
    assert carrier_period_um(OMEGA_SIGNAL, OPT) == pytest.approx(2.0 * carrier_period_um(OMEGA_SIGNAL, ARM))


def test_mass_split(sinc2_marginal, wide_filter):
    spec = detected_spectrum(sinc2_marginal, wide_filter, 0.3)
    filtered = apply_filter(sinc2_marginal, wide_filter)
    bg = gaussian_background(sinc2_marginal.grid, wide_filter)
    assert np.max(np.abs(spec.bin_masses - (0.7 * filtered.bin_masses + 0.3 * bg.bin_masses))) < 1e-6
    assert detected_spectrum(sinc2_marginal, wide_filter, 0.0).weights is not None


def test_mix_requires_shared_grid(sinc2_marginal):
    with pytest.raises(GridMismatch):
        mix_densities(sinc2_marginal, line_density(), 0.5)


def test_poisson_mean_equals_variance():
    means = np.full(10_000, 250.0)
    counts = sample_counts(means, seed=7)
    ratio = counts.mean() / counts.var()
    assert 0.95 <= ratio <= 1.05
    assert counts.mean() == pytest.approx(250.0, rel=0.01)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([2, 3, 8]))
def test_parallel_sampling_is_bit_identical(seed, workers):
    spec = line_density()
    cfg = MichelsonConfig(scan_min_um=-20.0, scan_max_um=20.0, noise="poisson", seed=seed)
    a = simulate_scan(spec, cfg, workers=1)
    b = simulate_scan(spec, cfg, workers=workers)
    assert np.array_equal(a.counts, b.counts)
    assert np.array_equal(a.counts, simulate_scan(spec, cfg, workers=1).counts)


def test_simulated_scan_matches_rate(sinc2_marginal):
    cfg = MichelsonConfig(scan_min_um=-50.0, scan_max_um=50.0, background_weight=0.0)
    gram = simulate_scan(sinc2_marginal, cfg)
    want = counting_rate(sinc2_marginal, gram.delta_L, rate_scale=cfg.rate_scale)
    assert np.max(np.abs(gram.counts - want)) < 1e-6
    assert gram.meta["michelson.path_convention"] == ARM
    assert gram.meta["center_omega_rad_per_ps"] == sinc2_marginal.grid.center_omega


def test_undersampled_carrier_rejected(sinc2_marginal):
    with pytest.raises(UndersampledCarrier):
        simulate_scan(sinc2_marginal, MichelsonConfig(step_um=0.2))
    gram = simulate_scan(sinc2_marginal, MichelsonConfig(step_um=1.0, envelope_only=True))
    tau = units.delay_from_path(gram.delta_L, ARM)
    triangle = np.clip(1.0 - np.abs(tau) / DL_REF, 0.0, None)
    assert np.max(np.abs(gram.counts / 500.0 - 1.0 - triangle)) < 0.02


def test_config_validation():
    for bad in (
        dict(scan_min_um=1.0, scan_max_um=0.0),
        dict(step_um=0.0),
        dict(background_weight=1.5),
        dict(noise="gaussian"),
        dict(path_convention="round_trip"),
    ):
        with pytest.raises(ValueError):
            MichelsonConfig(**bad)


def test_interferogram_csv_roundtrip(tmp_path):
    cfg = MichelsonConfig(scan_min_um=-5.0, scan_max_um=5.0, noise="poisson", seed=3)
    gram = simulate_scan(line_density(), cfg)
    path = tmp_path / "g.csv"
    write_interferogram_csv(gram, path, {"config_hash": "abc"})
    back = read_interferogram_csv(path)
    assert np.array_equal(back.counts, gram.counts)
    assert np.allclose(back.delta_L, gram.delta_L, rtol=0, atol=1e-9)
    assert back.meta["michelson.seed"] == 3
    assert back.meta["michelson.envelope_only"] is False
    assert back.meta["center_omega_rad_per_ps"] == gram.meta["center_omega_rad_per_ps"]


def test_interferogram_csv_errors(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("# a = 1\ndelta_L_um,counts\n0,1\n1,-2\n")
    with pytest.raises(ValueError, match=":4: malformed"):
        read_interferogram_csv(path)
    path.write_text("delta_L_um,counts\n0,1\n0,2\n")
    with pytest.raises(ValueError, match=":3: delta_L not strictly increasing"):
        read_interferogram_csv(path)
    path.write_text("x,y\n0,1\n")
    with pytest.raises(ValueError, match="column header"):
        read_interferogram_csv(path)


def test_interferogram_validation():
    with pytest.raises(ValueError):
        Interferogram(np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        Interferogram(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
