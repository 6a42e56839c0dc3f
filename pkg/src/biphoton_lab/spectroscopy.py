"""Inverse analysis of single-photon interferograms.

- recover_spectrum: windowed Fourier inversion back onto a detuning grid
- extract_envelope: quadrature demodulation at the carrier
- fit_notch: triangle ("notch") fit of the visibility envelope
- bandwidth_from_base: triangle base width -> sinc^2 bandwidth
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.signal import windows

from . import units
from ._numeric import half_max_width, uniform_fourier_sum
from .biphoton import SpectralDensity, SpectralGrid
from .interferometer import Interferogram, UndersampledCarrier, carrier_period_um

MIN_FIT_SAMPLES = 20
WINDOWS = ("tukey", "hann", "none")
TUKEY_ALPHA = 0.5
# measured reference values the analysis is compared against
REFERENCE_BASE_UM = 225.0
REFERENCE_BANDWIDTH_NM = 2.2

# sinc^2(x) = 1/2
SINC2_HALF_X = brentq(lambda x: (math.sin(x) / x) ** 2 - 0.5, 1.0, 2.0, xtol=1e-15)
# FWHM in Hz times DL in s for a sinc^2(DL nu / 2) spectrum, nu angular
SINC2_TIME_BANDWIDTH = 2.0 * SINC2_HALF_X / math.pi
GAUSS_TIME_BANDWIDTH = 4.0 * math.log(2.0) / math.pi


class InsufficientSamples(ValueError):
    pass


class NotchFitError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


def _convention(gram: Interferogram, path_convention: str | None) -> str:
    if path_convention is not None:
        return path_convention
    return str(gram.meta.get("michelson.path_convention", "delta_is_arm_difference"))


def _center_omega(gram: Interferogram, center_omega: float | None) -> float:
    if center_omega is not None:
        return float(center_omega)
    if "center_omega_rad_per_ps" not in gram.meta:
        raise ValueError("center_omega not given and not recorded in the interferogram metadata")
    return float(gram.meta["center_omega_rad_per_ps"])


def _window(name: str, n: int) -> np.ndarray:
    if name == "none":
        return np.ones(n)
    if name == "hann":
        return windows.hann(n, sym=True)
    if name == "tukey":
        return windows.tukey(n, TUKEY_ALPHA, sym=True)
    raise ValueError(f"unknown window {name!r}; choose from {WINDOWS}")


def natural_grid(gram: Interferogram, center_omega: float, path_convention: str, oversample: int = 2) -> SpectralGrid:
    """Grid with spacing pi / (oversample/2 * tau span), up to half the carrier or Nyquist."""
    tau = units.delay_from_path(gram.delta_L, path_convention)
    span = float(tau[-1] - tau[0])
    dtau = span / (tau.size - 1)
    spacing = 2.0 * math.pi / (oversample * span)
    nu_max = min(0.5 * center_omega, math.pi / dtau - center_omega)
    if nu_max <= spacing:
        raise UndersampledCarrier(f"Nyquist limit {math.pi / dtau:.6g} rad/ps leaves no band around the carrier")
    return SpectralGrid.with_spacing(center_omega, nu_max, spacing)


def recover_spectrum(
    gram: Interferogram,
    center_omega: float | None = None,
    grid: SpectralGrid | None = None,
    window: str = "tukey",
    path_convention: str | None = None,
) -> SpectralDensity:
    """Fourier-spectroscopy inversion of a carrier-resolving scan.

    Subtracts the mean rate, applies the window over the full scan and
    evaluates the cosine transform at omega + nu for every grid point.
    """
    if gram.meta.get("michelson.envelope_only") is True:
        raise UndersampledCarrier("envelope-only interferogram carries no fringes to invert")
    if gram.delta_L.size < MIN_FIT_SAMPLES:
        raise InsufficientSamples(f"insufficient samples: {gram.delta_L.size} < {MIN_FIT_SAMPLES}")
    if not gram.is_uniform():
        raise ValueError("recover_spectrum needs uniformly sampled delta_L")
    conv = _convention(gram, path_convention)
    omega = _center_omega(gram, center_omega)
    if grid is None:
        grid = natural_grid(gram, omega, conv)
    tau = units.delay_from_path(gram.delta_L, conv)
    dtau = float(tau[1] - tau[0])
    nyquist = math.pi / dtau
    if omega + grid.nu_max >= nyquist:
        raise UndersampledCarrier(
            f"undersampled carrier: highest frequency {omega + grid.nu_max:.6g} rad/ps exceeds "
            f"the Nyquist limit {nyquist:.6g} rad/ps of the {gram.step:.4g} um sampling"
        )
    x = (gram.counts - gram.counts.mean()) * _window(window, gram.counts.size)
    F = uniform_fourier_sum(x, float(tau[0]), dtau, omega + grid.nu_min, grid.spacing, grid.n_points, sign=-1)
    return SpectralDensity.from_unnormalized(grid, F.real * dtau, "recovered", (f"window={window}",))


@dataclass(frozen=True)
class Envelope:
    delta_L: np.ndarray
    visibility: np.ndarray
    mean_rate: np.ndarray
    flags: tuple[str, ...] = ()

    @property
    def upper(self) -> np.ndarray:
        return self.mean_rate * (1.0 + self.visibility)

    @property
    def lower(self) -> np.ndarray:
        return self.mean_rate * (1.0 - self.visibility)

    def to_csv(self) -> str:
        lines = [f"# flags: {','.join(self.flags)}"] if self.flags else []
        lines.append("delta_L_um,visibility,upper,lower")
        lines += [
            f"{d:.10g},{v:.10g},{u:.10g},{lo:.10g}"
            for d, v, u, lo in zip(self.delta_L, self.visibility, self.upper, self.lower)
        ]
        return "\n".join(lines) + "\n"


def lowpass_length(step_um: float, period_um: float, periods: float) -> int:
    """Odd smoothing length spanning at least ``periods`` carrier fringes."""
    n = int(math.ceil(periods * period_um / step_um))
    return n if n % 2 else n + 1


def lowpass_kernel(m: int) -> np.ndarray:
    # Blackman weighting: a boxcar cannot span an integer number of fringes
    # when the fringe is not a whole number of samples, and leaks DC.
    k = windows.blackman(m + 2, sym=True)[1:-1]
    return k / k.sum()


def extract_envelope(
    gram: Interferogram,
    center_omega: float | None = None,
    lowpass_periods: float = 4.0,
    path_convention: str | None = None,
) -> Envelope:
    """Fringe visibility by quadrature demodulation at the carrier.

    V = 2 |<(R - <R>) exp(-i omega tau)>| / <R> with <.> a Blackman-weighted
    moving average over ``lowpass_periods`` fringes. Samples within half an
    averaging window of the scan ends are dropped.
    """
    n = gram.delta_L.size
    if n < MIN_FIT_SAMPLES:
        raise InsufficientSamples(f"insufficient samples: {n} < {MIN_FIT_SAMPLES}")
    if gram.meta.get("michelson.envelope_only") is True:
        top = float(gram.meta.get("michelson.rate_scale", 1.0)) * float(gram.meta.get("michelson.dwell_time", 1.0))
        mean = np.full(n, 0.5 * top)
        vis = np.clip(gram.counts / mean - 1.0, 0.0, None)
        return Envelope(gram.delta_L, vis, mean, ("envelope-only",))
    if lowpass_periods < 3:
        raise ValueError("low-pass must span at least 3 carrier periods")
    if not gram.is_uniform():
        raise ValueError("extract_envelope needs uniformly sampled delta_L")
    conv = _convention(gram, path_convention)
    omega = _center_omega(gram, center_omega)
    period = carrier_period_um(omega, conv)
    if gram.step > 0.25 * period:
        raise UndersampledCarrier(
            f"undersampled carrier: step {gram.step:.4g} um exceeds a quarter fringe ({0.25 * period:.4g} um)"
        )
    m = lowpass_length(gram.step, period, lowpass_periods)
    if 2 * m >= n:
        raise InsufficientSamples(f"insufficient samples: scan of {n} points too short for the {m}-point low-pass")
    kernel = lowpass_kernel(m)
    half = m // 2
    tau = units.delay_from_path(gram.delta_L, conv)
    local_mean = np.convolve(gram.counts, kernel, mode="same")
    ac = (gram.counts - local_mean)[half : n - half]
    iq = np.convolve(ac * np.exp(-1j * omega * tau[half : n - half]), kernel, mode="valid")
    mean = local_mean[2 * half : n - 2 * half]
    with np.errstate(divide="ignore", invalid="ignore"):
        vis = np.where(mean > 0, 2.0 * np.abs(iq) / mean, 0.0)
    return Envelope(gram.delta_L[2 * half : n - 2 * half], vis, mean)


@dataclass(frozen=True)
class EnvelopeFit:
    base_width: float
    peak_visibility: float
    center_offset: float
    residual_rms: float
    envelope: Envelope | None = None
    spike_mode: str = "mask"
    spike_amplitude: float = 0.0
    spike_sigma: float = 0.0
    n_used: int = 0
    iterations: int = 0
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.base_width > 0:
            raise ValueError("base_width must be > 0")
        if not self.residual_rms >= 0:
            raise ValueError("residual_rms must be >= 0")

    @property
    def half_width(self) -> float:
        return 0.5 * self.base_width

    def triangle(self, delta_L) -> np.ndarray:
        d = np.abs(np.asarray(delta_L, dtype=float) - self.center_offset)
        return self.peak_visibility * np.clip(1.0 - d / self.half_width, 0.0, None)

    def model(self, delta_L) -> np.ndarray:
        out = self.triangle(delta_L)
        if self.spike_amplitude and self.spike_sigma > 0:
            d = np.asarray(delta_L, dtype=float) - self.center_offset
            out = out + self.spike_amplitude * np.exp(-0.5 * (d / self.spike_sigma) ** 2)
        return out


def _golden(f, lo, hi, tol, max_iter):
    """Golden-section minimum of f on [lo, hi]; returns (x, f(x), iterations, converged)."""
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol * max(1.0, abs(a) + abs(b)) and it < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
        it += 1
    x, fx = (c, fc) if fc <= fd else (d, fd)
    return x, fx, it, b - a <= tol * max(1.0, abs(a) + abs(b))


def _bracketed_golden(f, lo, hi, n_coarse, tol, max_iter):
    """Coarse scan to bracket the global minimum, then golden-section refinement."""
    xs = np.linspace(lo, hi, n_coarse)
    vals = np.array([f(x) for x in xs])
    i = int(np.argmin(vals))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, n_coarse - 1)]
    x, fx, it, ok = _golden(f, a, b, tol, max_iter)
    if vals[i] < fx:
        x, fx = xs[i], vals[i]
    at_edge = i in (0, n_coarse - 1) and (abs(x - lo) <= (b - a) or abs(x - hi) <= (b - a))
    return x, fx, it, ok, at_edge


def _linear_sse(cols, y):
    if len(cols) == 1:
        a = cols[0]
        aa = float(a @ a)
        coef = float(a @ y) / aa if aa > 0 else 0.0
        r = y - coef * a
        return float(r @ r), np.array([coef])
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return float(r @ r), coef


def fit_notch(
    envelope: Envelope,
    spike: str = "mask",
    mask_um: float = 10.0,
    tol: float = 1e-9,
    max_iter: int = 200,
) -> EnvelopeFit:
    """Least-squares fit of V = v0 * max(0, 1 - |dL - dL0| / h), base width 2h.

    ``spike`` handles the white-light feature at zero delay: "mask" drops
    |dL - dL0| < mask_um, "fit" adds a Gaussian term, "none" fits everything.
    h is found by golden-section search with v0 (and the spike amplitude)
    solved in closed form; dL0 by an outer golden-section search.
    """
    if spike not in ("mask", "fit", "none"):
        raise ValueError(f"spike must be 'mask', 'fit' or 'none', got {spike!r}")
    x = np.asarray(envelope.delta_L, dtype=float)
    y = np.asarray(envelope.visibility, dtype=float)
    if x.size < MIN_FIT_SAMPLES:
        raise InsufficientSamples(f"insufficient samples: {x.size} < {MIN_FIT_SAMPLES} envelope samples")
    step = float(np.min(np.diff(x)))
    span = float(x[-1] - x[0])
    h_lo, h_hi = max(2.0 * step, 1e-6 * span), span

    wts = np.clip(y, 0.0, None) ** 2
    center0 = float(np.sum(x * wts) / np.sum(wts)) if np.sum(wts) > 0 else float(np.mean(x))

    def select(x0):
        if spike == "mask":
            keep = np.abs(x - x0) >= mask_um
            return x[keep], y[keep]
        return x, y

    def profile_h(x0, xs, ys, spike_sigma=None):
        def sse(h):
            cols = [np.clip(1.0 - np.abs(xs - x0) / h, 0.0, None)]
            if spike_sigma is not None:
                cols.append(np.exp(-0.5 * ((xs - x0) / spike_sigma) ** 2))
            return _linear_sse(cols, ys)[0]

        return _bracketed_golden(sse, h_lo, h_hi, 120, tol, max_iter)

    total_iter = 0
    converged = True

    def outer(x0):
        nonlocal total_iter
        xs, ys = select(x0)
        h, f, it, ok, _ = profile_h(x0, xs, ys)
        total_iter += it
        return f

    shift = 0.02 * span
    x0, _, it, ok = _golden(outer, center0 - shift, center0 + shift, tol, max_iter)
    total_iter += it
    converged &= ok

    xs, ys = select(x0)
    if xs.size < MIN_FIT_SAMPLES:
        raise InsufficientSamples(f"insufficient samples: {xs.size} left after masking the spike")
    sigma = None
    if spike == "fit":

        def sse_sigma(s):
            return profile_h(x0, xs, ys, s)[1]

        sigma, _, it, ok = _golden(sse_sigma, step, max(2.0 * mask_um, 4.0 * step), 1e-6, max_iter)
        total_iter += it
        converged &= ok
    h, sse, it, ok, at_edge = profile_h(x0, xs, ys, sigma)
    total_iter += it
    converged &= ok

    cols = [np.clip(1.0 - np.abs(xs - x0) / h, 0.0, None)]
    if sigma is not None:
        cols.append(np.exp(-0.5 * ((xs - x0) / sigma) ** 2))
    sse, coef = _linear_sse(cols, ys)
    flags = []
    if at_edge or h >= 0.99 * h_hi:
        flags.append("h_at_scan_limit")
    result = EnvelopeFit(
        base_width=float(2.0 * h),
        peak_visibility=float(coef[0]),
        center_offset=float(x0),
        residual_rms=math.sqrt(sse / xs.size),
        envelope=envelope,
        spike_mode=spike,
        spike_amplitude=float(coef[1]) if sigma is not None else 0.0,
        spike_sigma=float(sigma) if sigma is not None else 0.0,
        n_used=int(xs.size),
        iterations=total_iter,
        flags=tuple(flags),
    )
    if not converged:
        raise NotchFitError(f"notch fit did not converge in {max_iter} iterations", best=result)
    return result


def spike_profile(fit: EnvelopeFit, window_um: float = 50.0):
    """Envelope minus the fitted triangle near zero delay (the white-light feature)."""
    env = fit.envelope
    near = np.abs(env.delta_L - fit.center_offset) <= window_um
    x = env.delta_L[near]
    return x, env.visibility[near] - fit.triangle(x)


def spike_fwhm(fit: EnvelopeFit, window_um: float = 50.0) -> float:
    x, r = spike_profile(fit, window_um)
    return half_max_width(x, r)


def gaussian_coherence_fwhm_um(center_nm: float, fwhm_nm: float, path_convention: str) -> float:
    """FWHM of the fringe envelope of a Gaussian spectrum on the Delta L axis.

    Optical-path FWHM is (4 ln2 / pi) lambda^2 / d lambda.
    """
    opd = GAUSS_TIME_BANDWIDTH * (center_nm * 1e-3) ** 2 / (fwhm_nm * 1e-3)
    return opd if path_convention == "delta_is_optical_path" else 0.5 * opd


@dataclass(frozen=True)
class BandwidthEstimate:
    fwhm_frequency: float  # THz
    fwhm_wavelength: float  # nm
    base_to_fwhm_model: str
    reference_wavelength: float  # nm
    DL: float  # ps

    def __post_init__(self):
        if not (self.fwhm_frequency > 0 and self.fwhm_wavelength > 0):
            raise ValueError("bandwidths must be positive")


def _delay_from_base(base_um: float, path_convention: str) -> float:
    # the full triangle base spans delays -DL..DL
    return float(units.delay_from_path(base_um, path_convention)) / 2.0


def bandwidth_from_base(
    base_width_um: float,
    reference_wavelength_nm: float = 702.2,
    model: str = "sinc2",
    path_convention: str = "delta_is_arm_difference",
) -> BandwidthEstimate:
    """Spectral FWHM implied by a fringe-envelope width.

    ``sinc2``: base_width is the full triangle base and DL its half-width in
    delay. ``gaussian``: base_width is read as the envelope FWHM.
    """
    if not base_width_um > 0:
        raise ValueError(f"base width must be > 0, got {base_width_um}")
    DL = _delay_from_base(base_width_um, path_convention)
    if model == "sinc2":
        df = SINC2_TIME_BANDWIDTH / DL
    elif model == "gaussian":
        df = GAUSS_TIME_BANDWIDTH / (2.0 * DL)
    else:
        raise ValueError(f"unknown model {model!r}")
    dlam = reference_wavelength_nm**2 * df / units.C_NM_THZ
    return BandwidthEstimate(df, dlam, model, reference_wavelength_nm, DL)


def base_from_bandwidth(
    fwhm_wavelength_nm: float,
    reference_wavelength_nm: float = 702.2,
    model: str = "sinc2",
    path_convention: str = "delta_is_arm_difference",
) -> float:
    """Inverse of bandwidth_from_base: envelope base width [um] for a spectral FWHM."""
    if not fwhm_wavelength_nm > 0:
        raise ValueError(f"bandwidth must be > 0, got {fwhm_wavelength_nm}")
    df = fwhm_wavelength_nm * units.C_NM_THZ / reference_wavelength_nm**2
    if model == "sinc2":
        DL = SINC2_TIME_BANDWIDTH / df
    elif model == "gaussian":
        DL = GAUSS_TIME_BANDWIDTH / (2.0 * df)
    else:
        raise ValueError(f"unknown model {model!r}")
    return 2.0 * DL * units.path_per_delay(path_convention)


def fit_report(fit: EnvelopeFit, bandwidth: BandwidthEstimate | None = None, extra: dict | None = None) -> str:
    rows = {
        "base_width_um": fit.base_width,
        "half_width_um": fit.half_width,
        "peak_visibility": fit.peak_visibility,
        "center_offset_um": fit.center_offset,
        "residual_rms": fit.residual_rms,
        "spike_mode": fit.spike_mode,
        "spike_amplitude": fit.spike_amplitude,
        "spike_sigma_um": fit.spike_sigma,
        "n_used": fit.n_used,
        "iterations": fit.iterations,
        "flags": ",".join(fit.flags),
    }
    if bandwidth is not None:
        rows.update(
            {
                "DL_ps": bandwidth.DL,
                "bandwidth_model": bandwidth.base_to_fwhm_model,
                "fwhm_frequency_THz": bandwidth.fwhm_frequency,
                "fwhm_wavelength_nm": bandwidth.fwhm_wavelength,
                "reference_wavelength_nm": bandwidth.reference_wavelength,
            }
        )
    rows.update(extra or {})
    return "".join(f"{k} = {repr(float(v)) if isinstance(v, float) else v}\n" for k, v in rows.items())
