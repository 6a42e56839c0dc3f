"""Forward model of the single-photon Michelson scan.

The detector sees the filtered signal marginal plus a filter-limited
broadband background. The counting rate at delay tau is

    R(tau) = rate_scale * (1 + Re F(tau)) / 2,   F(tau) = int S(nu) exp(i (omega + nu) tau) d nu

so R(0) = rate_scale and 0 <= R <= rate_scale.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import units
from ._numeric import direct_fourier_sum, uniform_fourier_sum
from .biphoton import FilterSpec, SpectralDensity, apply_filter, gaussian_background

PATH_CONVENTIONS = ("delta_is_arm_difference", "delta_is_optical_path")
NOISE_MODELS = ("none", "poisson")


class UndersampledCarrier(ValueError):
    pass


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class MichelsonConfig:
    scan_min_um: float = -300.0
    scan_max_um: float = 300.0
    step_um: float = 0.05
    background_weight: float = 0.3
    rate_scale: float = 1000.0
    dwell_time: float = 1.0
    noise: str = "none"
    seed: int = 0
    path_convention: str = "delta_is_arm_difference"
    envelope_only: bool = False

    def __post_init__(self):
        if not self.scan_min_um < self.scan_max_um:
            raise ValueError("scan_min_um must be < scan_max_um")
        if not self.step_um > 0:
            raise ValueError("step_um must be > 0")
        if not 0.0 <= self.background_weight <= 1.0:
            raise ValueError("background_weight must lie in [0, 1]")
        if not self.dwell_time > 0:
            raise ValueError("dwell_time must be > 0")
        if not self.rate_scale > 0:
            raise ValueError("rate_scale must be > 0")
        if self.noise not in NOISE_MODELS:
            raise ValueError(f"noise must be one of {NOISE_MODELS}, got {self.noise!r}")
        if self.path_convention not in PATH_CONVENTIONS:
            raise ValueError(f"path_convention must be one of {PATH_CONVENTIONS}, got {self.path_convention!r}")

    def scan_axis(self) -> np.ndarray:
        n = int(math.floor((self.scan_max_um - self.scan_min_um) / self.step_um + 1e-9)) + 1
        return self.scan_min_um + self.step_um * np.arange(n)


@dataclass(frozen=True)
class Interferogram:
    delta_L: np.ndarray
    counts: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.asarray(self.delta_L, dtype=float)
        c = np.asarray(self.counts, dtype=float)
        if d.shape != c.shape or d.ndim != 1:
            raise ValueError("delta_L and counts must be 1-d vectors of equal length")
        if np.any(c < 0):
            raise ValueError("counts must be nonnegative")
        if d.size > 1 and np.any(np.diff(d) <= 0):
            raise ValueError("delta_L must be strictly increasing")
        object.__setattr__(self, "delta_L", d)
        object.__setattr__(self, "counts", c)

    @property
    def step(self) -> float:
        return float((self.delta_L[-1] - self.delta_L[0]) / (self.delta_L.size - 1))

    def is_uniform(self, rtol: float = 1e-6) -> bool:
        steps = np.diff(self.delta_L)
        return bool(np.all(np.abs(steps - self.step) <= rtol * self.step))


def carrier_period_um(center_omega: float, path_convention: str) -> float:
    """Fringe period of the center frequency on the recorded Delta L axis."""
    lam = float(units.wavelength_from_omega(center_omega))
    return lam if path_convention == "delta_is_optical_path" else 0.5 * lam


def mix_densities(a: SpectralDensity, b: SpectralDensity, w: float, label: str = "detected") -> SpectralDensity:
    """(1 - w) a + w b on a shared grid."""
    if a.grid != b.grid:
        raise GridMismatch(f"incompatible grids: {a.grid} vs {b.grid}")
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"background weight must lie in [0, 1], got {w}")
    return SpectralDensity.from_unnormalized(a.grid, (1.0 - w) * a.weights + w * b.weights, label, a.flags + b.flags)


def detected_spectrum(marginal: SpectralDensity, filt: FilterSpec, w: float) -> SpectralDensity:
    """Spectrum reaching the detector: (1-w) * filtered marginal + w * background."""
    filtered = apply_filter(marginal, filt)
    if w == 0.0:
        return filtered
    return mix_densities(filtered, gaussian_background(marginal.grid, filt), w)


def coherence(spectrum: SpectralDensity, tau) -> np.ndarray:
    """Baseband coherence G(tau) = int S(nu) exp(i nu tau) d nu, direct sum."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    return direct_fourier_sum(spectrum.bin_masses, spectrum.nu, tau)


def coherence_uniform(spectrum: SpectralDensity, tau0: float, dtau: float, m: int) -> np.ndarray:
    """G on the uniform delay axis tau0 + k dtau, via a chirp-z transform."""
    g = spectrum.grid
    return uniform_fourier_sum(spectrum.bin_masses, g.nu_min, g.spacing, tau0, dtau, m)


def _rate_from_coherence(G, tau, center_omega, rate_scale):
    F = np.exp(1j * center_omega * tau) * G
    return np.clip(0.5 * rate_scale * (1.0 + F.real), 0.0, rate_scale)


def counting_rate(
    spectrum: SpectralDensity,
    delta_L,
    path_convention: str = "delta_is_arm_difference",
    rate_scale: float = 1.0,
    center_omega: float | None = None,
):
    """Expected counting rate at path difference(s) delta_L [um]."""
    omega = spectrum.grid.center_omega if center_omega is None else center_omega
    tau = units.delay_from_path(np.atleast_1d(delta_L), path_convention)
    R = _rate_from_coherence(coherence(spectrum, tau), tau, omega, rate_scale)
    return R if np.ndim(delta_L) else float(R[0])


def point_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for scan point ``index``; independent of evaluation order."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def sample_counts(means: np.ndarray, seed: int, start: int = 0) -> np.ndarray:
    return np.array([point_rng(seed, start + i).poisson(m) for i, m in enumerate(means)], dtype=float)


def _sample_parallel(means: np.ndarray, seed: int, workers: int) -> np.ndarray:
    if workers <= 1:
        return sample_counts(means, seed)
    bounds = np.linspace(0, means.size, workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(lambda ab: sample_counts(means[ab[0] : ab[1]], seed, ab[0]), zip(bounds[:-1], bounds[1:]))
        return np.concatenate(list(parts))


def simulate_scan(spectrum: SpectralDensity, config: MichelsonConfig, workers: int = 1) -> Interferogram:
    """Sample the counting record over the configured Delta L axis.

    With ``envelope_only`` the carrier is not resolved and each point records
    the fringe-maximum rate rate_scale * (1 + |G|) / 2 instead.
    """
    omega = spectrum.grid.center_omega
    period = carrier_period_um(omega, config.path_convention)
    if config.step_um > 0.25 * period and not config.envelope_only:
        raise UndersampledCarrier(
            f"undersampled carrier: step {config.step_um} um exceeds a quarter fringe "
            f"({0.25 * period:.4g} um); set envelope_only for coarse scans"
        )
    delta_L = config.scan_axis()
    tau = units.delay_from_path(delta_L, config.path_convention)
    dtau = float(units.delay_from_path(config.step_um, config.path_convention))
    G = coherence_uniform(spectrum, float(tau[0]), dtau, delta_L.size)
    if config.envelope_only:
        rate = 0.5 * config.rate_scale * (1.0 + np.clip(np.abs(G), 0.0, 1.0))
    else:
        rate = _rate_from_coherence(G, tau, omega, config.rate_scale)
    mean = rate * config.dwell_time
    counts = _sample_parallel(mean, config.seed, workers) if config.noise == "poisson" else mean

    meta = {f"michelson.{k}": v for k, v in asdict(config).items()}
    meta.update(
        {
            "center_omega_rad_per_ps": omega,
            "spectrum_label": spectrum.label,
            "spectrum_grid": spectrum.grid.describe(),
        }
    )
    if spectrum.flags:
        meta["spectrum_flags"] = ",".join(spectrum.flags)
    return Interferogram(delta_L, counts, meta)


def _meta_value(text: str):
    if text in ("True", "False"):
        return text == "True"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def write_interferogram_csv(gram: Interferogram, path: str | Path, header: dict | None = None) -> None:
    lines = [f"# {k} = {_fmt_meta(v)}" for k, v in {**gram.meta, **(header or {})}.items()]
    lines.append("delta_L_um,counts")
    lines += [f"{d:.10g},{c:.12g}" for d, c in zip(gram.delta_L, gram.counts)]
    Path(path).write_text("\n".join(lines) + "\n")


def _fmt_meta(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def read_interferogram_csv(path: str | Path) -> Interferogram:
    path = Path(path)
    meta: dict = {}
    rows = []
    saw_columns = False
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if sep:
                meta[key.strip()] = _meta_value(value.strip())
            continue
        if not saw_columns:
            if line.replace(" ", "") != "delta_L_um,counts":
                raise ValueError(f"{path}:{lineno}: expected column header 'delta_L_um,counts', got {raw!r}")
            saw_columns = True
            continue
        parts = line.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            d, c = float(parts[0]), float(parts[1])
            if not (math.isfinite(d) and math.isfinite(c)) or c < 0:
                raise ValueError
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed interferogram row {raw!r}") from None
        if rows and d <= rows[-1][0]:
            raise ValueError(f"{path}:{lineno}: delta_L not strictly increasing")
        rows.append((d, c))
    if not saw_columns:
        raise ValueError(f"{path}: missing 'delta_L_um,counts' column header")
    if not rows:
        raise ValueError(f"{path}: no data rows")
    d, c = np.array(rows).T
    return Interferogram(d, c, meta)
