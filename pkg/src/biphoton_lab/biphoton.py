"""Collinear degenerate type-II biphoton state on a detuning grid and its
single-photon marginals.

The pair amplitude is Phi(DL nu) for signal at omega + nu and idler at
omega - nu. Tracing out either photon leaves a density matrix that is
diagonal in frequency with weights |Phi|^2 = sinc^2(DL nu / 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import sici

from . import units
from ._numeric import half_max_width

NORMALIZATION_TOL = 1e-9
# nu_max below this multiple of pi/DL leaves > ~2% of the sinc^2 mass outside the grid
MIN_TAIL_SPAN = 20.0
DEFAULT_SPAN = 40.0
DEFAULT_N_POINTS = 4001


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform symmetric detuning grid, nu in [-nu_max, nu_max] rad/ps."""

    center_omega: float
    nu_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ValueError(f"n_points must be odd and >= 3, got {self.n_points}")
        if not self.nu_max > 0:
            raise ValueError(f"nu_max must be > 0, got {self.nu_max}")
        if not self.center_omega > 0:
            raise ValueError(f"center_omega must be > 0, got {self.center_omega}")

    @classmethod
    def default(cls, DL: float, center_omega: float) -> SpectralGrid:
        return cls(center_omega, DEFAULT_SPAN * math.pi / DL, DEFAULT_N_POINTS)

    @classmethod
    def with_spacing(cls, center_omega: float, nu_max: float, spacing: float) -> SpectralGrid:
        """Grid reaching at least nu_max with spacing no coarser than requested."""
        half = max(1, math.ceil(nu_max / spacing - 1e-9))
        return cls(center_omega, half * spacing, 2 * half + 1)

    @property
    def nu_min(self) -> float:
        return -self.nu_max

    @property
    def spacing(self) -> float:
        return 2.0 * self.nu_max / (self.n_points - 1)

    @property
    def nu(self) -> np.ndarray:
        return np.linspace(-self.nu_max, self.nu_max, self.n_points)

    @property
    def center_index(self) -> int:
        return self.n_points // 2

    @property
    def center_wavelength_um(self) -> float:
        return float(units.wavelength_from_omega(self.center_omega))

    def wavelengths_um(self) -> np.ndarray:
        return units.wavelength_from_omega(self.center_omega + self.nu)

    def describe(self) -> str:
        return (
            f"uniform nu grid: n_points={self.n_points}, nu_max={self.nu_max:.9g} rad/ps, "
            f"spacing={self.spacing:.9g} rad/ps, center_omega={self.center_omega:.9g} rad/ps"
        )


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpectralDensity:
    """Diagonal of a single-photon density matrix: weights per unit nu.

    Trace is sum(weights) * spacing and must equal one.
    """

    grid: SpectralGrid
    weights: np.ndarray
    label: str = ""
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.shape != (self.grid.n_points,):
            raise ValueError(f"weights shape {w.shape} does not match grid ({self.grid.n_points},)")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("spectral weights must be finite and nonnegative")
        trace = float(w.sum() * self.grid.spacing)
        if abs(trace - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"spectral density not trace-normalized (trace = {trace!r})")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_unnormalized(cls, grid, weights, label="", flags=()) -> SpectralDensity:
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        total = w.sum() * grid.spacing
        if not total > 0:
            raise ValueError("cannot normalize a spectral weight vector with zero mass")
        return cls(grid, w / total, label, tuple(flags))

    @property
    def nu(self) -> np.ndarray:
        return self.grid.nu

    @property
    def bin_masses(self) -> np.ndarray:
        return self.weights * self.grid.spacing

    def trapezoid_trace(self) -> float:
        return float(np.trapezoid(self.weights, dx=self.grid.spacing))

    def relabel(self, label: str) -> SpectralDensity:
        return SpectralDensity(self.grid, self.weights, label, self.flags)


@dataclass(frozen=True)
class FilterSpec:
    """Gaussian spectral filter, transmittance exp(-4 ln2 (lambda - lambda0)^2 / fwhm^2)."""

    center_nm: float = 702.2
    fwhm_nm: float = 83.0

    def __post_init__(self):
        if not self.center_nm > 0 or not self.fwhm_nm > 0:
            raise ValueError(f"filter center and FWHM must be > 0, got {self}")

    def transmittance(self, wavelength_um):
        d = np.asarray(wavelength_um, dtype=float) * 1e3 - self.center_nm
        return np.exp(-4.0 * math.log(2.0) * d * d / (self.fwhm_nm * self.fwhm_nm))

    def detuning_extent(self, center_omega: float, n_fwhm: float = 2.0) -> float:
        """Largest |nu| of the filter band lambda0 +- n_fwhm * fwhm (rad/ps)."""
        lam0 = self.center_nm * 1e-3
        lo = max(lam0 - n_fwhm * self.fwhm_nm * 1e-3, 0.05 * lam0)
        hi = lam0 + n_fwhm * self.fwhm_nm * 1e-3
        omega = units.omega_from_wavelength(np.array([lo, hi]))
        return float(np.max(np.abs(omega - center_omega)))


@dataclass(frozen=True)
class BiphotonState:
    grid: SpectralGrid
    DL: float
    amplitude: np.ndarray
    pump_wavelength_um: float
    flags: tuple[str, ...] = ()
    tail_fraction: float = 0.0

    @property
    def A0(self) -> float:
        """Analytic normalization sqrt(DL / 4 pi); documentation only.

        Under a plain d(nu) measure A0^2 * integral sinc^2 = 1/2, so densities
        are renormalized numerically instead.
        """
        return math.sqrt(self.DL / (4.0 * math.pi))

    @property
    def pump_omega(self) -> float:
        return float(units.omega_from_wavelength(self.pump_wavelength_um))


def phi(DL: float, nu):
    """Pair amplitude Phi(DL nu) = (1 - exp(-i DL nu)) / (i DL nu), Phi(0) = 1."""
    if not DL > 0:
        raise ValueError(f"DL must be > 0, got {DL}")
    a = DL * np.asarray(nu, dtype=float)
    # exp(-ia/2) * sin(a/2)/(a/2); np.sinc handles a = 0 exactly
    return np.exp(-0.5j * a) * np.sinc(a / (2.0 * np.pi))


def sinc2_tail_fraction(DL: float, nu_max: float) -> float:
    """Fraction of the sinc^2(DL nu/2) mass outside |nu| <= nu_max."""
    X = 0.5 * DL * nu_max
    # int_0^X sin^2 x / x^2 dx = Si(2X) - sin^2(X)/X
    inside = sici(2.0 * X)[0] - math.sin(X) ** 2 / X
    return max(0.0, 1.0 - inside / (0.5 * math.pi))


def build_state(grid: SpectralGrid, DL: float, pump_wavelength_um: float | None = None) -> BiphotonState:
    if not DL > 0:
        raise ValueError(f"DL must be > 0, got {DL}")
    if pump_wavelength_um is None:
        pump_wavelength_um = 0.5 * grid.center_wavelength_um
    flags = []
    if grid.nu_max < MIN_TAIL_SPAN * math.pi / DL:
        flags.append("truncated-tails")
    return BiphotonState(
        grid=grid,
        DL=float(DL),
        amplitude=phi(DL, grid.nu),
        pump_wavelength_um=float(pump_wavelength_um),
        flags=tuple(flags),
        tail_fraction=float(sinc2_tail_fraction(DL, grid.nu_max)),
    )


def signal_marginal(state: BiphotonState) -> SpectralDensity:
    """Partial trace over the idler: weights proportional to |Phi(DL nu)|^2."""
    return SpectralDensity.from_unnormalized(
        state.grid, np.abs(state.amplitude) ** 2, "signal marginal", state.flags
    )


def idler_marginal(state: BiphotonState) -> SpectralDensity:
    """Partial trace over the signal, on the idler detuning -nu (mirror image)."""
    return SpectralDensity.from_unnormalized(
        state.grid, np.abs(state.amplitude[::-1]) ** 2, "idler marginal", state.flags
    )


def apply_filter(density: SpectralDensity, filt: FilterSpec) -> SpectralDensity:
    t = filt.transmittance(density.grid.wavelengths_um())
    return SpectralDensity.from_unnormalized(density.grid, density.weights * t, "filtered", density.flags)


def gaussian_background(grid: SpectralGrid, filt: FilterSpec) -> SpectralDensity:
    """Filter-limited broadband background: the transmittance itself, normalized."""
    return SpectralDensity.from_unnormalized(
        grid, filt.transmittance(grid.wavelengths_um()), "background"
    )


def fwhm_nu(density: SpectralDensity) -> float:
    """FWHM of the weights in nu [rad/ps]."""
    return half_max_width(density.nu, density.weights)


def fwhm_wavelength_nm(density: SpectralDensity) -> float:
    """FWHM of the density re-expressed per unit wavelength [nm]."""
    lam = density.grid.wavelengths_um()[::-1]
    # |d nu / d lambda| = 2 pi c / lambda^2
    per_lambda = (density.weights * 2.0 * math.pi * units.C_UM_PER_PS / density.grid.wavelengths_um() ** 2)[::-1]
    return 1e3 * half_max_width(lam, per_lambda)


def write_density_csv(density: SpectralDensity, path: str | Path, header: dict | None = None) -> None:
    lines = [f"# label: {density.label}"]
    lines.append(f"# center_omega_rad_per_ps: {density.grid.center_omega!r}")
    if density.flags:
        lines.append(f"# flags: {','.join(density.flags)}")
    for key, value in (header or {}).items():
        lines.append(f"# {key}: {value}")
    lines.append("nu_rad_per_ps,weight")
    lines += [f"{n:.12g},{w:.12g}" for n, w in zip(density.nu, density.weights)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_density_csv(path: str | Path, center_omega: float | None = None) -> SpectralDensity:
    """Read a density written by write_density_csv; the nu column must be a valid grid."""
    path = Path(path)
    header: dict[str, str] = {}
    rows = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            header[key.strip()] = value.strip()
            continue
        if line.startswith("nu_rad_per_ps"):
            continue
        try:
            nu, w = (float(v) for v in line.split(","))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed density row {raw!r}") from None
        rows.append((nu, w))
    if len(rows) < 3:
        raise ValueError(f"{path}: need at least 3 density rows, got {len(rows)}")
    nu, w = np.array(rows).T
    if center_omega is None:
        center_omega = float(header.get("center_omega_rad_per_ps", "nan"))
        if not math.isfinite(center_omega):
            raise ValueError(f"{path}: no center_omega in header and none given")
    grid = SpectralGrid(center_omega, float(nu[-1]), len(nu))
    if not np.allclose(nu, grid.nu, rtol=0, atol=1e-9 * max(1.0, grid.nu_max)):
        raise ValueError(f"{path}: nu column is not a uniform symmetric grid")
    flags = tuple(f for f in header.get("flags", "").split(",") if f)
    return SpectralDensity.from_unnormalized(grid, w, header.get("label", ""), flags)
