"""Flat ``key = value`` run configuration with dotted sections.

Every key has a documented default; unknown keys are rejected with the
offending line number. The effective configuration (defaults filled in) is
echoed into every output and hashed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

from . import units
from .biphoton import FilterSpec, SpectralGrid
from .dispersion import CrystalSpec, bbo_crystal, delay_product, load_crystal
from .interferometer import MichelsonConfig
from .quantum_info import EntropyConvention
from .spectroscopy import REFERENCE_BASE_UM

# DL implied by a 225 um full triangle base on the arm-difference axis
REFERENCE_DL_PS = REFERENCE_BASE_UM / units.C_UM_PER_PS


class ConfigError(ValueError):
    pass


def _opt_float(text):
    return None if text.lower() in ("", "none", "auto") else float(text)


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _csv(text):
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _floats(text):
    return tuple(float(p) for p in _csv(text))


# key -> (parser, default text, description)
DEFAULTS: dict[str, tuple] = {
    "seed": (int, "0", "master seed for all randomness"),
    "workers": (int, "1", "threads used for Poisson sampling"),
    "crystal.file": (str, "", "key = value crystal file; empty uses built-in BBO"),
    "crystal.length_mm": (float, "3.0", "length of the built-in BBO crystal"),
    "crystal.override_DL_ps": (_opt_float, "0.7506", "force DL [ps]; 'none' uses D * L"),
    "crystal.override_D_ps_per_mm": (_opt_float, "none", "force D [ps/mm]; 'none' uses Sellmeier"),
    "pump.wavelength_nm": (float, "351.1", "pump wavelength; degenerate signal at twice this"),
    "grid.n_points": (_opt_float, "auto", "odd grid size; auto keeps spacing 0.02 pi / DL"),
    "grid.nu_max_rad_per_ps": (_opt_float, "auto", "grid half-width; auto is 40 pi / DL, widened to the filter band"),
    "filter.center_nm": (float, "702.2", "Gaussian filter center"),
    "filter.fwhm_nm": (float, "83.0", "Gaussian filter FWHM"),
    "michelson.scan_min_um": (float, "-300.0", "scan start"),
    "michelson.scan_max_um": (float, "300.0", "scan end"),
    "michelson.step_um": (_opt_float, "auto", "scan step; auto is 0.05, or 1.0 with envelope_only"),
    "michelson.background_weight": (float, "0.3", "broadband background fraction w"),
    "michelson.rate_scale": (float, "1000.0", "counts/s at zero delay"),
    "michelson.dwell_time": (float, "1.0", "seconds per scan point"),
    "michelson.noise": (str, "none", "none | poisson"),
    "michelson.path_convention": (str, "delta_is_arm_difference", "delta_is_arm_difference | delta_is_optical_path"),
    "michelson.envelope_only": (_bool, "false", "record the fringe envelope only"),
    "analysis.window": (str, "tukey", "tukey | hann | none"),
    "analysis.spike": (str, "mask", "mask | fit | none"),
    "analysis.mask_um": (float, "10.0", "half-width of the masked white-light region"),
    "analysis.lowpass_periods": (float, "4.0", "demodulation low-pass length in fringes"),
    "analysis.bandwidth_model": (str, "sinc2", "sinc2 | gaussian"),
    "entropy.log_bases": (_csv, "2,e", "log bases in the convention sweep"),
    "entropy.variables": (_csv, "x,nu", "integration variables in the sweep"),
    "entropy.modes": (_csv, "differential,discrete-bins", "entropy modes in the sweep"),
    "entropy.spans_x": (_floats, "10,100,1000,10000", "integration half-spans in x = DL nu / 2"),
    "entropy.ledger_convention": (_csv, "e,x,differential", "log_base,variable,mode for the ledger"),
    "entropy.density_file": (str, "", "optional density CSV to analyze instead of the sinc^2 marginal"),
}


def parse_config_text(text: str, source: str = "<config>", lines: dict | None = None) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = (p.strip() for p in stripped.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            DEFAULTS[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
        raw[key] = value
        if lines is not None:
            lines[key] = lineno
    return raw


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    explicit: frozenset = frozenset()
    base_dir: Path = Path(".")
    source: str = "<config>"
    lines: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str, source: str = "<config>", base_dir: Path | None = None) -> RunConfig:
        lines: dict[str, int] = {}
        raw = parse_config_text(text, source, lines)
        return cls.from_raw(raw, base_dir or Path("."), source, lines)

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        path = Path(path)
        return cls.from_text(path.read_text(), str(path), path.parent)

    @classmethod
    def from_raw(
        cls, raw: dict[str, str], base_dir: Path = Path("."), source: str = "<config>", lines: dict | None = None
    ) -> RunConfig:
        values = {k: spec[0](raw.get(k, spec[1])) for k, spec in DEFAULTS.items()}
        cfg = cls(values, frozenset(raw), Path(base_dir), source, dict(lines or {}))
        cfg.validate()
        return cfg

    def with_overrides(self, **overrides) -> RunConfig:
        raw = {k: self.text(k) for k in self.explicit}
        raw.update({k: str(v) for k, v in overrides.items()})
        for k in overrides:
            if k not in DEFAULTS:
                raise ConfigError(f"unknown key {k!r}")
        return RunConfig.from_raw(raw, self.base_dir, self.source, self.lines)

    def __getitem__(self, key):
        return self.values[key]

    def text(self, key) -> str:
        v = self.values[key]
        if v is None:
            return "auto" if DEFAULTS[key][1] == "auto" else "none"
        if isinstance(v, tuple):
            return ",".join(f"{x:g}" if isinstance(x, float) else str(x) for x in v)
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(v)
        return str(v)

    def _blame(self, prefix: str, exc: Exception) -> ConfigError:
        where = sorted(n for k, n in self.lines.items() if k.startswith(prefix))
        loc = f"{self.source}:{','.join(map(str, where))}" if where else f"{self.source} (defaults)"
        return ConfigError(f"{loc}: invalid {prefix.rstrip('.')} settings: {exc}")

    def validate(self) -> None:
        checks = {
            "michelson.": self.michelson,
            "filter.": self.filter,
            "entropy.": self._check_entropy,
            "analysis.": self._check_analysis,
            "grid.": self._check_grid,
            "crystal.": self._check_crystal,
            "workers": self._check_misc,
        }
        for prefix, check in checks.items():
            try:
                check()
            except (ValueError, OSError) as exc:
                raise self._blame(prefix, exc) from None

    def _check_entropy(self):
        self.ledger_convention()
        for base in self["entropy.log_bases"]:
            for var in self["entropy.variables"]:
                for mode in self["entropy.modes"]:
                    EntropyConvention(base, var, mode)
        if any(not s > 0 for s in self["entropy.spans_x"]):
            raise ValueError("entropy.spans_x must be positive")

    def _check_analysis(self):
        if self["analysis.window"] not in ("tukey", "hann", "none"):
            raise ValueError("analysis.window must be tukey, hann or none")
        if self["analysis.spike"] not in ("mask", "fit", "none"):
            raise ValueError("analysis.spike must be mask, fit or none")
        if self["analysis.bandwidth_model"] not in ("sinc2", "gaussian"):
            raise ValueError("analysis.bandwidth_model must be sinc2 or gaussian")
        if self["analysis.lowpass_periods"] < 3:
            raise ValueError("analysis.lowpass_periods must be >= 3")

    def _check_grid(self):
        n = self["grid.n_points"]
        if n is not None and (n != int(n) or n < 3 or int(n) % 2 == 0):
            raise ValueError("grid.n_points must be an odd integer >= 3")
        nu_max = self["grid.nu_max_rad_per_ps"]
        if nu_max is not None and not nu_max > 0:
            raise ValueError("grid.nu_max_rad_per_ps must be > 0")

    def _check_crystal(self):
        dl = self["crystal.override_DL_ps"]
        if dl is not None and not dl > 0:
            raise ValueError("crystal.override_DL_ps must be > 0")
        if not self["pump.wavelength_nm"] > 0:
            raise ValueError("pump.wavelength_nm must be > 0")
        if not self.DL() > 0:
            raise ValueError(f"DL = {self.DL()} ps is not positive; set crystal.override_DL_ps")

    def _check_misc(self):
        if self["workers"] < 1:
            raise ValueError("workers must be >= 1")

    def effective_text(self) -> str:
        return "".join(f"{k} = {self.text(k)}\n" for k in DEFAULTS)

    def hash(self) -> str:
        return hashlib.sha256(self.effective_text().encode()).hexdigest()[:16]

    # derived objects

    @property
    def center_wavelength_um(self) -> float:
        return 2.0 * self["pump.wavelength_nm"] * 1e-3

    @property
    def center_omega(self) -> float:
        return float(units.omega_from_wavelength(self.center_wavelength_um))

    def crystal(self) -> CrystalSpec:
        path = self["crystal.file"]
        if path:
            p = Path(path)
            spec = load_crystal(p if p.is_absolute() else self.base_dir / p)
        else:
            spec = bbo_crystal(self["crystal.length_mm"])
        override = self["crystal.override_D_ps_per_mm"]
        if override is not None:
            spec = dataclasses.replace(spec, override_D_ps_per_mm=override)
        return spec

    def DL(self) -> float:
        if self["crystal.override_DL_ps"] is not None:
            return float(self["crystal.override_DL_ps"])
        return float(delay_product(self.crystal(), self.center_wavelength_um))

    def filter(self) -> FilterSpec:
        return FilterSpec(self["filter.center_nm"], self["filter.fwhm_nm"])

    def michelson(self) -> MichelsonConfig:
        step = self["michelson.step_um"]
        if step is None:
            step = 1.0 if self["michelson.envelope_only"] else 0.05
        return MichelsonConfig(
            scan_min_um=self["michelson.scan_min_um"],
            scan_max_um=self["michelson.scan_max_um"],
            step_um=step,
            background_weight=self["michelson.background_weight"],
            rate_scale=self["michelson.rate_scale"],
            dwell_time=self["michelson.dwell_time"],
            noise=self["michelson.noise"],
            seed=self["seed"],
            path_convention=self["michelson.path_convention"],
            envelope_only=self["michelson.envelope_only"],
        )

    def grid(self, DL: float | None = None) -> SpectralGrid:
        DL = self.DL() if DL is None else DL
        spacing = 0.02 * math.pi / DL
        n = self["grid.n_points"]
        nu_max = self["grid.nu_max_rad_per_ps"]
        if nu_max is None:
            nu_max = 40.0 * math.pi / DL
            if self["michelson.background_weight"] > 0:
                nu_max = max(nu_max, self.filter().detuning_extent(self.center_omega))
            if n is None:
                return SpectralGrid.with_spacing(self.center_omega, nu_max, spacing)
        if n is None:
            n = 4001
        return SpectralGrid(self.center_omega, nu_max, int(n))

    def ledger_convention(self) -> EntropyConvention:
        parts = self["entropy.ledger_convention"]
        if len(parts) != 3:
            raise ValueError("entropy.ledger_convention needs log_base,variable,mode")
        return EntropyConvention(*parts)
