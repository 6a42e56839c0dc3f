"""Crystal dispersion: refractive indices, inverse group velocities and the
group-velocity mismatch D = 1/u_o - 1/u_e that sets the biphoton bandwidth.

Sellmeier form used for both rays (wavelength in um)::

    n^2 = A + B / (lambda^2 - C) - D * lambda^2

The extraordinary ray is described by an *effective* coefficient set fitted
to n_e(theta, lambda) at the fixed collinear phase-matching angle.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .units import C_MM_PER_PS


class DispersionDomainError(ValueError):
    """Wavelength outside the validity interval of a dispersion model."""


class RayKind(str, Enum):
    ORDINARY = "ordinary"  # signal
    EXTRAORDINARY = "extraordinary"  # idler


@dataclass(frozen=True)
class Sellmeier:
    A: float
    B: float
    C: float
    D: float

    def n_squared(self, lam):
        lam2 = lam * lam
        return self.A + self.B / (lam2 - self.C) - self.D * lam2

    def index(self, lam):
        return np.sqrt(self.n_squared(lam))

    def dn_dlambda(self, lam):
        """Analytic derivative of the index [1/um]."""
        lam2 = lam * lam
        dn2 = -2.0 * self.B * lam / (lam2 - self.C) ** 2 - 2.0 * self.D * lam
        return dn2 / (2.0 * self.index(lam))


@dataclass(frozen=True)
class CrystalSpec:
    name: str
    length_mm: float
    sellmeier_o: Sellmeier
    sellmeier_e: Sellmeier
    valid_range: tuple[float, float]
    override_D_ps_per_mm: float | None = None

    def __post_init__(self):
        if not self.length_mm > 0:
            raise ValueError(f"crystal length must be > 0, got {self.length_mm}")
        lo, hi = self.valid_range
        if not 0 < lo < hi:
            raise ValueError(f"invalid wavelength range {self.valid_range}")
        probe = np.linspace(lo, hi, 201)
        for ray, coeffs in (("ordinary", self.sellmeier_o), ("extraordinary", self.sellmeier_e)):
            n2 = coeffs.n_squared(probe)
            if not np.all(np.isfinite(n2)) or np.any(n2 <= 1.0):
                raise ValueError(f"{ray} index of {self.name!r} not real and > 1 on {self.valid_range} um")
            # a pole of B/(lambda^2 - C) inside the range would slip between probes
            if lo * lo <= coeffs.C <= hi * hi:
                raise ValueError(f"{ray} Sellmeier pole inside {self.valid_range} um")

    def coefficients(self, ray: RayKind | str) -> Sellmeier:
        ray = RayKind(ray)
        return self.sellmeier_o if ray is RayKind.ORDINARY else self.sellmeier_e

    def swapped(self) -> CrystalSpec:
        """Same crystal with the o/e coefficient sets exchanged."""
        return dataclasses.replace(self, sellmeier_o=self.sellmeier_e, sellmeier_e=self.sellmeier_o)


# Eimerl et al. (1987) BBO ordinary ray.
BBO_ORDINARY = Sellmeier(A=2.7359, B=0.01878, C=0.01822, D=0.01354)
BBO_EXTRAORDINARY_PRINCIPAL = Sellmeier(A=2.3753, B=0.01224, C=0.01667, D=0.01516)
# Collinear degenerate type-II matching 351.1 nm -> 702.2 + 702.2 nm.
BBO_TYPE2_THETA_RAD = 0.8587940283318956
# Effective e-ray set at BBO_TYPE2_THETA_RAD, see effective_extraordinary().
BBO_EXTRAORDINARY_EFFECTIVE = Sellmeier(
    A=2.516905203, B=0.0146609249, C=0.01726772753, D=0.01464900883
)
BBO_VALID_UM = (0.22, 1.06)


def bbo_crystal(length_mm: float = 3.0, override_D_ps_per_mm: float | None = None) -> CrystalSpec:
    return CrystalSpec(
        name="BBO",
        length_mm=length_mm,
        sellmeier_o=BBO_ORDINARY,
        sellmeier_e=BBO_EXTRAORDINARY_EFFECTIVE,
        valid_range=BBO_VALID_UM,
        override_D_ps_per_mm=override_D_ps_per_mm,
    )


def angle_index(ordinary: Sellmeier, principal_e: Sellmeier, theta, lam):
    """Extraordinary index at propagation angle theta to the optic axis."""
    c, s = np.cos(theta), np.sin(theta)
    return (c * c / ordinary.n_squared(lam) + s * s / principal_e.n_squared(lam)) ** -0.5


def type2_phase_matching_angle(
    ordinary: Sellmeier, principal_e: Sellmeier, pump_um: float
) -> float:
    """Collinear degenerate type-II angle: n_e(theta, lp) = (n_o(2lp) + n_e(theta, 2lp)) / 2."""
    from scipy.optimize import brentq

    lam = 2.0 * pump_um

    def mismatch(theta):
        return angle_index(ordinary, principal_e, theta, pump_um) - 0.5 * (
            ordinary.index(lam) + angle_index(ordinary, principal_e, theta, lam)
        )

    return float(brentq(mismatch, 1e-3, np.pi / 2, xtol=1e-15))


def effective_extraordinary(
    ordinary: Sellmeier,
    principal_e: Sellmeier,
    theta: float,
    valid_range: tuple[float, float],
    n_fit: int = 841,
) -> Sellmeier:
    """Least-squares Sellmeier set reproducing n_e(theta, lambda)^2 over valid_range."""
    from scipy.optimize import curve_fit

    lam = np.linspace(*valid_range, n_fit)
    target = angle_index(ordinary, principal_e, theta, lam) ** 2

    def model(lam, A, B, C, D):
        return Sellmeier(A, B, C, D).n_squared(lam)

    p0 = [principal_e.A, principal_e.B, principal_e.C, principal_e.D]
    popt, _ = curve_fit(model, lam, target, p0=p0, xtol=1e-14, ftol=1e-14)
    return Sellmeier(*map(float, popt))


def _check_range(spec: CrystalSpec, wavelength, strict: bool):
    lo, hi = spec.valid_range
    lam = np.asarray(wavelength, dtype=float)
    bad = (lam <= lo) | (lam >= hi) if strict else (lam < lo) | (lam > hi)
    if np.any(bad) or np.any(~np.isfinite(lam)):
        kind = "open" if strict else "closed"
        raise DispersionDomainError(
            f"wavelength {wavelength} um outside the {kind} valid interval "
            f"[{lo}, {hi}] um of {spec.name!r}"
        )
    return lam


def refractive_index(spec: CrystalSpec, ray: RayKind | str, wavelength):
    lam = _check_range(spec, wavelength, strict=False)
    return spec.coefficients(ray).index(lam)


def inverse_group_velocity(spec: CrystalSpec, ray: RayKind | str, wavelength):
    """1/u = (n - lambda dn/dlambda) / c in ps/mm.

    Requires an interior wavelength so the derivative is two-sided.
    """
    lam = _check_range(spec, wavelength, strict=True)
    coeffs = spec.coefficients(ray)
    group_index = coeffs.index(lam) - lam * coeffs.dn_dlambda(lam)
    return group_index / C_MM_PER_PS


# the quantity is an inverse velocity; keep the operation name short
group_velocity = inverse_group_velocity


def group_velocity_mismatch(spec: CrystalSpec, wavelength) -> float:
    """D = 1/u_o - 1/u_e [ps/mm], sign preserved; a configured override wins."""
    if spec.override_D_ps_per_mm is not None:
        return spec.override_D_ps_per_mm
    return inverse_group_velocity(spec, RayKind.ORDINARY, wavelength) - inverse_group_velocity(
        spec, RayKind.EXTRAORDINARY, wavelength
    )


def delay_product(spec: CrystalSpec, wavelength) -> float:
    """DL = D * L [ps]."""
    return group_velocity_mismatch(spec, wavelength) * spec.length_mm


def sellmeier_delay_product(spec: CrystalSpec, wavelength) -> float:
    """DL from the dispersion model alone, ignoring any override."""
    return delay_product(dataclasses.replace(spec, override_D_ps_per_mm=None), wavelength)


_SELLMEIER_KEYS = ("A", "B", "C", "D")


def parse_crystal_text(text: str, source: str = "<string>") -> CrystalSpec:
    """Parse a ``key = value`` crystal description.

    Keys: name, length_mm, sellmeier_o.{A,B,C,D}, sellmeier_e.{A,B,C,D},
    valid_um = lo,hi and optionally override_D_ps_per_mm.
    """
    allowed = {"name", "length_mm", "valid_um", "override_D_ps_per_mm"}
    allowed |= {f"sellmeier_{r}.{k}" for r in "oe" for k in _SELLMEIER_KEYS}
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in allowed:
            raise ValueError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    missing = sorted(allowed - {"override_D_ps_per_mm"} - set(values))
    if missing:
        raise ValueError(f"{source}: missing keys {', '.join(missing)}")
    try:
        lo, hi = (float(v) for v in values["valid_um"].split(","))
        coeffs = {
            r: Sellmeier(*(float(values[f"sellmeier_{r}.{k}"]) for k in _SELLMEIER_KEYS)) for r in "oe"
        }
        override = values.get("override_D_ps_per_mm")
        return CrystalSpec(
            name=values["name"],
            length_mm=float(values["length_mm"]),
            sellmeier_o=coeffs["o"],
            sellmeier_e=coeffs["e"],
            valid_range=(lo, hi),
            override_D_ps_per_mm=None if override in (None, "", "none") else float(override),
        )
    except ValueError as exc:
        raise ValueError(f"{source}: {exc}") from exc


def load_crystal(path: str | Path) -> CrystalSpec:
    path = Path(path)
    return parse_crystal_text(path.read_text(), source=str(path))


def format_crystal(spec: CrystalSpec) -> str:
    lines = [f"name = {spec.name}", f"length_mm = {spec.length_mm!r}"]
    for r, coeffs in (("o", spec.sellmeier_o), ("e", spec.sellmeier_e)):
        lines += [f"sellmeier_{r}.{k} = {getattr(coeffs, k)!r}" for k in _SELLMEIER_KEYS]
    lines.append(f"valid_um = {spec.valid_range[0]!r},{spec.valid_range[1]!r}")
    if spec.override_D_ps_per_mm is not None:
        lines.append(f"override_D_ps_per_mm = {spec.override_D_ps_per_mm!r}")
    return "\n".join(lines) + "\n"
