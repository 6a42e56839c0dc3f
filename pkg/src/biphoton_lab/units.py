"""Physical constants and unit conversions.

Internal units: wavelength in um, time in ps, angular frequency in rad/ps,
path differences in um, crystal lengths in mm.
"""

import numpy as np

C_UM_PER_PS = 299.792458
C_MM_PER_PS = C_UM_PER_PS * 1e-3
C_NM_THZ = 299792.458  # c in nm*THz


def omega_from_wavelength(wavelength_um):
    """Angular frequency [rad/ps] of a vacuum wavelength [um]."""
    return 2.0 * np.pi * C_UM_PER_PS / np.asarray(wavelength_um, dtype=float)


def wavelength_from_omega(omega):
    """Vacuum wavelength [um] of an angular frequency [rad/ps]."""
    return 2.0 * np.pi * C_UM_PER_PS / np.asarray(omega, dtype=float)


def detuning_from_wavelength(wavelength_um, center_wavelength_um):
    """Detuning nu = 2 pi c (1/lambda - 1/lambda0) in rad/ps."""
    lam = np.asarray(wavelength_um, dtype=float)
    return 2.0 * np.pi * C_UM_PER_PS * (1.0 / lam - 1.0 / center_wavelength_um)


def delay_from_path(delta_L_um, path_convention):
    """Convert a Michelson path difference [um] to a delay [ps].

    ``delta_is_arm_difference`` means the optical path difference is twice
    the recorded value.
    """
    delta = np.asarray(delta_L_um, dtype=float)
    if path_convention == "delta_is_optical_path":
        return delta / C_UM_PER_PS
    if path_convention == "delta_is_arm_difference":
        return 2.0 * delta / C_UM_PER_PS
    raise ValueError(f"unknown path convention {path_convention!r}")


def path_per_delay(path_convention):
    """um of recorded path difference per ps of delay."""
    return float(1.0 / delay_from_path(1.0, path_convention))
