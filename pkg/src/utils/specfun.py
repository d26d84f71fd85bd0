"""
Special functions and physical constants shared by the physics modules.

Everything here is pure and vectorized over numpy arrays:
- Bessel functions of the first kind at integer order (Jacobi-Anger weights).
- The thermal factor coth(hbar*omega / 2 kB T) of the dephasing integral.
- Fermi-Dirac occupation and its energy derivative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants as sc
from scipy import special

from .errors import ParameterError

MAX_BESSEL_ORDER = 64

# Below this value of hbar*omega/2kBT the Laurent term 1/x replaces coth(x).
COTH_LAURENT_THRESHOLD = 1e-6


@dataclass(frozen=True)
class PhysicalConstants:
    mu0: float = sc.mu_0
    hbar: float = sc.hbar
    kB: float = sc.k
    # Electron gyromagnetic ratio, rad s^-1 T^-1
    electron_gyromagnetic_ratio: float = sc.physical_constants["electron gyromag. ratio"][0]
    electron_charge: float = sc.e
    electron_mass: float = sc.m_e

    def __post_init__(self) -> None:
        for name in ("mu0", "hbar", "kB", "electron_gyromagnetic_ratio", "electron_charge", "electron_mass"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"physical constant {name} must be positive")

    @property
    def m0(self) -> float:
        """Qubit magnetic moment hbar*gamma_e/2."""
        return self.hbar * self.electron_gyromagnetic_ratio / 2.0


CONSTANTS = PhysicalConstants()


def bessel_j(order: int, x):
    """
    Bessel function of the first kind J_order(x) for integer order.

    Negative orders use J_{-n} = (-1)^n J_n so the reflection holds exactly.
    """
    order = int(order)
    if abs(order) > MAX_BESSEL_ORDER:
        raise ParameterError(f"Bessel order {order} exceeds the supported |n| <= {MAX_BESSEL_ORDER}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ParameterError("bessel_j requires finite arguments")
    value = special.jv(abs(order), x)
    if order < 0 and order % 2:
        value = -value
    return value if value.ndim else float(value)


def bessel_table(max_order: int, x) -> np.ndarray:
    """
    Rows J_m(x) for m = -max_order..max_order, stacked on a leading axis.

    Row index m + max_order holds J_m.
    """
    if max_order > MAX_BESSEL_ORDER:
        raise ParameterError(f"Bessel order {max_order} exceeds the supported |n| <= {MAX_BESSEL_ORDER}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ParameterError("bessel_table requires finite arguments")
    orders = np.arange(0, max_order + 1)
    positive = special.jv(orders.reshape((-1,) + (1,) * x.ndim), x)
    signs = np.where(orders % 2 == 1, -1.0, 1.0).reshape((-1,) + (1,) * x.ndim)
    negative = (signs * positive)[:0:-1]
    return np.concatenate([negative, positive], axis=0)


def thermal_coth(omega, temperature: float, constants: PhysicalConstants = CONSTANTS):
    """
    coth(hbar*omega / 2 kB T), with the Laurent branch 2 kB T / hbar*omega for tiny arguments.
    """
    omega = np.asarray(omega, dtype=float)
    if temperature <= 0:
        raise ParameterError("temperature must be positive")
    if not np.all(np.isfinite(omega)) or np.any(omega <= 0):
        raise ParameterError("thermal_coth requires omega > 0")
    x = constants.hbar * omega / (2.0 * constants.kB * temperature)
    small = x < COTH_LAURENT_THRESHOLD
    safe = np.where(small, 1.0, x)
    value = np.where(small, 1.0 / x, 1.0 / np.tanh(safe))
    return value if value.ndim else float(value)


def fermi_occupation(x):
    """Occupation 1/(exp(x)+1) for the reduced energy x = E/kB T."""
    x = np.asarray(x, dtype=float)
    value = special.expit(-x)
    return value if value.ndim else float(value)


def fermi_occupation_derivative(x):
    """-d n_F/dx for the reduced energy; peaks at 1/4 for x = 0."""
    x = np.asarray(x, dtype=float)
    f = special.expit(-x)
    value = f * special.expit(x)
    return value if value.ndim else float(value)


def fermi_dirac(energy, temperature: float, constants: PhysicalConstants = CONSTANTS):
    energy = np.asarray(energy, dtype=float)
    if temperature <= 0:
        raise ParameterError("temperature must be positive")
    if not np.all(np.isfinite(energy)):
        raise ParameterError("fermi_dirac requires finite energies")
    return fermi_occupation(energy / (constants.kB * temperature))


def fermi_derivative(energy, temperature: float, constants: PhysicalConstants = CONSTANTS):
    """-d n_F/dE in 1/J."""
    energy = np.asarray(energy, dtype=float)
    if temperature <= 0:
        raise ParameterError("temperature must be positive")
    kt = constants.kB * temperature
    return fermi_occupation_derivative(energy / kt) / kt
