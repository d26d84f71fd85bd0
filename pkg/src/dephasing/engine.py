"""
Dephasing observables built on the correlation kernel.

Every observable is a filtered frequency integral of a radial channel integral:
- Phi_c^2n and Psi_c^2n+1 for a qubit pair (harmonics of beta).
- Phi_s^2n, n in {0, +-1}, for a single qubit (harmonics of alpha).
- Bell-state decay exponents, coherence phase factors and the material
  reference times t_sc / t_am.

Quasi-static mode evaluates the channel integrals once at the sequence's
center frequency; full mode evaluates them at every frequency node.
"""

from __future__ import annotations

import cmath
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Tuple

import numpy as np

from ..materials.magnet import am_reference_time
from ..materials.response import ResponseField
from ..materials.superconductor import sc_reference_time
from ..utils.config import NUMERICS_CONFIG, NumericsConfig
from ..utils.errors import ConsistencyWarning, ParameterError
from ..utils.specfun import CONSTANTS, PhysicalConstants
from .filters import FrequencyIntegralConfig, PulseSequence, filter_integral, thermal_filter_weight
from .kernel import (
    PairGeometry,
    QubitOrientation,
    channel_integrals,
    harmonic_sum,
    radial_moments,
)

logger = logging.getLogger(__name__)

CAUCHY_SCHWARZ_TOLERANCE = 1e-6

# Coherence indices |ab><cd| picking up exp(+i Psi_c) or exp(-i Psi_c)
PHASE_PLUS = frozenset({12, 34})
PHASE_MINUS = frozenset({13, 24})


def frequency_config(numerics: NumericsConfig) -> FrequencyIntegralConfig:
    return FrequencyIntegralConfig(
        cutoff=numerics.omega_cutoff,
        node_budget=numerics.frequency_nodes,
        quasi_static=numerics.quasi_static,
    )


def _dephasing_prefactor(constants: PhysicalConstants) -> float:
    return constants.mu0**2 * constants.m0**2 / (4.0 * constants.hbar * math.pi**3)


def _normalize(values, response: ResponseField, z: float, t: float, numerics: NumericsConfig):
    if numerics.normalization == "reference":
        return values * (response.reference_time(z) / t)
    return values


class _ChannelMemo:
    """Channel integrals per frequency node, shared by the real and imaginary passes of every channel."""

    def __init__(self, compute: Callable[[float], np.ndarray]) -> None:
        self._compute = compute
        self._rows: Dict[float, np.ndarray] = {}

    def __call__(self, omega: np.ndarray) -> np.ndarray:
        out = []
        for w in np.ravel(omega):
            key = float(w)
            if key not in self._rows:
                self._rows[key] = self._compute(key)
            out.append(self._rows[key])
        return np.array(out)


def _filtered_channels(
    response: ResponseField,
    seq: PulseSequence,
    evaluate: Callable[[float], np.ndarray],
    numerics: NumericsConfig,
    constants: PhysicalConstants,
) -> np.ndarray:
    """int d omega coth F(omega, t) I_k(omega) for a vector of channels I_k(omega) (omega in rad/s)."""
    cfg = frequency_config(numerics)
    if cfg.quasi_static:
        omega_ref = seq.center_frequency()
        weight = thermal_filter_weight(seq, cfg, response.temperature, constants)
        return evaluate(omega_ref) * (weight / omega_ref)

    memo = _ChannelMemo(evaluate)
    channels = evaluate(seq.center_frequency()).size
    out = np.zeros(channels, dtype=complex)
    for k in range(channels):
        real = filter_integral(seq, cfg, lambda w: memo(w)[:, k].real, response.temperature, constants)
        imag = filter_integral(seq, cfg, lambda w: memo(w)[:, k].imag, response.temperature, constants)
        out[k] = complex(real, imag)
    logger.debug("full-mode frequency integral used %d distinct nodes", len(memo._rows))
    return out


@dataclass(frozen=True)
class PairHarmonics:
    """Phi_c^2n (even) and Psi_c^2n+1 (odd) with the (-1)^n sign already applied."""

    even_orders: np.ndarray
    even: np.ndarray
    odd_orders: np.ndarray
    odd: np.ndarray

    def phi(self, n: int) -> complex:
        return complex(self.even[int(n) - int(self.even_orders[0])])

    def psi(self, n: int) -> complex:
        return complex(self.odd[int(n) - int(self.odd_orders[0])])


def pair_harmonics(
    response: ResponseField,
    geom: PairGeometry,
    oi: QubitOrientation,
    oj: QubitOrientation,
    seq: PulseSequence,
    t: float,
    truncation: Optional[int] = None,
    numerics: NumericsConfig = NUMERICS_CONFIG,
    constants: PhysicalConstants = CONSTANTS,
) -> PairHarmonics:
    """All Phi_c^2n, |n| <= N, and Psi_c^2n+1 from one pass over the frequency axis."""
    if not t > 0:
        raise ParameterError("evaluation time t must be positive")
    seq = seq.with_duration(t)
    truncation = truncation or numerics.truncation

    shape = {}

    def evaluate(omega: float) -> np.ndarray:
        integrals = channel_integrals(response, geom, oi, oj, response.omega_tilde(omega), truncation, numerics)
        shape["orders"] = (integrals.even_orders, integrals.odd_orders)
        return np.concatenate([integrals.even, integrals.odd]) * integrals.restore

    filtered = _filtered_channels(response, seq, evaluate, numerics, constants)
    even_orders, odd_orders = shape["orders"]
    filtered = filtered * _dephasing_prefactor(constants)
    filtered = _normalize(filtered, response, geom.z, t, numerics)

    even = filtered[: even_orders.size] * np.where(even_orders % 2 == 0, 1.0, -1.0)
    odd = filtered[even_orders.size :] * np.where(odd_orders % 2 == 0, 1.0, -1.0)
    return PairHarmonics(even_orders, even, odd_orders, odd)


def phi_c_harmonic(response, geom, oi, oj, seq, t, n: int, truncation=None, numerics=NUMERICS_CONFIG, constants=CONSTANTS) -> complex:
    truncation = max(truncation or numerics.truncation, abs(int(n)))
    return pair_harmonics(response, geom, oi, oj, seq, t, truncation, numerics, constants).phi(n)


def psi_c_harmonic(response, geom, oi, oj, seq, t, n: int, truncation=None, numerics=NUMERICS_CONFIG, constants=CONSTANTS) -> complex:
    truncation = max(truncation or numerics.truncation, abs(int(n)) + 1)
    return pair_harmonics(response, geom, oi, oj, seq, t, truncation, numerics, constants).psi(n)


def _curve(harmonics: PairHarmonics, beta_grid: Iterable[float], odd: bool) -> np.ndarray:
    betas = np.atleast_1d(np.asarray(list(beta_grid), dtype=float))
    if betas.size == 0:
        raise ParameterError("beta grid is empty")
    orders, values = (harmonics.odd_orders, harmonics.odd) if odd else (harmonics.even_orders, harmonics.even)
    label = "Psi_c" if odd else "Phi_c"
    return np.array([harmonic_sum(orders, values, b, odd=odd, label=label, alternating=False) for b in betas])


def phi_c_curve(
    response: ResponseField,
    geom: PairGeometry,
    oi: QubitOrientation,
    oj: QubitOrientation,
    seq: PulseSequence,
    t: float,
    beta_grid: Iterable[float],
    truncation: Optional[int] = None,
    numerics: NumericsConfig = NUMERICS_CONFIG,
    constants: PhysicalConstants = CONSTANTS,
) -> np.ndarray:
    """Phi_c(beta) = sum_n exp(2i n beta) Phi_c^2n; harmonics are computed once for the whole grid."""
    harmonics = pair_harmonics(response, geom, oi, oj, seq, t, truncation, numerics, constants)
    return _curve(harmonics, beta_grid, odd=False)


def psi_c_curve(
    response: ResponseField,
    geom: PairGeometry,
    oi: QubitOrientation,
    oj: QubitOrientation,
    seq: PulseSequence,
    t: float,
    beta_grid: Iterable[float],
    truncation: Optional[int] = None,
    numerics: NumericsConfig = NUMERICS_CONFIG,
    constants: PhysicalConstants = CONSTANTS,
) -> np.ndarray:
    harmonics = pair_harmonics(response, geom, oi, oj, seq, t, truncation, numerics, constants)
    return _curve(harmonics, beta_grid, odd=True)


def single_qubit_weights(phi: float) -> Dict[int, float]:
    """K'_2n(0) for n in {-1, 0, 1}: cos^2 + sin^2 / 2 and sin^2 / 4."""
    s2 = math.sin(phi) ** 2
    return {-1: 0.25 * s2, 0: math.cos(phi) ** 2 + 0.5 * s2, 1: 0.25 * s2}


def phi_s_harmonics(
    response: ResponseField,
    z: float,
    phi: float,
    seq: PulseSequence,
    t: float,
    numerics: NumericsConfig = NUMERICS_CONFIG,
    constants: PhysicalConstants = CONSTANTS,
) -> Dict[int, complex]:
    """Phi_s^2n for n in {-1, 0, 1}; no other harmonic of alpha exists."""
    if not t > 0:
        raise ParameterError("evaluation time t must be positive")
    if not z > 0:
        raise ParameterError("qubit height z must be positive")
    seq = seq.with_duration(t)
    weights = single_qubit_weights(phi)
    restore = response.scale / response.length_scale**2

    def evaluate(omega: float) -> np.ndarray:
        orders, moments = radial_moments(response, z, response.omega_tilde(omega), 2, numerics)
        by_order = dict(zip(orders.tolist(), moments))
        return np.array([weights[n] * by_order[2 * n] for n in (-1, 0, 1)]) * restore

    filtered = _filtered_channels(response, seq, evaluate, numerics, constants) * _dephasing_prefactor(constants)
    filtered = _normalize(filtered, response, z, t, numerics)
    return dict(zip((-1, 0, 1), (complex(v) for v in filtered)))


def phi_s_from_harmonics(harmonics: Dict[int, complex], alpha: float) -> float:
    orders = np.array(sorted(harmonics))
    values = np.array([harmonics[n] for n in orders])
    return harmonic_sum(orders, values, alpha, odd=False, label="Phi_s", alternating=False, check_truncation=False)


def phi_s(
    response: ResponseField,
    z: float,
    orientation: QubitOrientation,
    seq: PulseSequence,
    t: float,
    numerics: NumericsConfig = NUMERICS_CONFIG,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """Single-qubit dephasing exponent; orientation.alpha is the azimuth from the material x axis."""
    harmonics = phi_s_harmonics(response, z, orientation.phi, seq, t, numerics, constants)
    return phi_s_from_harmonics(harmonics, orientation.alpha)


@dataclass(frozen=True)
class DephasingResult:
    phi_s_i: float
    phi_s_j: float
    harmonics: PairHarmonics
    t: float
    beta: float = 0.0
    normalization: str = "si"
    phi_c_harmonics: Dict[int, complex] = field(init=False)
    psi_c_harmonics: Dict[int, complex] = field(init=False)

    def __post_init__(self) -> None:
        if self.phi_s_i < 0 or self.phi_s_j < 0:
            raise ParameterError("single-qubit exponents must be >= 0")
        object.__setattr__(
            self, "phi_c_harmonics", {int(n): complex(v) for n, v in zip(self.harmonics.even_orders, self.harmonics.even)}
        )
        object.__setattr__(
            self, "psi_c_harmonics", {int(n): complex(v) for n, v in zip(self.harmonics.odd_orders, self.harmonics.odd)}
        )

    @property
    def phi_c(self) -> float:
        return float(_curve(self.harmonics, [self.beta], odd=False)[0])

    @property
    def psi_c(self) -> float:
        return float(_curve(self.harmonics, [self.beta], odd=True)[0])

    def bell(self) -> Tuple[float, float]:
        return bell_decays(self.phi_s_i, self.phi_s_j, self.phi_c)

    def check_consistency(self) -> bool:
        """|Phi_c| <= sqrt(Phi_s(i) Phi_s(j)); warns and returns False otherwise."""
        bound = math.sqrt(self.phi_s_i * self.phi_s_j)
        if abs(self.phi_c) > bound * (1.0 + CAUCHY_SCHWARZ_TOLERANCE) + 1e-300:
            warnings.warn(
                f"|Phi_c| = {abs(self.phi_c):.6e} exceeds sqrt(Phi_s Phi_s) = {bound:.6e}",
                ConsistencyWarning,
                stacklevel=2,
            )
            return False
        return True


def dephasing_result(
    response: ResponseField,
    geom: PairGeometry,
    oi: QubitOrientation,
    oj: QubitOrientation,
    seq: PulseSequence,
    t: float,
    truncation: Optional[int] = None,
    numerics: NumericsConfig = NUMERICS_CONFIG,
    constants: PhysicalConstants = CONSTANTS,
) -> DephasingResult:
    """Pair and single-qubit exponents at geom.beta; qubit azimuths are turned into lab-frame angles by adding beta."""
    harmonics = pair_harmonics(response, geom, oi, oj, seq, t, truncation, numerics, constants)
    singles = [
        phi_s(response, geom.z, QubitOrientation(o.phi, o.alpha + geom.beta), seq, t, numerics, constants)
        for o in (oi, oj)
    ]
    result = DephasingResult(
        max(singles[0], 0.0), max(singles[1], 0.0), harmonics, t, geom.beta, numerics.normalization
    )
    result.check_consistency()
    return result


def bell_decays(phi_s_i: float, phi_s_j: float, phi_c: float) -> Tuple[float, float]:
    """Decay exponents of |00> + |11> and |01> + |10>."""
    if phi_s_i < 0 or phi_s_j < 0:
        raise ParameterError("single-qubit exponents must be >= 0")
    base = phi_s_i + phi_s_j
    return base + 2.0 * phi_c, base - 2.0 * phi_c


def coherence_phase_evolution(psi_c: float, index) -> complex:
    """Unit phase multiplying the two-qubit coherence rho_ab,cd named by index (12, 13, 24 or 34)."""
    try:
        key = int(index)
    except (TypeError, ValueError):
        raise ParameterError(f"invalid coherence index {index!r}") from None
    if key in PHASE_PLUS:
        return cmath.exp(1j * psi_c)
    if key in PHASE_MINUS:
        return cmath.exp(-1j * psi_c)
    raise ParameterError(f"invalid coherence index {index!r}; expected one of 12, 13, 24, 34")


@dataclass(frozen=True)
class SuperconductorTimescaleInputs:
    # n_2D (m^-2), mobility (m^2/V s), film temperature (K), height (m)
    carrier_density: float
    mobility: float
    temperature: float
    z: float
    mass_ratio: float = 1.0

    def __post_init__(self) -> None:
        for name in ("carrier_density", "mobility", "temperature", "z", "mass_ratio"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")


@dataclass(frozen=True)
class MagnetTimescaleInputs:
    d0: float
    chi0: float
    gamma: float
    z: float
    temperature: float

    def __post_init__(self) -> None:
        for name in ("d0", "chi0", "gamma", "z", "temperature"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")


def drude_parameters(inputs: SuperconductorTimescaleInputs, constants: PhysicalConstants = CONSTANTS) -> Dict[str, float]:
    """k_F, sigma_n, mu and Gamma_p of a single parabolic band."""
    mass = inputs.mass_ratio * constants.electron_mass
    k_f = math.sqrt(2.0 * math.pi * inputs.carrier_density)
    return {
        "k_f": k_f,
        "sigma_n": inputs.carrier_density * constants.electron_charge * inputs.mobility,
        "mu": (constants.hbar * k_f) ** 2 / (2.0 * mass),
        "gamma_p": constants.electron_charge / (2.0 * mass * inputs.mobility),
    }


def timescale_sc(inputs: SuperconductorTimescaleInputs, constants: PhysicalConstants = CONSTANTS) -> float:
    """t_sc with the Drude mapping of carrier density and mobility; the band mass cancels."""
    p = drude_parameters(inputs, constants)
    gamma_tilde = constants.hbar * p["gamma_p"] / p["mu"]
    return sc_reference_time(inputs.z, p["k_f"], p["sigma_n"], gamma_tilde, inputs.temperature, constants)


def timescale_am(inputs: MagnetTimescaleInputs, constants: PhysicalConstants = CONSTANTS) -> float:
    return am_reference_time(inputs.z, inputs.d0, inputs.chi0 * inputs.gamma**2, inputs.temperature, constants)


def backsolve_chi0(inputs: MagnetTimescaleInputs, target: float, constants: PhysicalConstants = CONSTANTS) -> float:
    """chi0 for which t_am equals target (s)."""
    if not target > 0:
        raise ParameterError("target time must be positive")
    return inputs.chi0 * timescale_am(inputs, constants) / target


def reference_time(response: ResponseField, z: float) -> float:
    return response.reference_time(z)
