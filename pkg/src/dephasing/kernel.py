"""
Geometry and angular-harmonic machinery for two-qubit noise correlations.

Pipeline:
- orientation_constants: K0..K4 from the two qubit axes.
- weight_even / weight_odd: Bessel combinations K_2n(qD), L_2n+1(qD).
- angular_harmonics: O^m(q) = int dtheta exp(-i m theta) O(q, theta) by FFT.
- channel_integrals: int dq q exp(-2qz) K_2n(qD) O^2n(q) for every channel.
- correlated_spectrum / antisymmetric_spectrum: the harmonic sums J_c, eta_c,
  and correlated_spectrum_direct, a brute-force (q, theta) oracle.

Momenta are measured in the response's length unit, so z_tilde = z / l.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from ..materials.response import ResponseField
from ..utils.config import NUMERICS_CONFIG, NumericsConfig
from ..utils.errors import AliasingWarning, ConsistencyWarning, ParameterError, TruncationWarning
from ..utils.specfun import CONSTANTS, MAX_BESSEL_ORDER, PhysicalConstants, bessel_j, bessel_table

logger = logging.getLogger(__name__)

ALIASING_RATIO = 1e-3
TRUNCATION_RATIO = 1e-4
IMAGINARY_TOLERANCE = 1e-10
DIRECT_THETA_NODES = 1024


@dataclass(frozen=True)
class QubitOrientation:
    # Polar angle from the surface normal; azimuth relative to the pair axis
    phi: float = 0.0
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.phi) and math.isfinite(self.alpha)):
            raise ParameterError("orientation angles must be finite")

    @classmethod
    def perpendicular(cls) -> "QubitOrientation":
        return cls(0.0, 0.0)

    @classmethod
    def in_plane(cls, alpha: float = 0.0) -> "QubitOrientation":
        return cls(math.pi / 2, alpha)


@dataclass(frozen=True)
class PairGeometry:
    z: float
    d: float
    beta: float = 0.0

    def __post_init__(self) -> None:
        if not self.z > 0:
            raise ParameterError("qubit height z must be positive")
        if self.d < 0:
            raise ParameterError("separation D must be >= 0")

    @property
    def d_over_z(self) -> float:
        return self.d / self.z

    def with_beta(self, beta: float) -> "PairGeometry":
        return PairGeometry(self.z, self.d, float(beta))


@dataclass(frozen=True)
class OrientationConstants:
    k0: float
    k1: complex
    k2: complex
    k3: complex
    k4: complex

    def as_tuple(self) -> Tuple[float, complex, complex, complex, complex]:
        return (self.k0, self.k1, self.k2, self.k3, self.k4)


def orientation_constants(oi: QubitOrientation, oj: QubitOrientation) -> OrientationConstants:
    si, ci = math.sin(oi.phi), math.cos(oi.phi)
    sj, cj = math.sin(oj.phi), math.cos(oj.phi)
    k0 = ci * cj + 0.5 * si * sj * math.cos(oi.alpha - oj.alpha)
    k1 = 0.25 * si * sj * complex(math.cos(oi.alpha + oj.alpha), math.sin(oi.alpha + oj.alpha))
    k3 = 0.5 * (si * cj * complex(math.cos(oi.alpha), math.sin(oi.alpha)) - ci * sj * complex(math.cos(oj.alpha), math.sin(oj.alpha)))
    return OrientationConstants(k0, k1, k1.conjugate(), k3, k3.conjugate())


def swapped(geom: PairGeometry, oi: QubitOrientation, oj: QubitOrientation):
    """The same pair described from qubit j: beta -> beta + pi, axes exchanged, azimuths shifted by -pi."""
    return (
        geom.with_beta(geom.beta + math.pi),
        QubitOrientation(oj.phi, oj.alpha - math.pi),
        QubitOrientation(oi.phi, oi.alpha - math.pi),
    )


def weight_even(c: OrientationConstants, n: int, x):
    """K_2n(x) = K0 J_2n - K1 J_2n-2 - K2 J_2n+2 - K3 J_2n-1 + K4 J_2n+1."""
    n = int(n)
    if abs(2 * n) > MAX_BESSEL_ORDER - 2:
        raise ParameterError(f"|2n| = {abs(2 * n)} exceeds {MAX_BESSEL_ORDER - 2}")
    j = lambda m: bessel_j(m, x)
    value = c.k0 * j(2 * n) - c.k1 * j(2 * n - 2) - c.k2 * j(2 * n + 2) - c.k3 * j(2 * n - 1) + c.k4 * j(2 * n + 1)
    return value if np.ndim(value) else complex(value)


def weight_odd(c: OrientationConstants, n: int, x):
    """L_2n+1(x) = K0 J_2n+1 - K1 J_2n-1 - K2 J_2n+3 - K3 J_2n + K4 J_2n+2."""
    n = int(n)
    if abs(2 * n + 1) > MAX_BESSEL_ORDER - 1 or abs(2 * n + 3) > MAX_BESSEL_ORDER:
        raise ParameterError(f"|2n+1| = {abs(2 * n + 1)} exceeds the supported order")
    j = lambda m: bessel_j(m, x)
    value = c.k0 * j(2 * n + 1) - c.k1 * j(2 * n - 1) - c.k2 * j(2 * n + 3) - c.k3 * j(2 * n) + c.k4 * j(2 * n + 2)
    return value if np.ndim(value) else complex(value)


def _weight_rows(c: OrientationConstants, orders: np.ndarray, table: np.ndarray, top: int) -> np.ndarray:
    """Rows of the generic combination K0 J_m - K1 J_m-2 - K2 J_m+2 - K3 J_m-1 + K4 J_m+1 for each m."""
    j = lambda m: table[m + top]
    return np.array(
        [c.k0 * j(m) - c.k1 * j(m - 2) - c.k2 * j(m + 2) - c.k3 * j(m - 1) + c.k4 * j(m + 1) for m in orders]
    )


@lru_cache(maxsize=32)
def _legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    return leggauss(order)


def momentum_grid(z_tilde: float, nodes: int = 256, q_max_factor: float = 40.0) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, q_max_factor / z_tilde]."""
    if not z_tilde > 0:
        raise ParameterError("z_tilde must be positive")
    x, w = _legendre(nodes)
    q_max = q_max_factor / z_tilde
    return 0.5 * q_max * (x + 1.0), 0.5 * q_max * w


@dataclass(frozen=True)
class AngularSpectrum:
    orders: np.ndarray
    q_tilde: np.ndarray
    values: np.ndarray  # shape (len(orders), len(q_tilde))

    def harmonic(self, m: int) -> np.ndarray:
        index = int(m) + (self.orders.size - 1) // 2
        if not 0 <= index < self.orders.size:
            raise ParameterError(f"harmonic {m} outside the computed range")
        return self.values[index]


def angular_harmonics(
    response: ResponseField,
    q_tilde,
    omega_tilde: float,
    max_order: int,
    nodes: int,
    check_edge: bool = True,
) -> AngularSpectrum:
    """
    O^m(q) for |m| <= max_order by the trapezoidal rule on equispaced theta nodes.

    Harmonics outside the response's declared support are exact zeros. check_edge=False
    skips the warning on a large outermost harmonic, for callers that need no higher order.
    """
    if nodes < 4 * max_order + 8:
        raise ParameterError(f"need at least {4 * max_order + 8} theta nodes for |m| <= {max_order}")
    q = np.atleast_1d(np.asarray(q_tilde, dtype=float))
    theta = 2.0 * math.pi * np.arange(nodes) / nodes
    samples = response.table(q, theta, omega_tilde)

    coefficients = (2.0 * math.pi / nodes) * np.fft.fft(samples, axis=1)
    orders = np.arange(-max_order, max_order + 1)
    values = coefficients[:, orders % nodes].T.copy()

    support = set(int(m) for m in response.harmonic_support(max_order))
    for row, m in enumerate(orders):
        if int(m) not in support:
            values[row] = 0.0

    top = max((abs(m) for m in support), default=0)
    if check_edge and top > 0:
        reference = float(np.max(np.abs(values[max_order])))
        edge = max(float(np.max(np.abs(values[max_order + top]))), float(np.max(np.abs(values[max_order - top]))))
        if reference > 0 and edge > ALIASING_RATIO * reference:
            warnings.warn(
                f"harmonic |m|={top} of {response.name} is {edge / reference:.2e} of m=0; increase the truncation",
                AliasingWarning,
                stacklevel=2,
            )
    return AngularSpectrum(orders, q, values)


@dataclass(frozen=True)
class ChannelIntegrals:
    """
    Dimensionless radial integrals int dq q exp(-2qz) W(qD) O^m(q) per channel.

    even[k] belongs to n = even_orders[k] (m = 2n); odd[k] to n = odd_orders[k] (m = 2n+1).
    """

    even_orders: np.ndarray
    even: np.ndarray
    odd_orders: np.ndarray
    odd: np.ndarray
    # SI factor scale / l^2 restoring the q integral
    restore: float

    def even_value(self, n: int) -> complex:
        return complex(self.even[int(n) - int(self.even_orders[0])])

    def odd_value(self, n: int) -> complex:
        return complex(self.odd[int(n) - int(self.odd_orders[0])])


def channel_integrals(
    response: ResponseField,
    geom: PairGeometry,
    oi: QubitOrientation,
    oj: QubitOrientation,
    omega_tilde: float,
    truncation: int,
    numerics: NumericsConfig = NUMERICS_CONFIG,
) -> ChannelIntegrals:
    if truncation < 1:
        raise ParameterError("truncation N must be >= 1")
    length = response.length_scale
    z_tilde = geom.z / length
    d_tilde = geom.d / length
    q, w = momentum_grid(z_tilde, numerics.q_nodes, numerics.q_max_factor)

    max_order = 2 * truncation + 1
    nodes = max(numerics.theta_nodes, 4 * max_order + 8)
    spectrum = angular_harmonics(response, q, omega_tilde, max_order, nodes)

    top = 2 * truncation + 3
    table = bessel_table(top, q * d_tilde)
    c = orientation_constants(oi, oj)
    radial = w * q * np.exp(-2.0 * q * z_tilde)

    even_orders = np.arange(-truncation, truncation + 1)
    odd_orders = np.arange(-truncation - 1, truncation + 1)
    even_weights = _weight_rows(c, 2 * even_orders, table, top)
    odd_weights = _weight_rows(c, 2 * odd_orders + 1, table, top)
    even = np.array([np.sum(radial * wt * spectrum.harmonic(2 * n)) for n, wt in zip(even_orders, even_weights)])
    odd = np.array([np.sum(radial * wt * spectrum.harmonic(2 * n + 1)) for n, wt in zip(odd_orders, odd_weights)])
    return ChannelIntegrals(even_orders, even, odd_orders, odd, response.scale / length**2)


def radial_moments(
    response: ResponseField,
    z: float,
    omega_tilde: float,
    max_order: int,
    numerics: NumericsConfig = NUMERICS_CONFIG,
) -> Tuple[np.ndarray, np.ndarray]:
    """int dq q exp(-2qz) O^m(q) for |m| <= max_order, the single-qubit analogue of channel_integrals."""
    z_tilde = z / response.length_scale
    q, w = momentum_grid(z_tilde, numerics.q_nodes, numerics.q_max_factor)
    nodes = max(numerics.theta_nodes, 4 * max_order + 8)
    spectrum = angular_harmonics(response, q, omega_tilde, max_order, nodes, check_edge=False)
    radial = w * q * np.exp(-2.0 * q * z_tilde)
    return spectrum.orders, spectrum.values @ radial


def harmonic_sum(
    orders: np.ndarray,
    values: np.ndarray,
    beta: float,
    odd: bool,
    label: str,
    alternating: bool = True,
    check_truncation: bool = True,
) -> float:
    """
    Real part of sum_n (-1)^n exp(i m beta) values[n], m = 2n or 2n+1.

    alternating=False drops the (-1)^n for values that already carry it.
    Warns on an imaginary residual and, unless check_truncation=False for a closed sum,
    on a slowly decaying outermost term.
    """
    m = 2 * orders + (1 if odd else 0)
    sign = np.where(orders % 2 == 0, 1.0, -1.0) if alternating else 1.0
    terms = sign * np.exp(1j * m * beta) * values
    total = complex(np.sum(terms))
    magnitude = float(np.sum(np.abs(terms)))
    if magnitude == 0.0:
        return 0.0
    if abs(total.imag) > IMAGINARY_TOLERANCE * magnitude:
        warnings.warn(
            f"{label}: imaginary residual {abs(total.imag) / magnitude:.2e} of the harmonic sum",
            ConsistencyWarning,
            stacklevel=3,
        )
    outer = float(np.sum(np.abs(terms[np.abs(orders) == np.max(np.abs(orders))])))
    if check_truncation and outer > TRUNCATION_RATIO * magnitude:
        warnings.warn(
            f"{label}: outermost harmonic carries {outer / magnitude:.2e} of the sum; raise the truncation",
            TruncationWarning,
            stacklevel=3,
        )
    return total.real


def _spectrum_prefactor(constants: PhysicalConstants) -> float:
    return constants.mu0 * constants.m0**2 / (16.0 * math.pi**2)


def correlated_spectrum(
    response: ResponseField,
    geom: PairGeometry,
    oi: QubitOrientation,
    oj: QubitOrientation,
    omega: float,
    truncation: int = 8,
    numerics: NumericsConfig = NUMERICS_CONFIG,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """J_c(omega) from the harmonic expansion; omega in rad/s."""
    integrals = channel_integrals(response, geom, oi, oj, response.omega_tilde(omega), truncation, numerics)
    total = harmonic_sum(integrals.even_orders, integrals.even, geom.beta, odd=False, label="J_c")
    return _spectrum_prefactor(constants) * integrals.restore * total


def antisymmetric_spectrum(
    response: ResponseField,
    geom: PairGeometry,
    oi: QubitOrientation,
    oj: QubitOrientation,
    omega: float,
    truncation: int = 8,
    numerics: NumericsConfig = NUMERICS_CONFIG,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """eta_c(omega), the odd-channel sum; changes sign under qubit exchange."""
    integrals = channel_integrals(response, geom, oi, oj, response.omega_tilde(omega), truncation, numerics)
    total = harmonic_sum(integrals.odd_orders, integrals.odd, geom.beta, odd=True, label="eta_c")
    return _spectrum_prefactor(constants) * integrals.restore * total


def direct_kernels(
    oi: QubitOrientation, oj: QubitOrientation, x: np.ndarray, u: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pre-expansion even and odd kernels at X = qD cos u, u = beta - theta_q.
    """
    si, ci = math.sin(oi.phi), math.cos(oi.phi)
    sj, cj = math.sin(oj.phi), math.cos(oj.phi)
    arg = x * np.cos(u)
    axial = ci * cj + np.cos(oi.alpha + u) * np.cos(oj.alpha + u) * si * sj
    mixed = cj * np.cos(oi.alpha + u) * si - ci * np.cos(oj.alpha + u) * sj
    even = np.cos(arg) * axial + np.sin(arg) * mixed
    odd = np.sin(arg) * axial - np.cos(arg) * mixed
    return even, odd


def correlated_spectrum_direct(
    response: ResponseField,
    geom: PairGeometry,
    oi: QubitOrientation,
    oj: QubitOrientation,
    omega: float,
    numerics: NumericsConfig = NUMERICS_CONFIG,
    constants: PhysicalConstants = CONSTANTS,
    theta_nodes: Optional[int] = None,
    odd: bool = False,
) -> float:
    """
    Brute-force (q, theta_q) quadrature of the unexpanded kernel.

    Shares the Gauss-Legendre q grid of the harmonic route; theta_q uses a
    trapezoidal grid fine enough for the largest qD on that grid. With
    odd=True the antisymmetric kernel is integrated instead.
    """
    length = response.length_scale
    z_tilde = geom.z / length
    d_tilde = geom.d / length
    q, w = momentum_grid(z_tilde, numerics.q_nodes, numerics.q_max_factor)
    if theta_nodes is None:
        theta_nodes = max(DIRECT_THETA_NODES, 4 * int(math.ceil(q[-1] * d_tilde)) + 64)
    theta = 2.0 * math.pi * np.arange(theta_nodes) / theta_nodes

    samples = response.table(q, theta, response.omega_tilde(omega))
    even, odd_kernel = direct_kernels(oi, oj, (q * d_tilde)[:, None], geom.beta - theta[None, :])
    kernel = odd_kernel if odd else even
    angular = (2.0 * math.pi / theta_nodes) * np.sum(kernel * samples, axis=1)
    radial = w * q * np.exp(-2.0 * q * z_tilde)
    total = float(np.sum(radial * angular))
    return _spectrum_prefactor(constants) * (response.scale / length**2) * total
