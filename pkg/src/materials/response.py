"""
Evaluatable material responses O(q, theta_q, omega) with symmetry metadata.

A ResponseField works in the model's own dimensionless variables
(q_tilde = q * length_scale, omega_tilde = omega / frequency_scale) and
restores SI units through O_SI = scale * O_tilde.

Declared symmetry describes the angular "core" of the response; an optional
cos^2(theta_q - theta_N) factor (Neel-axis projection) widens the harmonic
support from p*Z to p*Z + {0, +-2}. Declarations are spot-checked at
construction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..utils.errors import ParameterError

logger = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray, np.ndarray, float], np.ndarray]
GridEvaluator = Callable[[np.ndarray, np.ndarray, float], np.ndarray]

ANALYTIC_TOLERANCE = 1e-6
QUADRATURE_TOLERANCE = 1e-3
SPOT_CHECK_SEED = 20240917


@dataclass(frozen=True)
class ResponseField:
    name: str
    evaluator: Evaluator

    # Core rotation order p: 0 = none declared; ignored when isotropic
    symmetry_order: int = 0
    isotropic: bool = False
    inversion_symmetric: bool = False

    # Multiply the core by cos^2(theta_q - neel_angle)
    neel_factor: bool = False
    neel_angle: float = 0.0

    # SI restoration: O_SI(q, theta, omega) = scale * O(q * length_scale, theta, omega / frequency_scale)
    length_scale: float = 1.0
    frequency_scale: float = 1.0
    scale: float = 1.0
    temperature: float = 300.0

    # Typical dimensionless arguments used by the symmetry spot-check
    probe_q: float = 1.0
    probe_omega: float = 1.0
    analytic: bool = True

    # Optional fast path for full (q, theta) tables
    grid_evaluator: Optional[GridEvaluator] = field(default=None, compare=False)
    check_symmetry: bool = field(default=True, compare=False)

    # Qubit height z (m) -> material reference time t_sc or t_am (s)
    reference_time_fn: Optional[Callable[[float], float]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.symmetry_order < 0:
            raise ParameterError("symmetry_order must be >= 0")
        for name in ("length_scale", "frequency_scale", "temperature", "probe_q", "probe_omega"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if self.check_symmetry:
            verify_symmetry(self)

    def __call__(self, q_tilde, theta_q, omega_tilde) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(q_tilde, dtype=float), np.asarray(theta_q, dtype=float), float(omega_tilde)))

    def table(self, q_tilde, theta_q, omega_tilde: float) -> np.ndarray:
        """O on the outer product grid, shape (len(q_tilde), len(theta_q))."""
        q = np.asarray(q_tilde, dtype=float)
        theta = np.asarray(theta_q, dtype=float)
        if self.grid_evaluator is not None:
            return np.asarray(self.grid_evaluator(q, theta, float(omega_tilde)), dtype=float)
        return np.asarray(self(q[:, None], theta[None, :], omega_tilde), dtype=float) * np.ones((q.size, theta.size))

    def angular_factor(self, theta_q) -> np.ndarray:
        theta_q = np.asarray(theta_q, dtype=float)
        if not self.neel_factor:
            return np.ones_like(theta_q)
        return np.cos(theta_q - self.neel_angle) ** 2

    def evaluate_si(self, q, theta_q, omega) -> np.ndarray:
        """O in SI units at wavevector q (1/m) and angular frequency omega (rad/s)."""
        q = np.asarray(q, dtype=float)
        return self.scale * self(q * self.length_scale, theta_q, float(omega) / self.frequency_scale)

    def omega_tilde(self, omega: float) -> float:
        return float(omega) / self.frequency_scale

    def reference_time(self, z: float) -> float:
        if self.reference_time_fn is None:
            raise ParameterError(f"response '{self.name}' has no reference time")
        return float(self.reference_time_fn(z))

    def harmonic_support(self, max_order: int) -> np.ndarray:
        """Indices m, |m| <= max_order, whose harmonics may be nonzero."""
        m = np.arange(-max_order, max_order + 1)
        shifts = (-2, 0, 2) if self.neel_factor else (0,)
        allowed = np.array([any(_core_allows(int(k) - s, self) for s in shifts) for k in m], dtype=bool)
        if self.inversion_symmetric:
            allowed &= m % 2 == 0
        return m[allowed]


def _core_allows(m: int, field_: ResponseField) -> bool:
    if field_.isotropic:
        return m == 0
    if field_.symmetry_order > 0:
        return m % field_.symmetry_order == 0
    return True


def _relative_residual(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b))) / scale


def verify_symmetry(response: ResponseField, samples: int = 3, seed: int = SPOT_CHECK_SEED) -> float:
    """
    Spot-check the declared symmetry at random (q, theta, omega).

    With a Neel factor f the core c = O / f is compared through
    O(theta + d) f(theta) = O(theta) f(theta + d). Returns the worst residual.
    """
    tolerance = ANALYTIC_TOLERANCE if response.analytic else QUADRATURE_TOLERANCE
    rng = np.random.default_rng(seed)
    q = response.probe_q * rng.uniform(0.5, 2.0, samples)
    omega = response.probe_omega * rng.uniform(0.5, 2.0, samples)
    theta = rng.uniform(0.0, 2.0 * math.pi, samples)

    shifts = []
    if response.isotropic:
        shifts.append(float(rng.uniform(0.1, 2.0 * math.pi - 0.1)))
    elif response.symmetry_order > 0:
        shifts.append(2.0 * math.pi / response.symmetry_order)
    if response.inversion_symmetric:
        shifts.append(math.pi)

    worst = 0.0
    for shift in shifts:
        # Inversion is a property of the full response, rotation a property of the core
        use_factor = response.neel_factor and shift != math.pi
        for qi, ti, wi in zip(q, theta, omega):
            base = response(qi, ti, wi)
            moved = response(qi, ti + shift, wi)
            if use_factor:
                lhs = moved * response.angular_factor(ti)
                rhs = base * response.angular_factor(ti + shift)
            else:
                lhs, rhs = moved, base
            worst = max(worst, _relative_residual(np.atleast_1d(lhs), np.atleast_1d(rhs)))
    if worst > tolerance:
        raise ParameterError(
            f"response '{response.name}' violates its declared symmetry (residual {worst:.3e} > {tolerance:.0e})"
        )
    logger.debug("symmetry spot-check for %s: residual %.3e", response.name, worst)
    return worst


def synthetic_response(
    name: str,
    profile: Callable[[np.ndarray, np.ndarray], np.ndarray],
    symmetry_order: int = 0,
    isotropic: bool = False,
    inversion_symmetric: bool = False,
    length_scale: float = 1.0,
    temperature: float = 300.0,
) -> ResponseField:
    """
    Analytic response O = omega_tilde * profile(q_tilde, theta_q).

    Linear in omega, so S/omega is band-flat and quasi-static evaluation is exact.
    The length unit is normally the qubit height z.
    """
    return ResponseField(
        name=name,
        evaluator=lambda q, theta, omega: omega * profile(q, theta),
        symmetry_order=symmetry_order,
        isotropic=isotropic,
        inversion_symmetric=inversion_symmetric,
        length_scale=length_scale,
        temperature=temperature,
    )


def tabulated_response(
    q_values: np.ndarray,
    theta_values: np.ndarray,
    values: np.ndarray,
    name: str = "tabulated",
    symmetry_order: int = 0,
    isotropic: bool = False,
    inversion_symmetric: bool = True,
    length_scale: float = 1.0,
    frequency_scale: float = 1.0,
    scale: float = 1.0,
    temperature: float = 300.0,
) -> ResponseField:
    """
    Response interpolated bilinearly from a (q_tilde, theta_q) table.

    Table entries are the band-flat quantity O/omega_tilde; theta wraps
    periodically and q outside the tabulated range gives zero.
    """
    q_values = np.asarray(q_values, dtype=float)
    theta_values = np.asarray(theta_values, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (q_values.size, theta_values.size):
        raise ParameterError("tabulated values must have shape (len(q), len(theta))")
    if q_values.size < 2 or theta_values.size < 2:
        raise ParameterError("tabulated grid needs at least two q and two theta nodes")
    if np.any(np.diff(q_values) <= 0) or np.any(np.diff(theta_values) <= 0):
        raise ParameterError("tabulated grid must be strictly increasing")

    theta0 = theta_values[0]
    theta_closed = np.concatenate([theta_values, [theta0 + 2.0 * math.pi]])
    values_closed = np.concatenate([values, values[:, :1]], axis=1)
    interpolator = RegularGridInterpolator(
        (q_values, theta_closed), values_closed, method="linear", bounds_error=False, fill_value=0.0
    )

    def evaluate(q, theta, omega):
        q, theta = np.broadcast_arrays(np.asarray(q, dtype=float), np.asarray(theta, dtype=float))
        wrapped = theta0 + np.mod(theta - theta0, 2.0 * math.pi)
        points = np.stack([q.ravel(), wrapped.ravel()], axis=-1)
        return omega * interpolator(points).reshape(q.shape)

    span = float(q_values[-1] - q_values[0])
    return ResponseField(
        name=name,
        evaluator=evaluate,
        symmetry_order=symmetry_order,
        isotropic=isotropic,
        inversion_symmetric=inversion_symmetric,
        length_scale=length_scale,
        frequency_scale=frequency_scale,
        scale=scale,
        temperature=temperature,
        probe_q=float(q_values[0]) + 0.25 * span,
        analytic=False,
    )
