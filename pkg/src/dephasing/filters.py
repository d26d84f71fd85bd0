"""
Pulse-sequence filter functions and the thermally weighted frequency integral.

Covers:
- Ramsey, CPMG and an idealized narrow-band dynamical-decoupling filter.
- F(omega, t) = 1/2 |int_0^t y(s) exp(i omega s) ds|^2 for toggling sequences.
- int_0^omega_c coth(hbar omega / 2 kB T) F(omega, t) S(omega) d omega on
  composite Gauss-Legendre panels, or its quasi-static shortcut.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from ..utils.errors import NonConvergenceError, ParameterError
from ..utils.specfun import CONSTANTS, PhysicalConstants, thermal_coth

logger = logging.getLogger(__name__)

RAMSEY = "ramsey"
CPMG = "cpmg"
NARROWBAND = "narrowband"

# Relative agreement of two successive panel-order estimates
INTEGRAL_RTOL = 1e-8
START_ORDER = 4

Spectrum = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PulseSequence:
    kind: str
    duration: float
    pulses: int = 0
    omega_dd: Optional[float] = None
    bandwidth: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in (RAMSEY, CPMG, NARROWBAND):
            raise ParameterError(f"unknown pulse sequence '{self.kind}'")
        if not self.duration > 0:
            raise ParameterError("sequence duration t must be positive")
        if self.kind == CPMG and self.pulses < 1:
            raise ParameterError("CPMG needs at least one pi pulse")
        if self.kind == NARROWBAND:
            if self.omega_dd is None or not self.omega_dd > 0:
                raise ParameterError("narrow-band filter needs omega_dd > 0")
            if self.bandwidth is None or not 0 < self.bandwidth <= 0.5:
                raise ParameterError("narrow-band relative bandwidth must lie in (0, 0.5]")

    @classmethod
    def ramsey(cls, t: float) -> "PulseSequence":
        return cls(RAMSEY, t)

    @classmethod
    def cpmg(cls, pulses: int, t: float) -> "PulseSequence":
        return cls(CPMG, t, pulses=int(pulses))

    @classmethod
    def narrowband(cls, omega_dd: float, bandwidth: float, t: float) -> "PulseSequence":
        return cls(NARROWBAND, t, omega_dd=float(omega_dd), bandwidth=float(bandwidth))

    def with_duration(self, t: float) -> "PulseSequence":
        return dataclasses.replace(self, duration=float(t))

    def toggling_times(self, t: Optional[float] = None) -> np.ndarray:
        """0 = t_0 < t_1 < ... < t_{n+1} = t; CPMG pulses sit at (2k-1) t / 2n."""
        t = self.duration if t is None else t
        if self.kind == RAMSEY:
            return np.array([0.0, t])
        if self.kind == CPMG:
            k = np.arange(1, self.pulses + 1)
            return np.concatenate([[0.0], (2 * k - 1) * t / (2 * self.pulses), [t]])
        raise ParameterError("a narrow-band filter has no toggling representation")

    def center_frequency(self, t: Optional[float] = None) -> float:
        t = self.duration if t is None else t
        if self.kind == RAMSEY:
            return math.pi / t
        if self.kind == CPMG:
            return math.pi * self.pulses / t
        return float(self.omega_dd)

    def default_cutoff(self, t: Optional[float] = None) -> float:
        """omega_c = 100 max(pi n / t, 1 / t), widened to hold the whole narrow band."""
        t = self.duration if t is None else t
        cutoff = 100.0 * max(math.pi * max(self.pulses, 1) / t, 1.0 / t)
        if self.kind == NARROWBAND:
            cutoff = max(cutoff, 2.0 * self.omega_dd * (1.0 + self.bandwidth))
        return cutoff


@dataclass(frozen=True)
class FrequencyIntegralConfig:
    # None -> PulseSequence.default_cutoff
    cutoff: Optional[float] = None
    node_budget: int = 65536
    quasi_static: bool = True

    def __post_init__(self) -> None:
        if self.cutoff is not None and not self.cutoff > 0:
            raise ParameterError("frequency cutoff must be positive")
        if self.node_budget < 16:
            raise ParameterError("frequency node budget must be >= 16")


def _segment_sum(edges: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """int y(s) exp(i omega s) ds with y = +1, -1, +1, ... on consecutive segments."""
    a = edges[:-1]
    b = edges[1:]
    signs = np.where(np.arange(a.size) % 2 == 0, 1.0, -1.0)
    w = omega[..., None]
    width = b - a
    # exp(i w (a+b)/2) * width * sinc(w width / 2), exact and finite at w = 0
    segments = np.exp(0.5j * w * (a + b)) * width * np.sinc(w * width / (2.0 * np.pi))
    return np.sum(signs * segments, axis=-1)


def filter_value(seq: PulseSequence, omega, t: Optional[float] = None):
    """
    Filter function F(omega, t) >= 0 of a pulse sequence.

    Ramsey uses the closed form (1 - cos omega t)/omega^2 written as
    (t^2/2) sinc^2 so that omega -> 0 gives t^2/2 without cancellation.
    """
    t = seq.duration if t is None else float(t)
    if not t > 0:
        raise ParameterError("filter_value requires t > 0")
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0) or not np.all(np.isfinite(omega)):
        raise ParameterError("filter_value requires finite omega >= 0")

    if seq.kind == RAMSEY:
        value = 0.5 * t * t * np.sinc(omega * t / (2.0 * np.pi)) ** 2
    elif seq.kind == CPMG:
        value = 0.5 * np.abs(_segment_sum(seq.toggling_times(t), omega)) ** 2
    else:
        width = seq.bandwidth * seq.omega_dd
        inside = np.abs(omega - seq.omega_dd) <= 0.5 * width
        value = np.where(inside, 0.5 * math.pi * t / width, 0.0)
    return value if np.ndim(value) else float(value)


def toggling_filter_value(seq: PulseSequence, omega, t: Optional[float] = None):
    """Direct toggling-integral evaluation, valid for Ramsey and CPMG alike."""
    t = seq.duration if t is None else float(t)
    omega = np.asarray(omega, dtype=float)
    value = 0.5 * np.abs(_segment_sum(seq.toggling_times(t), omega)) ** 2
    return value if np.ndim(value) else float(value)


@lru_cache(maxsize=32)
def _legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    return leggauss(order)


def _panel_edges(seq: PulseSequence, cutoff: float) -> np.ndarray:
    """Panels of width 2 pi / t; a narrow-band filter is a single panel over its box."""
    if seq.kind == NARROWBAND:
        half = 0.5 * seq.bandwidth * seq.omega_dd
        return np.array([seq.omega_dd - half, min(seq.omega_dd + half, cutoff)])
    width = 2.0 * math.pi / seq.duration
    count = max(1, int(math.ceil(cutoff / width)))
    return np.linspace(0.0, cutoff, count + 1)


def _composite_nodes(edges: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = _legendre(order)
    a = edges[:-1, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    nodes = a + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def _adaptive_integral(integrand: Callable[[np.ndarray], np.ndarray], edges: np.ndarray, budget: int) -> float:
    """Double the per-panel Gauss-Legendre order until two estimates agree."""
    panels = edges.size - 1
    order = START_ORDER
    if panels * order * 2 > budget:
        raise NonConvergenceError(
            f"frequency quadrature needs {panels * order * 2} nodes for {panels} panels, budget is {budget}"
        )

    def estimate(k: int) -> float:
        nodes, weights = _composite_nodes(edges, k)
        values = np.broadcast_to(np.asarray(integrand(nodes), dtype=float), nodes.shape)
        if not np.all(np.isfinite(values)):
            raise NonConvergenceError("non-finite integrand inside the frequency window")
        return float(np.dot(weights, values))

    previous = estimate(order)
    while True:
        order *= 2
        if panels * order > budget:
            raise NonConvergenceError(
                f"frequency quadrature did not converge within {budget} nodes (last estimate {previous:.6e})"
            )
        current = estimate(order)
        if abs(current - previous) <= INTEGRAL_RTOL * abs(current):
            logger.debug("frequency integral converged: %d panels x order %d", panels, order)
            return current
        previous = current


def _evaluate_spectrum(spectrum: Spectrum, omega: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(spectrum(omega), dtype=float), np.shape(omega))


def filter_integral(
    seq: PulseSequence,
    cfg: FrequencyIntegralConfig,
    spectrum: Spectrum,
    temperature: float,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """
    int_0^omega_c d omega coth(hbar omega / 2 kB T) F(omega, t) S(omega).

    In quasi-static mode S(omega)/omega is treated as flat across the filter
    band and evaluated once at the sequence's center frequency:
    [S(w_ref)/w_ref] * int omega coth F d omega.
    """
    cutoff = cfg.cutoff if cfg.cutoff is not None else seq.default_cutoff()
    edges = _panel_edges(seq, cutoff)

    if cfg.quasi_static:
        omega_ref = seq.center_frequency()
        level = float(_evaluate_spectrum(spectrum, np.array([omega_ref]))[0]) / omega_ref
        if level == 0.0:
            return 0.0
        weight = _adaptive_integral(
            lambda w: w * thermal_coth(w, temperature, constants) * filter_value(seq, w),
            edges,
            cfg.node_budget,
        )
        return level * weight

    return _adaptive_integral(
        lambda w: thermal_coth(w, temperature, constants) * filter_value(seq, w) * _evaluate_spectrum(spectrum, w),
        edges,
        cfg.node_budget,
    )


def thermal_filter_weight(
    seq: PulseSequence,
    cfg: FrequencyIntegralConfig,
    temperature: float,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """int omega coth F d omega, the factor that multiplies S(w_ref)/w_ref in quasi-static mode."""
    return filter_integral(seq, dataclasses.replace(cfg, quasi_static=True), lambda w: w, temperature, constants)
