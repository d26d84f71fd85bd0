"""
Bogoliubov-de Gennes model of a 2D superconductor.

All energies are in units of the chemical potential mu and wavevectors in
units of k_F, so the band is eps = k^2 - 1. Provides:
- Model gap functions for s-, d- and g-wave pairing.
- The Nambu spectral function and its two-Lorentzian decomposition.
- Re sigma_T(q, theta_q, omega) / sigma_n by Lorentzian-pair overlap (default)
  or literal Gauss-Legendre quadrature over the internal frequency.
- Symmetry-folded, cached and parallel conductivity maps.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache, partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import constants as sc

from ..utils.config import NumericsConfig, SuperconductorConfig
from ..utils.db import ConductivityCache, round_key
from ..utils.errors import ConvergenceWarning, ParameterError
from ..utils.parallel import map_cells
from ..utils.specfun import CONSTANTS, PhysicalConstants, fermi_occupation, fermi_occupation_derivative
from .response import ResponseField

logger = logging.getLogger(__name__)

# Below omega < QUASI_STATIC_RATIO * kT the occupation difference becomes -d nF/d omega
QUASI_STATIC_RATIO = 1e-4
THERMAL_WINDOW = 20.0
CONVERGENCE_TOLERANCE = 0.01
WEAK_COUPLING_RATIO = 1.764


class GapKind(str, Enum):
    S = "s"
    D = "d"
    G = "g"

    @property
    def symmetry_order(self) -> int:
        return {GapKind.S: 1, GapKind.D: 4, GapKind.G: 8}[self]


@dataclass(frozen=True)
class ScParams:
    gap_kind: GapKind = GapKind.D
    delta0_over_mu: float = 0.005
    gamma_p_over_mu: float = 5e-5
    kbt_over_mu: float = 0.8 * 0.005 / WEAK_COUPLING_RATIO

    # SI values used only for dimensional restoration
    sigma_n: Optional[float] = None
    k_f: Optional[float] = None

    radial_nodes: int = 64
    angular_nodes: int = 128
    omega1_nodes: int = 32
    # Radial half-width delta; None -> 10 max(Delta_0, Gamma, kT) clipped to 0.5
    window: Optional[float] = None
    method: str = "overlap"

    def __post_init__(self) -> None:
        object.__setattr__(self, "gap_kind", GapKind(self.gap_kind))
        if self.delta0_over_mu < 0:
            raise ParameterError("delta0_over_mu must be >= 0")
        if not self.gamma_p_over_mu > 0:
            raise ParameterError("gamma_p_over_mu must be positive")
        if not self.kbt_over_mu > 0:
            raise ParameterError("kbt_over_mu must be positive")
        if min(self.radial_nodes, self.angular_nodes, self.omega1_nodes) < 8:
            raise ParameterError("conductivity grid counts must be >= 8")
        if self.angular_nodes % 2:
            raise ParameterError("angular_nodes must be even")
        if self.window is not None and not 0 < self.window <= 0.5:
            raise ParameterError("radial window must lie in (0, 0.5]")
        if self.method not in ("overlap", "quadrature"):
            raise ParameterError("method must be overlap or quadrature")

    @property
    def radial_window(self) -> float:
        if self.window is not None:
            return self.window
        return min(0.5, 10.0 * max(self.delta0_over_mu, self.gamma_p_over_mu, self.kbt_over_mu))

    def cache_key(self) -> str:
        payload = dataclasses.asdict(self)
        payload["gap_kind"] = self.gap_kind.value
        payload["window"] = self.radial_window
        payload.pop("sigma_n")
        payload.pop("k_f")
        text = json.dumps(payload, sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]

    def refined(self) -> "ScParams":
        """Doubled radial and angular grids (and internal frequency nodes for quadrature)."""
        return dataclasses.replace(
            self,
            radial_nodes=2 * self.radial_nodes,
            angular_nodes=2 * self.angular_nodes,
            omega1_nodes=2 * self.omega1_nodes if self.method == "quadrature" else self.omega1_nodes,
        )

    @classmethod
    def from_config(cls, cfg: SuperconductorConfig, numerics: NumericsConfig) -> "ScParams":
        k_f, sigma_n = normal_state_inputs(cfg)
        return cls(
            gap_kind=GapKind(cfg.gap),
            delta0_over_mu=cfg.delta0_over_mu,
            gamma_p_over_mu=cfg.gamma_p_over_mu,
            kbt_over_mu=cfg.resolved_kbt_over_mu,
            sigma_n=sigma_n,
            k_f=k_f,
            radial_nodes=numerics.radial_nodes,
            angular_nodes=numerics.angular_nodes,
            omega1_nodes=numerics.omega1_nodes,
            window=numerics.window,
            method=numerics.conductivity_method,
        )


def normal_state_inputs(cfg: SuperconductorConfig) -> Tuple[float, float]:
    """(k_F, sigma_n) from the sheet carrier density and mobility of a single parabolic band."""
    k_f = math.sqrt(2.0 * math.pi * cfg.carrier_density)
    sigma_n = cfg.carrier_density * sc.e * cfg.mobility
    return k_f, sigma_n


def gap(kind: GapKind, delta0: float, theta_k):
    """Delta_s = Delta_0, Delta_d = Delta_0 sin 2 theta, Delta_g = Delta_0 sin 4 theta."""
    kind = GapKind(kind)
    theta_k = np.asarray(theta_k, dtype=float)
    if kind is GapKind.S:
        value = np.full_like(theta_k, delta0)
    elif kind is GapKind.D:
        value = delta0 * np.sin(2.0 * theta_k)
    else:
        value = delta0 * np.sin(4.0 * theta_k)
    return value if value.ndim else float(value)


def _spectral_coefficients(eps, delta, omega, gamma):
    """(a, b, d) with A = a 1 + b tau_3 + d tau_1."""
    p = omega * omega - gamma * gamma - eps * eps - delta * delta
    q = 2.0 * omega * gamma
    denom = math.pi * (p * p + q * q)
    c0 = -gamma * p / denom
    c1 = q / denom
    return c0 + c1 * omega, c1 * eps, c1 * delta


def spectral_function(params: ScParams, k_tilde, omega_tilde) -> np.ndarray:
    """
    Dimensionless Nambu spectral function, shape (..., 2, 2).

    Equal to -Im[(omega + i Gamma) - eps tau_3 - Delta tau_1]^-1 / pi.
    """
    k = np.asarray(k_tilde, dtype=float)
    if k.shape[-1] != 2:
        raise ParameterError("k_tilde must be a 2-vector (or an array of them)")
    kx, ky = k[..., 0], k[..., 1]
    eps = kx * kx + ky * ky - 1.0
    delta = gap(params.gap_kind, params.delta0_over_mu, np.arctan2(ky, kx))
    a, b, d = _spectral_coefficients(eps, delta, np.asarray(omega_tilde, dtype=float), params.gamma_p_over_mu)
    a, b, d = np.broadcast_arrays(a, b, d)
    out = np.empty(a.shape + (2, 2))
    out[..., 0, 0] = a + b
    out[..., 1, 1] = a - b
    out[..., 0, 1] = d
    out[..., 1, 0] = d
    return out


def spectral_projectors(params: ScParams, k_tilde) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Quasiparticle energy E and projectors P_+, P_- with A = sum_s P_s L_Gamma(omega - s E).
    """
    k = np.asarray(k_tilde, dtype=float)
    kx, ky = k[..., 0], k[..., 1]
    eps = kx * kx + ky * ky - 1.0
    delta = gap(params.gap_kind, params.delta0_over_mu, np.arctan2(ky, kx))
    energy = np.sqrt(eps * eps + delta * delta)
    safe = np.maximum(energy, np.finfo(float).tiny)
    out = []
    for s in (1.0, -1.0):
        p = np.empty(np.shape(energy) + (2, 2))
        p[..., 0, 0] = 0.5 * (1.0 + s * eps / safe)
        p[..., 1, 1] = 0.5 * (1.0 - s * eps / safe)
        p[..., 0, 1] = 0.5 * s * delta / safe
        p[..., 1, 0] = 0.5 * s * delta / safe
        out.append(p)
    return energy, out[0], out[1]


def _lorentzian(x, width: float):
    return (width / math.pi) / (x * x + width * width)


def _occupation_window(x, omega: float, kbt: float):
    """[nF(x) - nF(x + omega)] / omega, or -d nF/dx in the quasi-static branch; zero outside the thermal window."""
    if omega < QUASI_STATIC_RATIO * kbt:
        value = fermi_occupation_derivative(x / kbt) / kbt
    else:
        value = (fermi_occupation(x / kbt) - fermi_occupation((x + omega) / kbt)) / omega
    return np.where(np.abs(x) <= THERMAL_WINDOW * kbt, value, 0.0)


@lru_cache(maxsize=16)
def _legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    return leggauss(order)


def _polar_grid(params: ScParams, q: float, adapted: bool) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Polar k grid in the frame where q points along x.

    The radial shell [c - delta, c + delta] is centred on c = sqrt(1 - q^2/4),
    where both k +- q/2 sit on the Fermi circle. Angular nodes cluster around
    phi = pi/2, 3pi/2 with width Gamma/q (the intraband resonance) when adapted.
    Returns k, phi and weights for the measure k dk dphi.
    """
    delta = params.radial_window
    center = math.sqrt(max(1.0 - 0.25 * q * q, delta * delta))
    lo = max(center - delta, 0.0)
    hi = center + delta
    x, w = _legendre(params.radial_nodes)
    k = lo + 0.5 * (hi - lo) * (x + 1.0)
    wk = 0.5 * (hi - lo) * w * k

    half = params.angular_nodes // 2
    s = -0.5 * math.pi + (np.arange(half) + 0.5) * math.pi / half
    ratio = 1.0
    if adapted and q > 0:
        ratio = min(1.0, params.gamma_p_over_mu / q)
    offset = np.arctan(ratio * np.tan(s))
    jac = (math.pi / half) * ratio / (np.cos(s) ** 2 + ratio * ratio * np.sin(s) ** 2)
    phi = np.concatenate([0.5 * math.pi + offset, 1.5 * math.pi + offset])
    wphi = np.concatenate([jac, jac])
    return k[:, None], phi[None, :], wk[:, None] * wphi[None, :]


def _shifted_states(params: ScParams, q: float, theta_q: float, k: np.ndarray, phi: np.ndarray):
    """Band energy and gap at k -+ q/2, with the gap read at lab-frame angles."""
    kx = k * np.cos(phi)
    ky = k * np.sin(phi)
    states = []
    for sign in (-1.0, 1.0):
        sx = kx + sign * 0.5 * q
        eps = sx * sx + ky * ky - 1.0
        delta = gap(params.gap_kind, params.delta0_over_mu, np.arctan2(ky, sx) + theta_q)
        states.append((eps, delta))
    return ky, states[0], states[1]


def _overlap_integral(params: ScParams, q: float, theta_q: float, omega: float) -> float:
    k, phi, weights = _polar_grid(params, q, adapted=True)
    ky, (eps_m, delta_m), (eps_p, delta_p) = _shifted_states(params, q, theta_q, k, phi)
    gamma = params.gamma_p_over_mu
    kbt = params.kbt_over_mu

    e_m = np.sqrt(eps_m * eps_m + delta_m * delta_m)
    e_p = np.sqrt(eps_p * eps_p + delta_p * delta_p)
    tiny = np.finfo(float).tiny
    coherence = (eps_m * eps_p + delta_m * delta_p) / (np.maximum(e_m, tiny) * np.maximum(e_p, tiny))

    total = np.zeros(np.broadcast_shapes(k.shape, phi.shape))
    for s in (1.0, -1.0):
        a = s * e_m
        w_a = _occupation_window(a, omega, kbt)
        for sp in (1.0, -1.0):
            b = sp * e_p - omega
            trace = 0.5 * (1.0 + s * sp * coherence)
            w_bar = 0.5 * (w_a + _occupation_window(b, omega, kbt))
            total += trace * _lorentzian(a - b, 2.0 * gamma) * w_bar

    velocity2 = 4.0 * ky * ky
    return float(np.sum(weights * velocity2 * total))


def _quadrature_integral(params: ScParams, q: float, theta_q: float, omega: float) -> float:
    k, phi, weights = _polar_grid(params, q, adapted=False)
    ky, (eps_m, delta_m), (eps_p, delta_p) = _shifted_states(params, q, theta_q, k, phi)
    gamma = params.gamma_p_over_mu
    kbt = params.kbt_over_mu
    x, w = _legendre(params.omega1_nodes)
    half_width = THERMAL_WINDOW * kbt

    total = np.zeros(np.broadcast_shapes(k.shape, phi.shape))
    for node, weight in zip(half_width * x, half_width * w):
        a1, b1, d1 = _spectral_coefficients(eps_m, delta_m, node, gamma)
        a2, b2, d2 = _spectral_coefficients(eps_p, delta_p, node + omega, gamma)
        trace = 2.0 * (a1 * a2 + b1 * b2 + d1 * d2)
        total += weight * trace * _occupation_window(node, omega, kbt)

    velocity2 = 4.0 * ky * ky
    return float(np.sum(weights * velocity2 * total))


def transverse_conductivity(params: ScParams, q_tilde: float, theta_q: float, omega_tilde: float) -> float:
    """
    Re sigma_T(q, theta_q, omega) / sigma_n >= 0.

    pi^2 (omega^2 + 4 Gamma^2) / 2 Gamma times the k-space (d^2k / (2 pi)^2)
    and internal-frequency integral of v_T^2 Tr[A(k-) A(k+)] times the
    occupation window.
    """
    q_tilde = float(q_tilde)
    omega_tilde = float(omega_tilde)
    if not omega_tilde > 0:
        raise ParameterError("transverse_conductivity requires omega_tilde > 0")
    if q_tilde < 0 or not math.isfinite(q_tilde):
        raise ParameterError("transverse_conductivity requires finite q_tilde >= 0")

    if params.method == "overlap":
        integral = _overlap_integral(params, q_tilde, float(theta_q), omega_tilde)
    else:
        integral = _quadrature_integral(params, q_tilde, float(theta_q), omega_tilde)

    gamma = params.gamma_p_over_mu
    prefactor = math.pi**2 * (omega_tilde**2 + 4.0 * gamma * gamma) / (2.0 * gamma)
    return max(0.0, prefactor * integral / (4.0 * math.pi**2))


def normal_state_conductivity(q_tilde: float, gamma: float) -> float:
    """
    Closed-form Re sigma_T / sigma_n of the clean normal state at omega -> 0:
    2 Gamma / s - (2 Gamma^2 / q^2)(1 - Gamma / s), s = sqrt(q^2 + Gamma^2).
    """
    if q_tilde == 0:
        return 1.0
    s = math.hypot(q_tilde, gamma)
    return 2.0 * gamma / s - (2.0 * gamma * gamma / (q_tilde * q_tilde)) * (1.0 - gamma / s)


def fold_angle(kind: GapKind, theta_q: float) -> float:
    """Map theta_q into [0, pi/p] using p-fold rotation and the mirror theta -> -theta."""
    order = GapKind(kind).symmetry_order
    if order == 1:
        return 0.0
    period = 2.0 * math.pi / order
    folded = math.fmod(theta_q, period)
    if folded < 0:
        folded += period
    if folded > 0.5 * period:
        folded = period - folded
    return folded


def _cell_value(params: ScParams, omega_tilde: float, cell: Tuple[float, float]) -> float:
    q, theta = cell
    return transverse_conductivity(params, q, theta, omega_tilde)


def conductivity_map(
    params: ScParams,
    q_grid: Sequence[float],
    theta_grid: Sequence[float],
    omega_tilde: float,
    cache: Optional[ConductivityCache] = None,
    threads: int = 1,
) -> np.ndarray:
    """
    Table of Re sigma_T / sigma_n with shape (len(q_grid), len(theta_grid)).

    Only the fundamental angular domain is computed; mirrored and rotated
    entries reuse those cells. Cells already in the cache are not recomputed.
    """
    q_grid = [float(q) for q in q_grid]
    theta_grid = [float(t) for t in theta_grid]
    if not q_grid or not theta_grid:
        raise ParameterError("conductivity_map needs non-empty grids")

    folded = [fold_angle(params.gap_kind, t) for t in theta_grid]
    unique: Dict[Tuple[float, float], Tuple[float, float]] = {}
    for q in q_grid:
        for t in folded:
            unique.setdefault((round_key(q), round_key(t)), (q, t))

    key = params.cache_key()
    values: Dict[Tuple[float, float], float] = {}
    if cache is not None:
        hits = cache.lookup_many(key, omega_tilde, unique.values())
        values.update({(round_key(q), round_key(t)): v for (q, t), v in hits.items()})
    missing: List[Tuple[float, float]] = [cell for k, cell in unique.items() if k not in values]

    logger.info(
        "conductivity map: %d cells, %d unique after folding, %d to compute",
        len(q_grid) * len(theta_grid),
        len(unique),
        len(missing),
    )
    computed = map_cells(partial(_cell_value, params, omega_tilde), missing, threads)
    for (q, t), v in zip(missing, computed):
        values[(round_key(q), round_key(t))] = v
    if cache is not None and missing:
        cache.store_many(key, omega_tilde, [(q, t, v) for (q, t), v in zip(missing, computed)])

    table = np.empty((len(q_grid), len(theta_grid)))
    for i, q in enumerate(q_grid):
        for j, t in enumerate(folded):
            table[i, j] = values[(round_key(q), round_key(t))]
    return table


def conductivity_convergence(params: ScParams, q_tilde: float, theta_q: float, omega_tilde: float) -> float:
    """Relative change of sigma when the k grid (and omega_1 grid for quadrature) is doubled."""
    base = transverse_conductivity(params, q_tilde, theta_q, omega_tilde)
    refined = transverse_conductivity(params.refined(), q_tilde, theta_q, omega_tilde)
    change = abs(refined - base) / max(abs(refined), np.finfo(float).tiny)
    if change > CONVERGENCE_TOLERANCE:
        warnings.warn(
            f"conductivity changed by {change:.2%} on grid doubling at q={q_tilde:g}, theta={theta_q:g}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return change


def chemical_potential(cfg: SuperconductorConfig, constants: PhysicalConstants = CONSTANTS) -> float:
    """mu in J, fixed by the film temperature and kB T / mu."""
    return constants.kB * cfg.temperature / cfg.resolved_kbt_over_mu


def sc_reference_time(
    z: float,
    k_f: float,
    sigma_n: float,
    gamma_tilde: float,
    temperature: float,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """
    t_sc = 2 pi z hbar mu / (k_F sigma_n Gamma_p m0^2 mu0^2 kB T).

    With Gamma_p = gamma_tilde * mu / hbar the chemical potential cancels.
    """
    return (
        2.0 * math.pi * z * constants.hbar**2
        / (k_f * sigma_n * gamma_tilde * constants.m0**2 * constants.mu0**2 * constants.kB * temperature)
    )


def superconductor_response(
    params: ScParams,
    cfg: SuperconductorConfig,
    probe_omega: float,
    probe_q: float = 0.05,
    cache: Optional[ConductivityCache] = None,
    threads: int = 1,
    constants: PhysicalConstants = CONSTANTS,
) -> ResponseField:
    """
    ResponseField O = omega Re sigma_T with l = 1/k_F, omega_s = mu/hbar, scale = sigma_n omega_s.

    Full (q, theta) tables go through conductivity_map and share its cache.
    """
    k_f, sigma_n = normal_state_inputs(cfg)
    omega_scale = chemical_potential(cfg, constants) / constants.hbar

    def evaluate(q, theta, omega):
        q, theta = np.broadcast_arrays(np.asarray(q, dtype=float), np.asarray(theta, dtype=float))
        flat = [transverse_conductivity(params, qi, ti, omega) for qi, ti in zip(q.ravel(), theta.ravel())]
        return omega * np.asarray(flat).reshape(q.shape)

    def evaluate_grid(q, theta, omega):
        return omega * conductivity_map(params, q, theta, omega, cache=cache, threads=threads)

    return ResponseField(
        name=f"{params.gap_kind.value}-wave superconductor",
        evaluator=evaluate,
        symmetry_order=params.gap_kind.symmetry_order,
        isotropic=params.gap_kind is GapKind.S,
        inversion_symmetric=True,
        length_scale=1.0 / k_f,
        frequency_scale=omega_scale,
        scale=sigma_n * omega_scale,
        temperature=cfg.temperature,
        probe_q=probe_q,
        probe_omega=probe_omega,
        analytic=False,
        grid_evaluator=evaluate_grid,
        reference_time_fn=partial(
            sc_reference_time,
            k_f=k_f,
            sigma_n=sigma_n,
            gamma_tilde=params.gamma_p_over_mu,
            temperature=cfg.temperature,
            constants=constants,
        ),
    )
