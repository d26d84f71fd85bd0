"""
Spin-diffusion susceptibility of 2D antiferromagnets and d-wave altermagnets.

Dimensionless variables: q_tilde = q * l_s, omega_tilde = omega / Gamma_m,
with l_s = sqrt(D_0 / Gamma_m). The susceptibility along the Neel axis is
reported in units of hbar * chi_0 * gamma^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np

from ..utils.config import MagnetConfig
from ..utils.errors import ParameterError
from ..utils.specfun import CONSTANTS, PhysicalConstants
from .response import ResponseField


@dataclass(frozen=True)
class MagParams:
    d2_over_d0: float = 0.0
    gamma_m: float = 1.0
    d0: float = 1.0
    chi0_hbar_gamma2: float = 1.0
    neel_angle: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.d2_over_d0 < 1:
            raise ParameterError("d2_over_d0 must lie in [0, 1)")
        if not self.gamma_m > 0 or not self.d0 > 0:
            raise ParameterError("gamma_m and d0 must be positive")

    @property
    def spin_diffusion_length(self) -> float:
        return math.sqrt(self.d0 / self.gamma_m)

    @property
    def is_altermagnet(self) -> bool:
        return self.d2_over_d0 > 0

    @classmethod
    def from_config(
        cls, cfg: MagnetConfig, altermagnet: bool, constants: PhysicalConstants = CONSTANTS
    ) -> "MagParams":
        gamma = cfg.gamma if cfg.gamma is not None else constants.electron_gyromagnetic_ratio
        return cls(
            d2_over_d0=cfg.d2_over_d0 if altermagnet else 0.0,
            gamma_m=cfg.d0 / cfg.spin_diffusion_length**2,
            d0=cfg.d0,
            chi0_hbar_gamma2=constants.hbar * cfg.chi0 * gamma**2,
            neel_angle=cfg.neel_angle,
        )


def diffusion_kernel(params: MagParams, q_tilde, theta_q, omega_tilde):
    """D(q)/Gamma_m: q^2 - r^2 q^4 cos^2(2 theta) / (-i omega + 1 + q^2), r = D_2/D_0."""
    q2 = np.asarray(q_tilde, dtype=float) ** 2
    theta_q = np.asarray(theta_q, dtype=float)
    if np.any(q2 < 0):
        raise ParameterError("q_tilde must be >= 0")
    value = q2 + 0j
    if params.d2_over_d0:
        r2 = params.d2_over_d0**2
        value = q2 - r2 * q2 * q2 * np.cos(2.0 * theta_q) ** 2 / (-1j * omega_tilde + 1.0 + q2)
    value = np.broadcast_to(value, np.broadcast_shapes(q2.shape, theta_q.shape))
    return value if value.ndim else complex(value)


def chi_neel(params: MagParams, q_tilde, theta_q, omega_tilde):
    """chi_N / (hbar chi_0 gamma^2) = (1 + D) / (-i omega + 1 + D)."""
    d = diffusion_kernel(params, q_tilde, theta_q, omega_tilde)
    value = (1.0 + d) / (-1j * omega_tilde + 1.0 + d)
    return value if np.ndim(value) else complex(value)


def response_O_magnet(params: MagParams, q_tilde, theta_q, omega_tilde):
    """q^2 Im chi_N cos^2(theta_q - theta_N), >= 0 for omega > 0."""
    q_tilde = np.asarray(q_tilde, dtype=float)
    theta_q = np.asarray(theta_q, dtype=float)
    chi = chi_neel(params, q_tilde, theta_q, omega_tilde)
    value = q_tilde**2 * np.imag(chi) * np.cos(theta_q - params.neel_angle) ** 2
    return value if np.ndim(value) else float(value)


def am_reference_time(
    z: float,
    d0: float,
    chi0_gamma2: float,
    temperature: float,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """t_am = 16 pi hbar z^2 D0 / (mu0^2 kB T chi0 gamma^2 m0^2)."""
    return (
        16.0 * math.pi * constants.hbar * z**2 * d0
        / (constants.mu0**2 * constants.kB * temperature * chi0_gamma2 * constants.m0**2)
    )


def magnet_response(
    params: MagParams,
    temperature: float,
    probe_omega: Optional[float] = None,
    constants: PhysicalConstants = CONSTANTS,
) -> ResponseField:
    """
    ResponseField of a magnet with l = l_s, omega_s = Gamma_m and
    scale = hbar chi_0 gamma^2 / l_s^2, so that the restored O is q^2 Im chi_N cos^2.
    """
    length = params.spin_diffusion_length
    return ResponseField(
        name="altermagnet" if params.is_altermagnet else "antiferromagnet",
        evaluator=lambda q, theta, omega: response_O_magnet(params, q, theta, omega),
        symmetry_order=4,
        isotropic=not params.is_altermagnet,
        inversion_symmetric=True,
        neel_factor=True,
        neel_angle=params.neel_angle,
        length_scale=length,
        frequency_scale=params.gamma_m,
        scale=params.chi0_hbar_gamma2 / length**2,
        temperature=temperature,
        probe_omega=probe_omega or 1e-3,
        reference_time_fn=partial(
            am_reference_time,
            d0=params.d0,
            chi0_gamma2=params.chi0_hbar_gamma2 / constants.hbar,
            temperature=temperature,
            constants=constants,
        ),
    )
