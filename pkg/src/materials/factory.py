"""
Build the configured material's ResponseField.

Dispatch by material.model:
- superconductor -> BdG conductivity map (cached, optionally parallel)
- antiferromagnet / altermagnet -> spin-diffusion susceptibility
- tabulated -> bilinear interpolation of a (q_tilde, theta_q, value) CSV
"""

from __future__ import annotations

import logging
from typing import Optional

from ..utils.config import RunConfig
from ..utils.db import ConductivityCache
from ..utils.io import load_tabulated_csv
from ..utils.specfun import CONSTANTS, PhysicalConstants
from .magnet import MagParams, magnet_response
from .response import ResponseField, tabulated_response
from .superconductor import ScParams, superconductor_response

logger = logging.getLogger(__name__)

# Dimensionless probe frequency of the superconductor symmetry spot-check (hbar omega / mu)
SC_PROBE_OMEGA = 1e-7


def response_from_config(
    config: RunConfig,
    cache: Optional[ConductivityCache] = None,
    threads: Optional[int] = None,
    constants: PhysicalConstants = CONSTANTS,
) -> ResponseField:
    material = config.material
    threads = config.numerics.threads if threads is None else threads
    logger.info("building %s response", material.model)

    if material.model == "superconductor":
        params = ScParams.from_config(material.superconductor, config.numerics)
        return superconductor_response(
            params,
            material.superconductor,
            probe_omega=SC_PROBE_OMEGA,
            cache=cache,
            threads=threads,
            constants=constants,
        )

    if material.model in ("antiferromagnet", "altermagnet"):
        params = MagParams.from_config(material.magnet, material.model == "altermagnet", constants)
        return magnet_response(params, material.magnet.temperature, constants=constants)

    tab = material.tabulated
    q_values, theta_values, values = load_tabulated_csv(tab.path)
    return tabulated_response(
        q_values,
        theta_values,
        values,
        name=f"tabulated:{tab.path}",
        symmetry_order=tab.symmetry_order,
        isotropic=tab.isotropic,
        inversion_symmetric=tab.inversion_symmetric,
        length_scale=tab.length_scale if tab.length_scale is not None else config.geometry.z,
        frequency_scale=tab.frequency_scale,
        scale=tab.scale,
        temperature=tab.temperature,
    )
