"""
Entry point for the dephasometry toolkit (`python -m src.main <command>`).

Orchestration only: physics lives in src.materials and src.dephasing.

Commands:
- sweep-beta     Phi_c(beta), Phi_s(i), Phi_s(j) and Bell-state exponents
- sweep-alpha    Phi_s(alpha) of a single qubit
- harmonics      Phi_c^2n and Psi_c^2n+1 against D/z
- response-map   Re sigma / sigma_n, Im chi_N and O, or O / omega_tilde on a (q_tilde, theta_q) grid
- tomography     radial profile of one channel from Phi_c^2n measurements
- timescale      t_sc or t_am and the back-solved chi_0

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import logging
import math
import sys
import warnings
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src import __version__
from src.dephasing.engine import (
    DephasingResult,
    MagnetTimescaleInputs,
    SuperconductorTimescaleInputs,
    backsolve_chi0,
    bell_decays,
    drude_parameters,
    pair_harmonics,
    phi_s_from_harmonics,
    phi_s_harmonics,
    timescale_am,
    timescale_sc,
)
from src.dephasing.filters import PulseSequence
from src.dephasing.kernel import PairGeometry, QubitOrientation, channel_integrals
from src.dephasing.tomography import TomographyProblem, reconstruct
from src.materials.factory import response_from_config
from src.materials.magnet import MagParams, chi_neel
from src.materials.response import ResponseField
from src.utils.config import RunConfig, config_hash, load_run_config
from src.utils.db import ConductivityCache
from src.utils.errors import ConfigError, ConvergenceWarning, NonConvergenceError, ParameterError, ToolkitError
from src.utils.io import load_geometries, load_measurements, write_dataset
from src.utils.specfun import CONSTANTS

logger = logging.getLogger("src.main")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICS = 3

Records = List[Dict[str, object]]
Dataset = Tuple[Sequence[str], Records]


@contextlib.contextmanager
def material(config: RunConfig) -> Iterator[ResponseField]:
    """Response of the configured material; superconductors share the SQLite conductivity cache."""
    if config.material.model != "superconductor":
        yield response_from_config(config)
        return
    with ConductivityCache(config.cache.path) as cache:
        yield response_from_config(config, cache=cache)


def pulse_sequence(config: RunConfig, t: float) -> PulseSequence:
    seq = config.sequence
    if seq.kind == "ramsey":
        return PulseSequence.ramsey(t)
    if seq.kind == "cpmg":
        return PulseSequence.cpmg(seq.pulses, t)
    if seq.omega_dd is None:
        raise ConfigError("narrowband sequence needs omega_dd", key="sequence.omega_dd")
    return PulseSequence.narrowband(seq.omega_dd, seq.bandwidth, t)


def evaluation_time(config: RunConfig, response: ResponseField) -> float:
    """sequence.t if given, else t_over_ref (default 1) times the material reference time."""
    if config.sequence.t is not None:
        return config.sequence.t
    scale = config.sequence.t_over_ref if config.sequence.t_over_ref is not None else 1.0
    return scale * response.reference_time(config.geometry.z)


def qubit(cfg) -> QubitOrientation:
    return QubitOrientation(cfg.phi, cfg.alpha)


def cmd_sweep_beta(config: RunConfig) -> Dataset:
    geometry = config.geometry
    oi, oj = qubit(geometry.qubit_i), qubit(geometry.qubit_j)
    with material(config) as response:
        t = evaluation_time(config, response)
        seq = pulse_sequence(config, t)
        geom = PairGeometry(geometry.z, geometry.separation)
        harmonics = pair_harmonics(response, geom, oi, oj, seq, t, numerics=config.numerics)
        singles = [phi_s_harmonics(response, geometry.z, o.phi, seq, t, config.numerics) for o in (oi, oj)]

    records: Records = []
    for beta in geometry.beta.values():
        phi_i = phi_s_from_harmonics(singles[0], oi.alpha + beta)
        phi_j = phi_s_from_harmonics(singles[1], oj.alpha + beta)
        result = DephasingResult(max(phi_i, 0.0), max(phi_j, 0.0), harmonics, t, beta, config.numerics.normalization)
        result.check_consistency()
        plus, minus = bell_decays(result.phi_s_i, result.phi_s_j, result.phi_c)
        records.append(
            {
                "beta": beta,
                "phi_c": result.phi_c,
                "phi_s_i": result.phi_s_i,
                "phi_s_j": result.phi_s_j,
                "phi_bell_plus": plus,
                "phi_bell_minus": minus,
            }
        )
    return ("beta", "phi_c", "phi_s_i", "phi_s_j", "phi_bell_plus", "phi_bell_minus"), records


def cmd_sweep_alpha(config: RunConfig) -> Dataset:
    geometry = config.geometry
    with material(config) as response:
        t = evaluation_time(config, response)
        seq = pulse_sequence(config, t)
        harmonics = phi_s_harmonics(response, geometry.z, geometry.single_phi, seq, t, config.numerics)
    records = [{"alpha": a, "phi_s": phi_s_from_harmonics(harmonics, a)} for a in geometry.alpha.values()]
    return ("alpha", "phi_s"), records


def cmd_harmonics(config: RunConfig) -> Dataset:
    geometry = config.geometry
    oi, oj = qubit(geometry.qubit_i), qubit(geometry.qubit_j)
    records: Records = []
    with material(config) as response:
        t = evaluation_time(config, response)
        seq = pulse_sequence(config, t)
        for ratio in geometry.d_over_z_list:
            geom = PairGeometry(geometry.z, ratio * geometry.z)
            harmonics = pair_harmonics(response, geom, oi, oj, seq, t, numerics=config.numerics)
            logger.info("harmonics at D/z = %g done", ratio)
            for n in harmonics.even_orders:
                phi = harmonics.phi(int(n))
                psi = harmonics.psi(int(n))
                records.append(
                    {
                        "d_over_z": ratio,
                        "n": int(n),
                        "phi_c_real": phi.real,
                        "phi_c_imag": phi.imag,
                        "psi_c_real": psi.real,
                        "psi_c_imag": psi.imag,
                    }
                )
    return ("d_over_z", "n", "phi_c_real", "phi_c_imag", "psi_c_real", "psi_c_imag"), records


def cmd_response_map(config: RunConfig) -> Dataset:
    grid = config.response_map
    model = config.material.model
    q = np.array(grid.q.values())
    theta = np.array(grid.theta.values())
    with material(config) as response:
        omega = grid.omega_tilde if grid.omega_tilde is not None else response.probe_omega
        table = response.table(q, theta, omega)
    cells = [(a, b, qi, ti) for a, qi in enumerate(q) for b, ti in enumerate(theta)]

    if model in ("antiferromagnet", "altermagnet"):
        params = MagParams.from_config(config.material.magnet, model == "altermagnet", CONSTANTS)
        chi = np.imag(chi_neel(params, q[:, None], theta[None, :], omega))
        records = [
            {"q_tilde": qi, "theta_q": ti, "im_chi_norm": float(chi[a, b]), "response_O": float(table[a, b])}
            for a, b, qi, ti in cells
        ]
        return ("q_tilde", "theta_q", "im_chi_norm", "response_O"), records

    # O / omega_tilde; for the superconductor this is Re sigma_T / sigma_n
    column = "re_sigma_over_sigma_n" if model == "superconductor" else "value"
    records = [{"q_tilde": qi, "theta_q": ti, column: float(table[a, b] / omega)} for a, b, qi, ti in cells]
    return ("q_tilde", "theta_q", column), records


def _tomography_geometries(config: RunConfig) -> List[Tuple[float, float]]:
    tomo = config.tomography
    if tomo.geometries is not None:
        return load_geometries(tomo.geometries)
    z = config.geometry.z
    ratios = np.linspace(tomo.d_over_z_min, tomo.d_over_z_max, tomo.geometry_count)
    return [(float(r) * z, z) for r in ratios]


def cmd_tomography(config: RunConfig) -> Dataset:
    """
    With a measurement file the geometries and q are in the file's units.
    Otherwise Phi_c^2n is synthesized from the configured material as the
    dimensionless channel integral, and q is reported in the material's unit.
    """
    tomo = config.tomography
    geometry = config.geometry
    oi, oj = qubit(geometry.qubit_i), qubit(geometry.qubit_j)
    n = tomo.channel // 2
    geometries = _tomography_geometries(config)

    if tomo.measurements is not None:
        measurements = load_measurements(tomo.measurements, tomo.channel)
        noise_level = tomo.noise_level
    else:
        truncation = max(config.numerics.truncation, abs(n))
        with material(config) as response:
            seq = pulse_sequence(config, evaluation_time(config, response))
            omega_tilde = response.omega_tilde(seq.center_frequency())
            length = response.length_scale
            values = [
                channel_integrals(response, PairGeometry(z, d), oi, oj, omega_tilde, truncation, config.numerics).even_value(n)
                for d, z in geometries
            ]
        geometries = [(d / length, z / length) for d, z in geometries]
        measurements = np.array(values)
        if np.all(measurements.imag == 0):
            measurements = measurements.real
        noise_level = tomo.noise_level
        if tomo.synthetic_noise > 0:
            rng = np.random.default_rng(tomo.seed)
            sigma = tomo.synthetic_noise * float(np.sqrt(np.mean(np.abs(measurements) ** 2)))
            measurements = measurements + rng.normal(0.0, sigma, measurements.shape)
            if noise_level is None:
                noise_level = sigma * math.sqrt(measurements.size)

    if len(measurements) != len(geometries):
        raise ConfigError("number of measurements does not match the number of geometries", key="tomography")
    problem = TomographyProblem.build(
        geometries,
        measurements,
        tomo.channel,
        bins=tomo.bins,
        oi=oi,
        oj=oj,
        regularization=tomo.regularization,
        noise_level=noise_level,
    )
    result = reconstruct(problem)
    logger.info(
        "reconstruction: lambda=%.3e rank=%d residual=%.3e",
        result.regularization,
        result.effective_rank,
        result.residual_norm,
    )
    records = [
        {"q": q, "estimate": float(np.real(x)), "stderr_proxy": s}
        for q, x, s in zip(result.q, result.estimate, result.stderr)
    ]
    return ("q", "estimate", "stderr_proxy"), records


def cmd_timescale(config: RunConfig) -> Dataset:
    model = config.material.model
    z = config.geometry.z
    records: Records = []
    if model == "superconductor":
        sc_cfg = config.material.superconductor
        inputs = SuperconductorTimescaleInputs(sc_cfg.carrier_density, sc_cfg.mobility, sc_cfg.temperature, z, sc_cfg.mass_ratio)
        drude = drude_parameters(inputs)
        records += [
            {"quantity": "t_sc", "value": timescale_sc(inputs), "unit": "s"},
            {"quantity": "k_f", "value": drude["k_f"], "unit": "1/m"},
            {"quantity": "sigma_n", "value": drude["sigma_n"], "unit": "S"},
            {"quantity": "mu", "value": drude["mu"], "unit": "J"},
            {"quantity": "gamma_p", "value": drude["gamma_p"], "unit": "1/s"},
        ]
    elif model in ("antiferromagnet", "altermagnet"):
        mag = config.material.magnet
        gamma = mag.gamma if mag.gamma is not None else CONSTANTS.electron_gyromagnetic_ratio
        inputs = MagnetTimescaleInputs(mag.d0, mag.chi0, gamma, z, mag.temperature)
        records.append({"quantity": "t_am", "value": timescale_am(inputs), "unit": "s"})
        target = config.timescale.target_t_am
        if target is not None:
            records.append({"quantity": "chi0_backsolved", "value": backsolve_chi0(inputs, target), "unit": "SI"})
            records.append({"quantity": "target_t_am", "value": target, "unit": "s"})
    else:
        raise ConfigError("timescale needs a superconductor or magnet material", key="material.model")
    return ("quantity", "value", "unit"), records


COMMANDS: Dict[str, Callable[[RunConfig], Dataset]] = {
    "sweep-beta": cmd_sweep_beta,
    "sweep-alpha": cmd_sweep_alpha,
    "harmonics": cmd_harmonics,
    "response-map": cmd_response_map,
    "tomography": cmd_tomography,
    "timescale": cmd_timescale,
}


COMMAND_HELP = {
    "sweep-beta": "correlated dephasing against the pair-axis angle",
    "sweep-alpha": "single-qubit dephasing against the qubit azimuth",
    "harmonics": "Fourier harmonics of Phi_c and Psi_c against D/z",
    "response-map": "material response on a (q, theta) grid",
    "tomography": "reconstruct a radial channel profile",
    "timescale": "characteristic dephasing times",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m src.main", description="Correlated quantum dephasometry toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, help=COMMAND_HELP[name])
        cmd.add_argument("--config", help="YAML run file")
        cmd.add_argument("--out", help="output path (default: stdout)")
        cmd.add_argument("--format", choices=("csv", "json"))
        cmd.add_argument("--threads", type=int, help="worker processes, 0 = all cores")
        cmd.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        cmd.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = load_run_config(args.config, args.set)
    output = config.output
    if args.out is not None:
        output = dataclasses.replace(output, path=args.out)
    if args.format is not None:
        output = dataclasses.replace(output, format=args.format)
    numerics = config.numerics
    if args.threads is not None:
        if args.threads < 0:
            raise ConfigError("threads must be >= 0", key="--threads")
        numerics = dataclasses.replace(numerics, threads=args.threads)
    return dataclasses.replace(config, output=output, numerics=numerics)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and write its dataset; returns the exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        config = resolve_config(args)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            columns, records = COMMANDS[args.command](config)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except ParameterError as exc:
        logger.error("invalid parameter: %s", exc)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        logger.error("numerical non-convergence: %s", exc)
        return EXIT_NUMERICS
    except ToolkitError as exc:
        logger.error("%s", exc)
        return EXIT_NUMERICS

    for warning in caught:
        logger.warning("%s: %s", warning.category.__name__, warning.message)
    if config.numerics.strict and any(issubclass(w.category, ConvergenceWarning) for w in caught):
        logger.error("convergence warnings raised in strict mode")
        return EXIT_NUMERICS

    meta = {
        "toolkit": f"dephasometry {__version__}",
        "command": args.command,
        "config_hash": config_hash(config),
    }
    write_dataset(records, columns, meta, config.output.path, config.output.format, config.output.precision)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
