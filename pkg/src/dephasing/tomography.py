"""
Momentum-space tomography of one angular channel.

Measured harmonics Phi_c^2n over L geometries (D_l, z_l) are linear in the
radial profile O^2n(q) discretized on M log-spaced bins:

    Phi_l = sum_m M_lm X_m,   M_lm = A q_m exp(-2 q_m z_l) K_2n(q_m D_l) dq_m

The system is solved by ridge regression through the SVD of M, with the
regularization picked by the discrepancy principle or, when the noise level
is unknown, by generalized cross-validation.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from ..utils.errors import IllPosedError, ParameterError, RankWarning
from .kernel import QubitOrientation, orientation_constants, weight_even

logger = logging.getLogger(__name__)

RANK_THRESHOLD = 1e-10
Q_MIN_FACTOR = 0.05
Q_MAX_FACTOR = 40.0
GCV_SCAN_POINTS = 200
# Discrepancy target tau * noise, tau > 1
DISCREPANCY_SAFETY = 1.1


def csvd(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD M = U diag(s) V^H, returning V (not V^H) as columns."""
    rows, cols = matrix.shape
    if rows >= cols:
        u, s, vh = np.linalg.svd(matrix, full_matrices=False)
        v = np.conjugate(vh.T)
    else:
        v, s, uh = np.linalg.svd(np.conjugate(matrix.T), full_matrices=False)
        u = np.conjugate(uh.T)
    return u, s, v


def log_q_grid(geometries: Sequence[Tuple[float, float]], bins: int) -> Tuple[np.ndarray, np.ndarray]:
    """Bin centers and widths on [0.05 / z_mean, 40 / z_mean], log-spaced."""
    if bins < 1:
        raise ParameterError("need at least one q bin")
    z_mean = float(np.mean([z for _, z in geometries]))
    edges = np.geomspace(Q_MIN_FACTOR / z_mean, Q_MAX_FACTOR / z_mean, bins + 1)
    return np.sqrt(edges[:-1] * edges[1:]), np.diff(edges)


def _validate_geometries(geometries: Sequence[Tuple[float, float]]) -> None:
    if len(geometries) < 1:
        raise ParameterError("need at least one geometry")
    for d, z in geometries:
        if not z > 0 or d < 0:
            raise ParameterError(f"invalid geometry D={d}, z={z}")


def forward_matrix(
    geometries: Sequence[Tuple[float, float]],
    q_grid: np.ndarray,
    q_widths: np.ndarray,
    channel: int,
    oi: QubitOrientation = QubitOrientation(),
    oj: QubitOrientation = QubitOrientation(),
    prefactor: float = 1.0,
) -> np.ndarray:
    """Rows are geometries, columns q bins; real for perpendicular qubits."""
    _validate_geometries(geometries)
    if channel % 2:
        raise ParameterError("channel must be an even index 2n")
    q_grid = np.asarray(q_grid, dtype=float)
    q_widths = np.asarray(q_widths, dtype=float)
    if q_grid.ndim != 1 or q_grid.size < 1 or q_grid.shape != q_widths.shape:
        raise ParameterError("q grid and widths must be matching non-empty vectors")
    if np.any(np.diff(q_grid) <= 0) or np.any(q_widths <= 0):
        raise ParameterError("q grid must be strictly increasing with positive widths")

    constants = orientation_constants(oi, oj)
    n = channel // 2
    rows = [
        prefactor * q_grid * np.exp(-2.0 * q_grid * z) * weight_even(constants, n, q_grid * d) * q_widths
        for d, z in geometries
    ]
    matrix = np.array(rows)
    if np.all(np.abs(matrix.imag) == 0):
        matrix = matrix.real
    if not np.all(np.isfinite(matrix)):
        raise ParameterError("forward matrix has non-finite entries")

    s = np.linalg.svd(matrix, compute_uv=False)
    rank = int(np.sum(s > RANK_THRESHOLD * s[0])) if s.size and s[0] > 0 else 0
    if rank < min(matrix.shape):
        warnings.warn(
            f"forward matrix has numerical rank {rank} < {min(matrix.shape)}",
            RankWarning,
            stacklevel=2,
        )
    return matrix


@dataclass(frozen=True)
class TomographyProblem:
    channel: int
    geometries: Tuple[Tuple[float, float], ...]
    measurements: np.ndarray
    q_grid: np.ndarray
    q_widths: np.ndarray
    matrix: np.ndarray
    # None -> pick_regularization
    regularization: Optional[float] = None
    # Norm of the measurement noise vector; None -> GCV
    noise_level: Optional[float] = None
    prefactor: float = 1.0

    def __post_init__(self) -> None:
        measurements = np.atleast_1d(np.asarray(self.measurements))
        if measurements.shape != (len(self.geometries),):
            raise ParameterError("measurement vector length must equal the number of geometries")
        if self.matrix.shape != (len(self.geometries), self.q_grid.size):
            raise ParameterError("forward matrix shape does not match geometries x q bins")
        if self.regularization is not None and self.regularization < 0:
            raise ParameterError("regularization must be >= 0")
        if self.noise_level is not None and self.noise_level < 0:
            raise ParameterError("noise level must be >= 0")
        object.__setattr__(self, "measurements", measurements)

    @classmethod
    def build(
        cls,
        geometries: Sequence[Tuple[float, float]],
        measurements,
        channel: int,
        bins: int = 16,
        oi: QubitOrientation = QubitOrientation(),
        oj: QubitOrientation = QubitOrientation(),
        regularization: Optional[float] = None,
        noise_level: Optional[float] = None,
        prefactor: float = 1.0,
    ) -> "TomographyProblem":
        geometries = tuple((float(d), float(z)) for d, z in geometries)
        _validate_geometries(geometries)
        q_grid, q_widths = log_q_grid(geometries, bins)
        matrix = forward_matrix(geometries, q_grid, q_widths, channel, oi, oj, prefactor)
        return cls(channel, geometries, measurements, q_grid, q_widths, matrix, regularization, noise_level, prefactor)

    @property
    def q_limit(self) -> float:
        """Largest accessible momentum, 40 / min(z_l)."""
        return Q_MAX_FACTOR / min(z for _, z in self.geometries)


@dataclass(frozen=True)
class Reconstruction:
    q: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    regularization: float
    residual_norm: float
    solution_norm: float
    effective_rank: int
    singular_values: np.ndarray
    filter_factors: np.ndarray = field(repr=False)


def _filter_factors(s: np.ndarray, lam: float) -> np.ndarray:
    if lam == 0.0:
        return (s > 0).astype(float)
    return s**2 / (s**2 + lam)


def _residual_norm(beta: np.ndarray, s: np.ndarray, lam: float, outside: float) -> float:
    f = _filter_factors(s, lam)
    return math.sqrt(float(np.sum(np.abs((1.0 - f) * beta) ** 2)) + outside**2)


def _gcv(beta: np.ndarray, s: np.ndarray, lam: float, outside: float, rows: int) -> float:
    f = _filter_factors(s, lam)
    dof = rows - float(np.sum(f))
    if dof <= 0:
        return math.inf
    return _residual_norm(beta, s, lam, outside) ** 2 / dof**2


def pick_regularization(problem: TomographyProblem, noise_level: Optional[float] = None) -> float:
    """
    Discrepancy principle: the smallest lambda whose residual norm reaches
    DISCREPANCY_SAFETY times the noise level. Without a noise level, minimize
    generalized cross-validation.
    """
    noise_level = problem.noise_level if noise_level is None else noise_level
    u, s, _ = csvd(problem.matrix)
    b = problem.measurements
    beta = np.conjugate(u.T) @ b
    outside = float(np.linalg.norm(b - u @ beta))
    if s.size == 0 or s[0] == 0:
        return 0.0
    lo, hi = math.log10(s[0] ** 2) - 24.0, math.log10(s[0] ** 2) + 8.0

    if noise_level is None:
        grid = np.linspace(lo, hi, GCV_SCAN_POINTS)
        scores = [_gcv(beta, s, 10.0**x, outside, problem.matrix.shape[0]) for x in grid]
        best = int(np.argmin(scores))
        left, right = grid[max(best - 1, 0)], grid[min(best + 1, grid.size - 1)]
        if right > left:
            x = optimize.fminbound(lambda x: _gcv(beta, s, 10.0**x, outside, problem.matrix.shape[0]), left, right, xtol=1e-6)
        else:
            x = grid[best]
        lam = 10.0**float(x)
        logger.debug("GCV regularization %.3e", lam)
        return lam

    if noise_level < 0:
        raise ParameterError("noise level must be >= 0")
    target = DISCREPANCY_SAFETY * noise_level
    if target <= _residual_norm(beta, s, 0.0, outside):
        return 0.0
    if target <= _residual_norm(beta, s, 10.0**lo, outside):
        return 10.0**lo
    if target >= _residual_norm(beta, s, 10.0**hi, outside):
        return 10.0**hi
    x = optimize.brentq(lambda x: _residual_norm(beta, s, 10.0**x, outside) - target, lo, hi, xtol=1e-10)
    lam = 10.0**x
    logger.debug("discrepancy regularization %.3e for noise %.3e", lam, noise_level)
    return lam


def ridge_solve(matrix: np.ndarray, data: np.ndarray, lam: float):
    """argmin |M x - b|^2 + lam |x|^2 via the SVD; returns (x, u, s, v, f)."""
    if lam < 0:
        raise ParameterError("regularization must be >= 0")
    u, s, v = csvd(matrix)
    rank = int(np.sum(s > RANK_THRESHOLD * s[0])) if s.size and s[0] > 0 else 0
    if lam == 0.0 and rank < min(matrix.shape):
        raise IllPosedError(f"rank-deficient system (rank {rank} < {min(matrix.shape)}) needs regularization")
    f = _filter_factors(s, lam)
    beta = np.conjugate(u.T) @ data
    with np.errstate(divide="ignore", invalid="ignore"):
        coefficients = np.where(s > 0, f * beta / np.where(s > 0, s, 1.0), 0.0)
    return v @ coefficients, u, s, v, f


def reconstruct(problem: TomographyProblem, noise_level: Optional[float] = None) -> Reconstruction:
    """Ridge estimate of O^2n(q_m) with its diagnostics; bins beyond 40 / min z are reported as zero."""
    noise_level = problem.noise_level if noise_level is None else noise_level
    lam = problem.regularization
    if lam is None:
        lam = pick_regularization(problem, noise_level)

    mask = problem.q_grid <= problem.q_limit
    matrix = problem.matrix[:, mask]
    x, u, s, v, f = ridge_solve(matrix, problem.measurements, lam)

    residual = problem.measurements - matrix @ x
    sigma = (noise_level or 0.0) / math.sqrt(len(problem.geometries))
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(s > 0, f / np.where(s > 0, s, 1.0), 0.0)
    stderr_masked = sigma * np.sqrt(np.sum((gain[None, :] * np.abs(v)) ** 2, axis=1))

    estimate = np.zeros(problem.q_grid.size, dtype=x.dtype)
    stderr = np.zeros(problem.q_grid.size)
    estimate[mask] = x
    stderr[mask] = stderr_masked
    rank = int(np.sum(s > RANK_THRESHOLD * s[0])) if s.size and s[0] > 0 else 0
    return Reconstruction(
        q=problem.q_grid.copy(),
        estimate=estimate,
        stderr=stderr,
        regularization=float(lam),
        residual_norm=float(np.linalg.norm(residual)),
        solution_norm=float(np.linalg.norm(x)),
        effective_rank=rank,
        singular_values=s,
        filter_factors=f,
    )


def synthesize_measurements(
    matrix: np.ndarray,
    profile: Callable[[np.ndarray], np.ndarray],
    q_grid: np.ndarray,
    relative_noise: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, float]:
    """
    Forward-model data M X for X = profile(q_grid), plus optional Gaussian noise
    of standard deviation relative_noise * rms(M X). Returns (data, noise norm).
    """
    clean = matrix @ np.asarray(profile(np.asarray(q_grid, dtype=float)))
    if relative_noise <= 0:
        return clean, 0.0
    rng = rng if rng is not None else np.random.default_rng(0)
    sigma = relative_noise * float(np.sqrt(np.mean(np.abs(clean) ** 2)))
    noise = rng.normal(0.0, sigma, clean.shape)
    return clean + noise, sigma * math.sqrt(clean.size)
