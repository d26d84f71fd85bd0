"""
Configuration values for the dephasometry toolkit.

All grid sizes, truncations and physical defaults live here so that:
- Experiments can tweak numerics without touching the physics modules.
- A run file (YAML) maps one-to-one onto the dataclass tree below.
- Every dataset can embed a hash of the fully resolved configuration.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple

import yaml

from .errors import ConfigError


@dataclass(frozen=True)
class NumericsConfig:
    # Gauss-Legendre q grid on [0, q_max_factor / z]
    q_nodes: int = 256
    q_max_factor: float = 40.0

    # Equispaced theta_q nodes for the angular Fourier analysis
    theta_nodes: int = 128

    # Harmonic truncation N (covers 2n = +-16)
    truncation: int = 8

    # Node budget of the adaptive frequency quadrature; omega_c None -> 100*max(pi n/t, 1/t)
    frequency_nodes: int = 65536
    omega_cutoff: Optional[float] = None
    quasi_static: bool = True

    # Superconductor polar k grid and thermal window
    radial_nodes: int = 64
    angular_nodes: int = 128
    omega1_nodes: int = 32
    window: Optional[float] = None
    conductivity_method: str = "overlap"

    # 0 -> all available cores
    threads: int = 0

    # "si" reports Phi(t); "reference" reports Phi(t) * t_ref / t
    normalization: str = "si"

    # Escalate convergence warnings to exit code 3
    strict: bool = False

    def __post_init__(self) -> None:
        if self.q_nodes < 8 or self.theta_nodes < 8:
            raise ConfigError("grid counts must be >= 8", key="numerics")
        if self.radial_nodes < 8 or self.angular_nodes < 8 or self.omega1_nodes < 8:
            raise ConfigError("conductivity grid counts must be >= 8", key="numerics")
        if self.truncation < 1:
            raise ConfigError("truncation must be >= 1", key="numerics.truncation")
        if self.frequency_nodes < 16:
            raise ConfigError("frequency node budget must be >= 16", key="numerics.frequency_nodes")
        if self.omega_cutoff is not None and self.omega_cutoff <= 0:
            raise ConfigError("omega_cutoff must be positive", key="numerics.omega_cutoff")
        if self.window is not None and not 0 < self.window <= 0.5:
            raise ConfigError("window must lie in (0, 0.5]", key="numerics.window")
        if self.conductivity_method not in ("overlap", "quadrature"):
            raise ConfigError("conductivity_method must be overlap or quadrature", key="numerics.conductivity_method")
        if self.normalization not in ("si", "reference"):
            raise ConfigError("normalization must be si or reference", key="numerics.normalization")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0", key="numerics.threads")


@dataclass(frozen=True)
class OutputConfig:
    # None writes the dataset to stdout
    path: Optional[str] = None
    format: str = "csv"
    precision: int = 9

    def __post_init__(self) -> None:
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json", key="output.format")
        if not 1 <= self.precision <= 17:
            raise ConfigError("precision must be within 1..17", key="output.precision")


@dataclass(frozen=True)
class CacheConfig:
    # SQLite file for conductivity maps; None keeps the cache in memory
    path: Optional[str] = "output/conductivity_cache.sqlite"


@dataclass(frozen=True)
class GridConfig:
    """Inclusive equispaced grid."""

    start: float = 0.0
    stop: float = math.pi
    count: int = 33

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ConfigError("grid must contain at least one point")

    def values(self) -> Tuple[float, ...]:
        if self.count == 1:
            return (float(self.start),)
        step = (self.stop - self.start) / (self.count - 1)
        return tuple(self.start + i * step for i in range(self.count))


@dataclass(frozen=True)
class OrientationConfig:
    # Polar angle from the surface normal; azimuth relative to the pair axis
    phi: float = 0.0
    alpha: float = 0.0


@dataclass(frozen=True)
class GeometryConfig:
    z: float = 10e-9
    d: Optional[float] = None
    # At most one of d (m) and d_over_z; neither -> D = 8z
    d_over_z: Optional[float] = None
    beta: GridConfig = field(default_factory=GridConfig)
    alpha: GridConfig = field(default_factory=GridConfig)
    qubit_i: OrientationConfig = field(default_factory=OrientationConfig)
    qubit_j: OrientationConfig = field(default_factory=OrientationConfig)

    # Polar angle of the single qubit swept by sweep-alpha (in-plane by default)
    single_phi: float = math.pi / 2

    # D/z values tabulated by the harmonics command
    d_over_z_list: Tuple[float, ...] = (2.0, 4.0, 8.0, 12.0)

    def __post_init__(self) -> None:
        if self.z <= 0:
            raise ConfigError("z must be positive", key="geometry.z")
        if self.d is not None and self.d_over_z is not None:
            raise ConfigError("set only one of d and d_over_z", key="geometry")
        if self.separation < 0:
            raise ConfigError("separation must be >= 0", key="geometry")

    @property
    def separation(self) -> float:
        if self.d is not None:
            return self.d
        return (8.0 if self.d_over_z is None else self.d_over_z) * self.z


@dataclass(frozen=True)
class SequenceConfig:
    kind: str = "ramsey"
    pulses: int = 1
    omega_dd: Optional[float] = None
    bandwidth: float = 0.1

    # At most one of t (seconds) and t_over_ref (units of t_sc / t_am); neither -> t = t_ref
    t: Optional[float] = None
    t_over_ref: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in ("ramsey", "cpmg", "narrowband"):
            raise ConfigError("kind must be ramsey, cpmg or narrowband", key="sequence.kind")
        if self.t is not None and self.t_over_ref is not None:
            raise ConfigError("set only one of t and t_over_ref", key="sequence")
        if (self.t is not None and self.t <= 0) or (self.t_over_ref is not None and self.t_over_ref <= 0):
            raise ConfigError("evaluation time must be positive", key="sequence")
        if self.pulses < 1:
            raise ConfigError("pulses must be >= 1", key="sequence.pulses")


@dataclass(frozen=True)
class SuperconductorConfig:
    gap: str = "d"
    delta0_over_mu: float = 0.005
    gamma_p_over_mu: float = 5e-5

    # None -> 0.8 * delta0_over_mu / 1.764 (T = 0.8 Tc with the weak-coupling ratio)
    kbt_over_mu: Optional[float] = None

    # SI inputs for dimensional restoration (FeSe-like film)
    temperature: float = 30.0
    carrier_density: float = 1.8e18
    mobility: float = 3.9e-3
    mass_ratio: float = 1.0

    def __post_init__(self) -> None:
        if self.gap not in ("s", "d", "g"):
            raise ConfigError("gap must be s, d or g", key="material.superconductor.gap")
        for name in ("gamma_p_over_mu", "temperature", "carrier_density", "mobility", "mass_ratio"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive", key=f"material.superconductor.{name}")
        if self.delta0_over_mu < 0:
            raise ConfigError("delta0_over_mu must be >= 0", key="material.superconductor.delta0_over_mu")

    @property
    def resolved_kbt_over_mu(self) -> float:
        if self.kbt_over_mu is not None:
            return self.kbt_over_mu
        return 0.8 * self.delta0_over_mu / 1.764


@dataclass(frozen=True)
class MagnetConfig:
    d2_over_d0: float = 0.9

    # Spin diffusion constant (m^2/s) and length (m); Gamma_m = d0 / l_s^2
    d0: float = 8.9e-4
    spin_diffusion_length: float = 3e-6

    # Static susceptibility chi_0 (SI, as in hbar*chi_0*gamma^2)
    chi0: float = 1.0e9
    gamma: Optional[float] = None
    temperature: float = 200.0
    neel_angle: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.d2_over_d0 < 1:
            raise ConfigError("d2_over_d0 must lie in [0, 1)", key="material.magnet.d2_over_d0")
        for name in ("d0", "spin_diffusion_length", "chi0", "temperature"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive", key=f"material.magnet.{name}")


@dataclass(frozen=True)
class TabulatedConfig:
    path: str = ""
    symmetry_order: int = 0
    isotropic: bool = False
    inversion_symmetric: bool = True

    # q_tilde = q * length_scale; None -> qubit height z
    length_scale: Optional[float] = None
    frequency_scale: float = 1.0
    scale: float = 1.0
    temperature: float = 300.0

    def __post_init__(self) -> None:
        if not self.path:
            raise ConfigError("tabulated material needs a path", key="material.tabulated.path")


@dataclass(frozen=True)
class MaterialConfig:
    model: str = "superconductor"
    superconductor: Optional[SuperconductorConfig] = None
    magnet: Optional[MagnetConfig] = None
    tabulated: Optional[TabulatedConfig] = None

    def __post_init__(self) -> None:
        sections = {
            "superconductor": "superconductor",
            "antiferromagnet": "magnet",
            "altermagnet": "magnet",
            "tabulated": "tabulated",
        }
        if self.model not in sections:
            raise ConfigError(f"unknown material model '{self.model}'", key="material.model")
        wanted = sections[self.model]
        for name in ("superconductor", "magnet", "tabulated"):
            if name != wanted and getattr(self, name) is not None:
                raise ConfigError(f"section '{name}' does not belong to model '{self.model}'", key=f"material.{name}")
        if getattr(self, wanted) is None:
            if wanted == "tabulated":
                raise ConfigError("tabulated material needs a section", key="material.tabulated")
            default = SuperconductorConfig() if wanted == "superconductor" else MagnetConfig()
            object.__setattr__(self, wanted, default)


@dataclass(frozen=True)
class TomographyConfig:
    # Channel index 2n
    channel: int = 4
    geometries: Optional[str] = None
    measurements: Optional[str] = None
    bins: int = 16
    geometry_count: int = 24
    d_over_z_min: float = 1.0
    d_over_z_max: float = 12.0

    # Norm of the measurement noise; None -> generalized cross-validation
    noise_level: Optional[float] = None
    regularization: Optional[float] = None

    # Relative Gaussian noise added to synthesized measurements
    synthetic_noise: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.channel % 2:
            raise ConfigError("channel must be an even index 2n", key="tomography.channel")
        if self.bins < 1 or self.geometry_count < 1:
            raise ConfigError("bins and geometry_count must be >= 1", key="tomography")


@dataclass(frozen=True)
class TimescaleConfig:
    # chi_0 is back-solved so that t_am equals this time (s)
    target_t_am: Optional[float] = 39e-6


@dataclass(frozen=True)
class ResponseMapConfig:
    # q_tilde in the material's own length unit (1/k_F, l_s or the tabulated unit)
    q: GridConfig = field(default_factory=lambda: GridConfig(0.002, 0.2, 25))
    theta: GridConfig = field(default_factory=lambda: GridConfig(0.0, math.pi / 2, 25))
    # None -> the material's probe frequency
    omega_tilde: Optional[float] = None

    def __post_init__(self) -> None:
        if self.omega_tilde is not None and self.omega_tilde <= 0:
            raise ConfigError("omega_tilde must be positive", key="response_map.omega_tilde")
        if self.q.start < 0:
            raise ConfigError("q grid must start at >= 0", key="response_map.q")


@dataclass(frozen=True)
class RunConfig:
    material: MaterialConfig = field(default_factory=MaterialConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    sequence: SequenceConfig = field(default_factory=SequenceConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    cache: CacheConfig = field(default_factory=CacheConfig)
    tomography: TomographyConfig = field(default_factory=TomographyConfig)
    timescale: TimescaleConfig = field(default_factory=TimescaleConfig)
    response_map: ResponseMapConfig = field(default_factory=ResponseMapConfig)


NUMERICS_CONFIG = NumericsConfig()
OUTPUT_CONFIG = OutputConfig()
CACHE_CONFIG = CacheConfig()


def _key_lines(text: str) -> Dict[str, int]:
    """Map dotted key paths of a YAML document to 1-based line numbers."""
    lines: Dict[str, int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines

    def walk(node: Any, prefix: str) -> None:
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
                lines[path] = key_node.start_mark.line + 1
                walk(value_node, path)

    if root is not None:
        walk(root, "")
    return lines


def _unwrap_optional(tp: Any) -> Any:
    if typing.get_origin(tp) is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1:
            return args[0]
    return tp


def _coerce(value: Any, tp: Any, path: str, lines: Mapping[str, int]) -> Any:
    line = lines.get(path)
    if value is None:
        if typing.get_origin(tp) is typing.Union and type(None) in typing.get_args(tp):
            return None
        raise ConfigError("value may not be null", key=path, line=line)
    tp = _unwrap_optional(tp)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, Mapping):
            raise ConfigError("expected a mapping", key=path, line=line)
        return _build(tp, value, path, lines)
    if typing.get_origin(tp) is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError("expected a list", key=path, line=line)
        return tuple(_coerce(v, typing.get_args(tp)[0], path, lines) for v in value)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError("expected true or false", key=path, line=line)
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("expected an integer", key=path, line=line)
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("expected a number", key=path, line=line)
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError("expected a string", key=path, line=line)
        return value
    return value


def _build(cls: type, mapping: Mapping[str, Any], prefix: str, lines: Mapping[str, int]) -> Any:
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in mapping.items():
        path = f"{prefix}.{key}" if prefix else str(key)
        if key not in names:
            raise ConfigError("unknown key", key=path, line=lines.get(path))
        kwargs[key] = _coerce(value, hints[key], path, lines)
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        if exc.line is not None:
            raise
        key = exc.key or prefix or None
        raise ConfigError(exc.message, key=key, line=lines.get(key) if key else None) from None


def _apply_override(raw: Dict[str, Any], assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"override '{assignment}' is not of the form key=value")
    dotted, text = assignment.split("=", 1)
    parts = [p for p in dotted.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"override '{assignment}' has an empty key")
    try:
        value = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value: {exc}", key=dotted) from None
    node = raw
    for part in parts[:-1]:
        child = node.get(part)
        if child is None:
            child = {}
            node[part] = child
        if not isinstance(child, dict):
            raise ConfigError("cannot override inside a scalar", key=dotted)
        node = child
    node[parts[-1]] = value


def build_run_config(raw: Mapping[str, Any] | None = None, overrides: Iterable[str] = (), text: str = "") -> RunConfig:
    """Validate a raw mapping (plus key=value overrides) into a RunConfig."""
    data: Dict[str, Any] = json.loads(json.dumps(raw or {}))
    for assignment in overrides:
        _apply_override(data, assignment)
    return _build(RunConfig, data, "", _key_lines(text) if text else {})


def load_run_config(path: str | Path | None, overrides: Iterable[str] = ()) -> RunConfig:
    """
    Read a YAML run file and apply --set overrides.

    Unknown keys are rejected with the dotted key and the file line.
    """
    if path is None:
        return build_run_config({}, overrides)
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found at {path}")
    text = path.read_text(encoding="utf-8")
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {exc}", line=mark.line + 1 if mark else None) from None
    if not isinstance(raw, dict):
        raise ConfigError("top level of the config must be a mapping")
    return build_run_config(raw, overrides, text)


def config_hash(config: RunConfig) -> str:
    payload = json.dumps(dataclasses.asdict(config), sort_keys=True, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
