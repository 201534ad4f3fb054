"""Scenario configuration: schema, YAML loading and dotted overrides."""
from __future__ import annotations

import copy
import re
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from ..material import MaterialError, MaterialParams


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


GEOMETRY_KINDS = ("bar", "rectangle", "i_shape", "dogbone", "file")
LOADING_TYPES = ("step_force", "force_ramp", "displacement_ramp", "none")
FORCE_MEASURES = ("nominal", "pk2", "traction", "force")


@dataclass
class GeometryConfig:
    """Mesh source.

    ``kind`` picks a generator; ``options`` are passed to it as keyword
    arguments (for ``file``: ``path``).  ``thickness`` is the out-of-plane
    thickness in 2D and the cross-section area in 1D.
    """

    kind: str = "bar"
    thickness: float = 1.0
    options: dict = field(default_factory=dict)


@dataclass
class TimeConfig:
    dt: float = 1e-4
    t_end: float = 0.1
    beta_tilde: float = 0.25


@dataclass
class LoadingConfig:
    """One loading program.

    ``value`` is the step force, the ramp rate (force per second) or the
    displacement rate (m/s).  Ramps reverse at ``turnaround_time`` or once
    the probe strain reaches ``turnaround_strain``.
    """

    type: str = "step_force"
    value: float = 0.0
    load_set: str = "right"
    direction: int = 0
    measure: str = "nominal"
    fixed: list = field(default_factory=lambda: ["left:x"])
    turnaround_time: float | None = None
    turnaround_strain: float | None = None
    stop_on_unload: bool = False


@dataclass
class SolverConfig:
    motion_tol: float = 1e-8
    motion_max_iter: int = 25
    damage_tol: float = 1e-3
    damage_max_iter: int = 25
    max_halvings: int = 5
    quasi_static: bool = False
    damage: bool = False
    clamp: bool = True
    stress_mode: str = "partial"
    diagnostics: bool = False


@dataclass
class OutputConfig:
    """Probe location and file outputs.

    ``probe`` is a point in the reference configuration; when omitted the
    mesh's ``probe`` node set is used, and for bars the last quadrature
    point of the last element.
    """

    probe: list | None = None
    cadence: int = 1
    vtk: bool = False
    directory: str | None = None


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    material: dict = field(default_factory=dict)
    time: TimeConfig = field(default_factory=TimeConfig)
    loading: LoadingConfig = field(default_factory=LoadingConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    initial_damage: float = 0.0

    def material_params(self) -> MaterialParams:
        try:
            return MaterialParams(**self.material)
        except TypeError as exc:
            raise ConfigError(f"material: {exc}") from exc
        except MaterialError as exc:
            raise ConfigError(f"material: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {"geometry": GeometryConfig, "time": TimeConfig, "loading": LoadingConfig,
             "solver": SolverConfig, "output": OutputConfig}


def _build(cls, data: Any, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    top = {f.name for f in fields(ScenarioConfig)}
    unknown = set(data) - top
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    kwargs = {k: _build(cls, data.get(k), k) for k, cls in _SECTIONS.items()}
    material = data.get("material") or {}
    if not isinstance(material, dict):
        raise ConfigError("material must be a mapping")
    cfg = ScenarioConfig(name=str(data.get("name", "scenario")), material=dict(material),
                         initial_damage=float(data.get("initial_damage", 0.0)), **kwargs)
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig) -> None:
    t, ld, g = cfg.time, cfg.loading, cfg.geometry
    if not t.dt > 0:
        raise ConfigError("time.dt must be positive")
    if not t.t_end >= t.dt:
        raise ConfigError("time.t_end must be at least one time step")
    if t.beta_tilde <= 0:
        raise ConfigError("time.beta_tilde must be positive")
    if g.kind not in GEOMETRY_KINDS:
        raise ConfigError(f"geometry.kind must be one of {GEOMETRY_KINDS}")
    if g.thickness <= 0:
        raise ConfigError("geometry.thickness must be positive")
    if ld.type not in LOADING_TYPES:
        raise ConfigError(f"loading.type must be one of {LOADING_TYPES}")
    if ld.measure not in FORCE_MEASURES:
        raise ConfigError(f"loading.measure must be one of {FORCE_MEASURES}")
    if ld.turnaround_time is not None and ld.turnaround_strain is not None:
        raise ConfigError("give at most one of turnaround_time and turnaround_strain")
    if ld.type == "step_force" and (ld.turnaround_time or ld.turnaround_strain):
        raise ConfigError("a step force has no turnaround")
    if cfg.solver.stress_mode not in ("partial", "complete"):
        raise ConfigError("solver.stress_mode must be partial or complete")
    if cfg.output.cadence < 1:
        raise ConfigError("output.cadence must be at least 1")
    if not 0.0 <= cfg.initial_damage <= 1.0:
        raise ConfigError("initial_damage must lie in [0, 1]")
    for spec in ld.fixed:
        if not isinstance(spec, str) or ":" not in spec:
            raise ConfigError(f"fixed entries look like 'set:x', got {spec!r}")
    cfg.material_params()


# ---------------------------------------------------------------------------
# Files, presets and overrides
# ---------------------------------------------------------------------------

class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats such as ``1e5`` and ``2.5e-3``."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^[-+]?(?:[0-9][0-9_]*(?:\.[0-9_]*)?|\.[0-9_]+)(?:[eE][-+]?[0-9]+)?$
                |^[-+]?\.(?:inf|Inf|INF)$|^\.(?:nan|NaN|NAN)$""", re.X),
    list("-+0123456789."))


def _safe_load(text: str):
    return yaml.load(text, Loader=_Loader)


def _parse_value(text: str):
    try:
        return _safe_load(text)
    except yaml.YAMLError:
        return text


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``key.sub=value`` strings to a nested dict (values parsed as YAML)."""
    out = copy.deepcopy(data)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = out
        for p in parts[:-1]:
            nxt = node.setdefault(p, {})
            if not isinstance(nxt, dict):
                raise ConfigError(f"cannot override inside non-mapping key {p!r}")
            node = nxt
        node[parts[-1]] = _parse_value(text.strip())
    return out


def read_config_dict(path) -> dict:
    try:
        data = _safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} does not hold a mapping")
    return data


def load_config(path, overrides=()) -> ScenarioConfig:
    return config_from_dict(apply_overrides(read_config_dict(path), overrides))


def preset_names() -> list[str]:
    root = resources.files("viscofrac.presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def preset_dict(name: str) -> dict:
    res = resources.files("viscofrac.presets").joinpath(f"{name}.yaml")
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return _safe_load(res.read_text())


def load_preset(name: str, overrides=()) -> ScenarioConfig:
    return config_from_dict(apply_overrides(preset_dict(name), overrides))
