"""Run configuration: typed sections, strict parsing, canonical hashing."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class StripConfig:
    d: float = 2.0
    alpha: float | None = 5.0
    segments: tuple | None = None  # ((a, b, alpha), ...) overrides ``alpha``

    def validate(self):
        if not self.d > 0:
            raise ConfigError("strip.d must be positive")
        if self.segments is None and self.alpha is None:
            raise ConfigError("strip needs alpha or segments")


@dataclass(frozen=True)
class TrapConfig:
    kind: str = "disk"
    beta: float = 4.0
    radius: float = 1.0
    width: float = 1.0
    height: float = 1.0
    curve: str = "circle"  # circle | segment | polyline
    points: tuple | None = None  # polyline vertices or segment endpoints, relative coordinates
    order: int = 12
    nodes_per_panel: int = 8

    def validate(self):
        if self.kind not in ("disk", "rectangle", "curve"):
            raise ConfigError("trap.kind must be disk, rectangle or curve")
        if self.curve not in ("circle", "segment", "polyline"):
            raise ConfigError("trap.curve must be circle, segment or polyline")
        if not self.beta > 0:
            raise ConfigError("trap.beta must be positive")
        if self.order < 1:
            raise ConfigError("trap.order must be >= 1")


@dataclass(frozen=True)
class PlacementConfig:
    rho: float = 2.0
    side: str = "above"
    x1: float = 0.0

    def validate(self):
        if not self.rho > 0:
            raise ConfigError("placement.rho must be positive")
        if self.side not in ("above", "below"):
            raise ConfigError("placement.side must be above or below")


@dataclass(frozen=True)
class NumericsConfig:
    mode_tol: float = 1e-12
    trap_tol: float = 1e-12
    newton_tol: float = 1e-12
    s_radius: float | None = None
    expansion_points: int = 24
    multistart: int = 5
    max_iter: int = 50

    def validate(self):
        for name in ("mode_tol", "trap_tol", "newton_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"numerics.{name} must be positive")
        if self.s_radius is not None and not self.s_radius > 0:
            raise ConfigError("numerics.s_radius must be positive")


@dataclass(frozen=True)
class SweepConfig:
    rho_min: float = 1.5
    rho_max: float = 3.0
    points: int = 6
    spacing: str = "geometric"

    def validate(self):
        if not (0 < self.rho_min < self.rho_max):
            raise ConfigError("sweep needs 0 < rho_min < rho_max")
        if self.points < 2:
            raise ConfigError("sweep.points must be >= 2")
        if self.spacing not in ("geometric", "linear"):
            raise ConfigError("sweep.spacing must be geometric or linear")

    def grid(self):
        if self.spacing == "geometric":
            return np.geomspace(self.rho_min, self.rho_max, self.points)
        return np.linspace(self.rho_min, self.rho_max, self.points)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results"
    formats: tuple = ("csv", "json")

    def validate(self):
        bad = set(self.formats) - {"csv", "json"}
        if bad:
            raise ConfigError(f"unknown output formats {sorted(bad)}")


SECTIONS = {
    "strip": StripConfig,
    "trap": TrapConfig,
    "placement": PlacementConfig,
    "numerics": NumericsConfig,
    "sweep": SweepConfig,
    "output": OutputConfig,
}


def _tupleize(v):
    if isinstance(v, list):
        return tuple(_tupleize(x) for x in v)
    return v


def _coerce(v, kind):
    # YAML reads forms such as ``1e-12`` as strings
    if isinstance(v, str) and kind.startswith(("float", "int")):
        return float(v) if kind.startswith("float") else int(v)
    return v


def _listify(v):
    if isinstance(v, tuple):
        return [_listify(x) for x in v]
    return v


@dataclass(frozen=True)
class RunConfig:
    strip: StripConfig = field(default_factory=StripConfig)
    trap: TrapConfig = field(default_factory=TrapConfig)
    placement: PlacementConfig = field(default_factory=PlacementConfig)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping")
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown configuration sections: {sorted(unknown)}")
        parts = {}
        for name, typ in SECTIONS.items():
            raw = data.get(name) or {}
            if not isinstance(raw, dict):
                raise ConfigError(f"section {name} must be a mapping")
            allowed = {f.name for f in dataclasses.fields(typ)}
            extra = set(raw) - allowed
            if extra:
                raise ConfigError(f"unknown keys in {name}: {sorted(extra)}")
            kinds = {f.name: str(f.type) for f in dataclasses.fields(typ)}
            try:
                section = typ(**{k: _coerce(_tupleize(v), kinds[k]) for k, v in raw.items()})
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc)) from exc
            section.validate()
            parts[name] = section
        return cls(**parts)

    def to_dict(self):
        return {name: {k: _listify(v) for k, v in dataclasses.asdict(getattr(self, name)).items()}
                for name in SECTIONS}

    def physics_hash(self):
        """Hash of everything except output settings (keys sweep rows)."""
        d = self.to_dict()
        d.pop("output")
        d.pop("sweep")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if path.suffix in (".yaml", ".yml"):
        import yaml

        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return RunConfig.from_dict(data or {})


def dump_config(config, path):
    path = Path(path)
    data = config.to_dict()
    if path.suffix in (".yaml", ".yml"):
        import yaml

        path.write_text(yaml.safe_dump(data, sort_keys=True))
    else:
        path.write_text(json.dumps(data, indent=2, sort_keys=True))
