"""Engine configuration: defaults, key-value config files and overrides.

The file format is plain ``key = value`` lines with ``#`` comments; keys are
dotted paths into the config dataclasses (``weights.w_iou``,
``edgeopt.lambda_h``, ``stride``, ...).  All defaults follow the published
constants where the method defines them.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace

from funscene.associate import AssociationWeights, GateParams
from funscene.edgeopt import EdgeOptParams
from funscene.hierarchy import HierarchyParams

ABLATION_MODES = ("full", "assoc-baseline", "no-go-count", "hierarchy-2d-off")


@dataclass(frozen=True)
class FusionParams:
    """Map maintenance knobs: EMA factor, voxel cap, patch sampling."""

    ema_alpha: float = 0.3
    voxel_size: float = 0.01
    patch_side: int = 8
    min_object_points: int = 10
    pending_ttl: int = 5

    def __post_init__(self):
        if not (0.0 < self.ema_alpha <= 1.0):
            raise ValueError("ema_alpha must lie in (0, 1]")
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be positive")


@dataclass(frozen=True)
class EngineConfig:
    weights: AssociationWeights = field(default_factory=AssociationWeights)
    gates: GateParams = field(default_factory=GateParams)
    edgeopt: EdgeOptParams = field(default_factory=EdgeOptParams)
    hierarchy: HierarchyParams = field(default_factory=HierarchyParams)
    fusion: FusionParams = field(default_factory=FusionParams)
    stride: int = 1
    ablation: str = "full"

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.ablation not in ABLATION_MODES:
            raise ValueError(
                f"unknown ablation mode {self.ablation!r}; expected one of {ABLATION_MODES}"
            )


class ConfigError(ValueError):
    pass


_SECTIONS = ("weights", "gates", "edgeopt", "hierarchy", "fusion")


def apply_setting(config: EngineConfig, key: str, raw: str) -> EngineConfig:
    key = key.strip()
    parts = key.split(".")
    if len(parts) == 1:
        if not hasattr(config, key) or key in _SECTIONS:
            raise ConfigError(f"unknown config key {key!r}")
        return replace(config, **{key: _coerce(raw, getattr(config, key), key)})
    if len(parts) == 2 and parts[0] in _SECTIONS:
        section = getattr(config, parts[0])
        if not hasattr(section, parts[1]):
            raise ConfigError(f"unknown config key {key!r}")
        current = getattr(section, parts[1])
        new_section = replace(section, **{parts[1]: _coerce(raw, current, key)})
        return replace(config, **{parts[0]: new_section})
    raise ConfigError(f"unknown config key {key!r}")


def _coerce(raw: str, current, key: str):
    raw = raw.strip()
    try:
        if isinstance(current, bool):
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse value {raw!r} for key {key!r}") from exc


def parse_config_text(text: str, base: EngineConfig | None = None) -> EngineConfig:
    config = base or EngineConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        config = apply_setting(config, key, raw)
    return config


def load_config(path: str, overrides: list[str] | None = None) -> EngineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        config = parse_config_text(fh.read())
    return apply_overrides(config, overrides or [])


def apply_overrides(config: EngineConfig, overrides: list[str]) -> EngineConfig:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, raw = item.split("=", 1)
        config = apply_setting(config, key, raw)
    return config


def config_to_text(config: EngineConfig) -> str:
    lines = []
    for section in _SECTIONS:
        value = getattr(config, section)
        for f in dataclasses.fields(value):
            lines.append(f"{section}.{f.name} = {getattr(value, f.name)}")
    lines.append(f"stride = {config.stride}")
    lines.append(f"ablation = {config.ablation}")
    return "\n".join(lines) + "\n"
