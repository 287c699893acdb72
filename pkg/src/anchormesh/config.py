"""Codec configuration: every tunable default in one place, overridable from
flat key=value config files and CLI flags."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .octree import DEFAULT_LEAF_CAPACITY, DEFAULT_MAX_DEPTH
from .quantize import DEFAULT_HBAR


@dataclass(frozen=True)
class CodecConfig:
    level: int = 2                     # subdivision levels
    alpha: float = 8.0                 # quantization scale
    delta: float = 0.0                 # quantization offset
    hbar: float = DEFAULT_HBAR         # valence normalizer
    motion_estimation: bool = True     # neighbor-mean motion compensation
    qem_refine: bool = True            # fine anchor stage
    adaptive_quant: bool = True        # valence-weighted quantization
    collapses_per_anchor: int = 1
    leaf_capacity: int = DEFAULT_LEAF_CAPACITY
    max_depth: int = DEFAULT_MAX_DEPTH
    base_fraction: float = 0.25        # decimation ratio for sweep base meshes
    alpha_ladder: tuple = (1.0, 2.0, 4.0, 8.0, 16.0)
    threads: int = 1

    def override(self, **kwargs) -> "CodecConfig":
        return replace(self, **kwargs)


def _parse_value(name: str, kind, raw: str):
    raw = raw.strip()
    if kind is bool:
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"bad boolean for {name}: {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind is tuple:
        return tuple(float(part) for part in raw.split(",") if part.strip())
    raise ValueError(f"unsupported config field type for {name}")


def load_config(path, base: CodecConfig = None) -> CodecConfig:
    """Parse a flat key=value file ('#' comments allowed) over ``base``."""
    config = base if base is not None else CodecConfig()
    kinds = {f.name: type(getattr(config, f.name)) for f in fields(config)}
    overrides = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected key=value, got {raw.strip()!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if key not in kinds:
                raise ValueError(f"{path}:{line_no}: unknown config key {key!r}")
            overrides[key] = _parse_value(key, kinds[key], value)
    return config.override(**overrides)
