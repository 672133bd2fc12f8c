"""INI configuration shared by the CLI commands.

Sections and keys (all optional; missing values fall back to defaults):

    [encoder]
    n = 8                  feature dimensionality
    rho_m = 4.0            distance-decay range in meters
    seed = 0               embedding seed
    projection = orthonormal | identity
    blocked = building,water   area classes contributing to the prior

    [noise]
    sigma_n = 0.0          rendering noise, in feature-std multiples
    dropout = 0.0          rendering cell dropout probability

    [bev]
    l = 64                 lateral cells
    d = 64                 depth cells
    delta = 0.5            cell size in meters
    f = 256.0              focal length in pixels (column lifting)
    sigma_min = 2.0        scale-bin range
    sigma_max = 512.0
    s = 32                 scale bin count (s + 1 values)

    [world]
    extent_m = 128.0
    block_m = 32.0
    building_density = 0.6
    tree_density = 2.0
    delta = 0.5

    [classes]
    path = <file>          class-table override (default table if absent)
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .mapenc import AnalyticEncoderParams
from .osm.classes import ClassTable, load_class_table
from .synth import WorldSpec


@dataclass
class BevParams:
    l: int = 64
    d: int = 64
    delta: float = 0.5
    f: float = 256.0
    sigma_min: float = 2.0
    sigma_max: float = 512.0
    s: int = 32


@dataclass
class PipelineConfig:
    encoder: AnalyticEncoderParams = field(default_factory=AnalyticEncoderParams)
    noise: tuple = (0.0, 0.0)
    bev: BevParams = field(default_factory=BevParams)
    world: WorldSpec = field(default_factory=WorldSpec)
    table: ClassTable = field(default_factory=load_class_table)


def _get(parser, section, key, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigurationError(f"[{section}] {key}: cannot parse {raw!r}") from exc


def load_config(path=None) -> PipelineConfig:
    """Read the INI file (or defaults when path is None)."""
    parser = configparser.ConfigParser()
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigurationError(f"cannot read config file {path}")

    table = load_class_table(_get(parser, "classes", "path", str, None))

    projection = _get(parser, "encoder", "projection", str, "orthonormal")
    if projection not in ("orthonormal", "identity"):
        raise ConfigurationError(f"unknown projection {projection!r}")
    blocked = _get(parser, "encoder", "blocked", str, "building,water")
    encoder = AnalyticEncoderParams(
        n=_get(parser, "encoder", "n", int, 8),
        rho_m=_get(parser, "encoder", "rho_m", float, 4.0),
        seed=_get(parser, "encoder", "seed", int, 0),
        projection=projection,
        blocked_area_classes=tuple(
            s.strip() for s in blocked.split(",") if s.strip()
        ),
    )

    noise = (
        _get(parser, "noise", "sigma_n", float, 0.0),
        _get(parser, "noise", "dropout", float, 0.0),
    )

    bev = BevParams(
        l=_get(parser, "bev", "l", int, 64),
        d=_get(parser, "bev", "d", int, 64),
        delta=_get(parser, "bev", "delta", float, 0.5),
        f=_get(parser, "bev", "f", float, 256.0),
        sigma_min=_get(parser, "bev", "sigma_min", float, 2.0),
        sigma_max=_get(parser, "bev", "sigma_max", float, 512.0),
        s=_get(parser, "bev", "s", int, 32),
    )

    world = WorldSpec(
        extent_m=_get(parser, "world", "extent_m", float, 128.0),
        block_m=_get(parser, "world", "block_m", float, 32.0),
        building_density=_get(parser, "world", "building_density", float, 0.6),
        tree_density=_get(parser, "world", "tree_density", float, 2.0),
        delta=_get(parser, "world", "delta", float, 0.5),
    )

    return PipelineConfig(encoder=encoder, noise=noise, bev=bev, world=world, table=table)
