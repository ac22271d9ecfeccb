from __future__ import annotations

import dataclasses
import enum
import json
import math
import os
from pathlib import Path
from typing import *

import numpy as np

from .instances import BanditInstance, catalog


class ConfigError(ValueError):
    pass


class FigureKind(enum.Enum):
    SAMPLING_RATES = "sampling-rates"
    PE = "pe"
    SR = "sr"
    CR = "cr"
    BOUNDS_ONLY = "bounds-only"

    @classmethod
    def parse(cls, val: Union[str, FigureKind]) -> FigureKind:
        if isinstance(val, cls):
            return val
        try:
            return cls(val)
        except ValueError:
            choices = ", ".join(x.value for x in cls)
            raise ConfigError(f"Unknown figure kind {val!r}, expected one of {choices}") from None


DEFAULT_GRID_POINTS = 30

CONFIG_KEYS = (
    "instance",
    "rounds",
    "n0",
    "replications",
    "seed",
    "checkpoints",
    "outputs",
    "kind",
    "arms",
    "t_grid",
)


def geometric_grid(start: float, stop: float, points: int) -> List[int]:
    """`points` geometrically spaced rounds from start to stop, floored, deduplicated"""
    if points < 1:
        raise ConfigError(f"A grid needs at least one point, got {points!r}")
    if not 0 < start <= stop:
        raise ConfigError(f"Geometric grids need 0 < start <= stop, got {start!r}, {stop!r}")
    if points == 1:
        return [math.floor(start)]
    return sorted({int(math.floor(x)) for x in np.geomspace(start, stop, points)})


def _parse_number(raw: str) -> float:
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError(f"{raw!r} is not a number") from None
    if not math.isfinite(val):
        raise ConfigError(f"{raw!r} is not finite")
    return val


def parse_grid(spec: str) -> List[int]:
    """
    Parse a round grid

    `geometric:<start>:<stop>:<points>` or `list:a,b,c`. Values are floored to
    integers, deduplicated and sorted.
    """
    kind, _, rest = spec.strip().partition(":")
    if kind == "geometric":
        parts = rest.split(":")
        if len(parts) != 3:
            raise ConfigError(f"Expected geometric:<start>:<stop>:<points>, got {spec!r}")
        points = _parse_number(parts[2])
        if points != int(points):
            raise ConfigError(f"Point count must be an integer, got {parts[2]!r}")
        return geometric_grid(_parse_number(parts[0]), _parse_number(parts[1]), int(points))
    if kind == "list":
        values = [_parse_number(x) for x in rest.split(",") if x.strip()]
        if not values:
            raise ConfigError(f"Empty list grid {spec!r}")
        if min(values) < 1:
            raise ConfigError(f"Grid rounds must be at least 1, got {min(values)!r}")
        return sorted({int(math.floor(x)) for x in values})
    raise ConfigError(f"Unknown grid kind {kind!r} in {spec!r}, expected 'geometric' or 'list'")


def resolve_instance(ref: Union[int, str, Mapping[str, Any], BanditInstance]) -> BanditInstance:
    """Catalog id, inline {"means", "stds"} mapping or path to an instance JSON file"""
    if isinstance(ref, BanditInstance):
        return ref
    if isinstance(ref, Mapping):
        return BanditInstance.from_dict(ref, label="inline")
    if isinstance(ref, int):
        return catalog(ref)
    ref = str(ref)
    if ref.isdigit():
        return catalog(int(ref))
    with open(ref, "r", encoding="utf8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{ref}: not valid JSON ({e})") from e
    if not isinstance(data, Mapping):
        raise ConfigError(f"{ref}: expected a JSON object with means and stds")
    return BanditInstance.from_dict(data, label=os.path.basename(ref))


def load_config_file(path: Union[str, os.PathLike]) -> Dict[str, Any]:
    with open(path, "r", encoding="utf8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    unknown = set(data) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    return data


@dataclasses.dataclass
class ExperimentConfig:
    """One simulation / figure job"""

    instance: BanditInstance
    rounds: int = 10_000
    n0: int = 5
    replications: int = 1000
    seed: int = 0
    # Grid spec for checkpoints, geometric from k*n0 to n when unset
    checkpoints: Optional[str] = None
    outputs: Path = Path(".")
    kind: FigureKind = FigureKind.SAMPLING_RATES
    # 1-based, as they're shown to users
    arms: Optional[List[int]] = None
    # Grid spec for bound-only curves
    t_grid: Optional[str] = None

    @classmethod
    def from_sources(
        cls, file_values: Optional[Mapping[str, Any]] = None, overrides: Optional[Mapping[str, Any]] = None
    ) -> ExperimentConfig:
        """Merge defaults < config file values < explicit overrides (None means unset)"""
        merged: Dict[str, Any] = {}
        for source in (file_values or {}, overrides or {}):
            merged.update({key: val for key, val in source.items() if val is not None})
        if "instance" not in merged:
            raise ConfigError("No instance given")
        unknown = set(merged) - set(CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"Unknown config keys {sorted(unknown)}")

        merged["instance"] = resolve_instance(merged["instance"])
        if "outputs" in merged:
            merged["outputs"] = Path(merged["outputs"])
        if "kind" in merged:
            merged["kind"] = FigureKind.parse(merged["kind"])
        if "arms" in merged:
            merged["arms"] = [int(x) for x in merged["arms"]]
        for key in ("rounds", "n0", "replications", "seed"):
            if key in merged:
                val = merged[key]
                if isinstance(val, float) and not val.is_integer():
                    raise ConfigError(f"{key} must be an integer, got {val!r}")
                merged[key] = int(val)
        config = cls(**merged)
        config.validate()
        return config

    def validate(self) -> None:
        k = self.instance.k
        if self.n0 < 1:
            raise ConfigError(f"n0 must be at least 1, got {self.n0}")
        if self.rounds < k * self.n0:
            raise ConfigError(
                f"rounds={self.rounds} is shorter than the initial stage of {k * self.n0} pulls"
            )
        if self.replications < 1:
            raise ConfigError(f"replications must be at least 1, got {self.replications}")
        if self.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed}")
        if self.arms is not None:
            bad = [a for a in self.arms if not 1 <= a <= k]
            if bad or not self.arms:
                raise ConfigError(f"Arms must be between 1 and {k}, got {self.arms}")
        self.checkpoint_rounds()

    def checkpoint_rounds(self) -> List[int]:
        lo = self.instance.k * self.n0
        if self.checkpoints is None:
            return geometric_grid(lo, self.rounds, DEFAULT_GRID_POINTS)
        cps = parse_grid(self.checkpoints)
        if cps[0] < lo or cps[-1] > self.rounds:
            raise ConfigError(f"Checkpoints must lie in [{lo}, {self.rounds}], got {cps[0]}..{cps[-1]}")
        return cps

    def bound_grid(self) -> List[int]:
        if self.t_grid is None:
            return self.checkpoint_rounds()
        return parse_grid(self.t_grid)


__all__ = [
    "CONFIG_KEYS",
    "ConfigError",
    "ExperimentConfig",
    "FigureKind",
    "geometric_grid",
    "load_config_file",
    "parse_grid",
    "resolve_instance",
]
