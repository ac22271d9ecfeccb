from __future__ import annotations

import dataclasses
import functools
import importlib.resources
import json
import math
from typing import *

import numpy as np


class InstanceError(ValueError):
    pass


class LengthMismatch(InstanceError):
    pass


class NonPositiveStd(InstanceError):
    pass


class NonUniqueBest(InstanceError):
    pass


class NonFiniteValue(InstanceError):
    pass


class UnknownInstance(InstanceError):
    pass


@dataclasses.dataclass(frozen=True)
class InstanceConstants:
    """Quantities every bound formula is written in terms of"""

    means: Tuple[float, ...]
    stds: Tuple[float, ...]
    best: int
    sigma_max: float
    sigma_min: float
    delta_max: float
    delta_min: float
    second_best_mean: float
    gaps: Tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.means)

    @property
    def others(self) -> Tuple[int, ...]:
        """Indices of every non-best arm, in order"""
        return tuple(i for i in range(self.k) if i != self.best)

    @property
    def sigma_best(self) -> float:
        return self.stds[self.best]

    @property
    def second_gap(self) -> float:
        """mu_b - max_{j != b} mu_j"""
        return self.means[self.best] - self.second_best_mean

    @functools.cached_property
    def log_term(self) -> float:
        """max(ln(27 delta_max^3 / (8 sigma_min^4)), 0), shared by the rho envelopes"""
        return max(math.log(27.0 * self.delta_max**3 / (8.0 * self.sigma_min**4)), 0.0)

    def describe(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "best": self.best,
            "sigma_max": self.sigma_max,
            "sigma_min": self.sigma_min,
            "delta_max": self.delta_max,
            "delta_min": self.delta_min,
            "second_best_mean": self.second_best_mean,
        }


@dataclasses.dataclass(frozen=True)
class BanditInstance:
    """A Gaussian bandit with known variances and a unique best arm"""

    means: Tuple[float, ...]
    stds: Tuple[float, ...]
    label: Optional[str] = dataclasses.field(default=None, compare=False)

    @property
    def k(self) -> int:
        return len(self.means)

    @property
    def best(self) -> int:
        return self.constants.best

    @functools.cached_property
    def constants(self) -> InstanceConstants:
        return _compute_constants(self)

    @functools.cached_property
    def mean_array(self) -> np.ndarray:
        arr = np.array(self.means, dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @functools.cached_property
    def std_array(self) -> np.ndarray:
        arr = np.array(self.stds, dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @functools.cached_property
    def variance_array(self) -> np.ndarray:
        arr = self.std_array**2
        arr.setflags(write=False)
        return arr

    def to_dict(self) -> Dict[str, List[float]]:
        return {"means": list(self.means), "stds": list(self.stds)}

    @classmethod
    def from_dict(cls, val: Mapping[str, Any], label: Optional[str] = None) -> BanditInstance:
        try:
            means, stds = val["means"], val["stds"]
        except KeyError as e:
            raise InstanceError(f"Instance description is missing {e.args[0]!r}") from e
        return make_instance(means, stds, label=label)

    def __str__(self):
        name = self.label or "custom"
        return f"<BanditInstance {name} k={self.k} best={self.best + 1}>"


def make_instance(
    means: Sequence[float], stds: Sequence[float], label: Optional[str] = None
) -> BanditInstance:
    """Validate means / stds and build an instance"""
    try:
        means = tuple(float(x) for x in means)
        stds = tuple(float(x) for x in stds)
    except (TypeError, ValueError) as e:
        raise NonFiniteValue(f"Means and stds must be numbers: {e}") from e

    if len(means) != len(stds):
        raise LengthMismatch(f"{len(means)} means but {len(stds)} stds")
    if len(means) < 2:
        raise LengthMismatch(f"Need at least 2 arms, got {len(means)}")
    if not all(math.isfinite(x) for x in means + stds):
        raise NonFiniteValue("Means and stds must all be finite")
    if any(s <= 0 for s in stds):
        raise NonPositiveStd(f"Every std must be positive, got {stds!r}")
    top = max(means)
    if means.count(top) > 1:
        raise NonUniqueBest(f"{means.count(top)} arms share the top mean {top!r}")

    return BanditInstance(means=means, stds=stds, label=label)


def _compute_constants(inst: BanditInstance) -> InstanceConstants:
    means = inst.means
    best = max(range(inst.k), key=lambda i: means[i])
    distinct = sorted(set(means))
    # Smallest positive difference over all pairs, not just pairs involving the best arm
    delta_min = min(b - a for a, b in zip(distinct, distinct[1:]))
    return InstanceConstants(
        means=means,
        stds=inst.stds,
        best=best,
        sigma_max=max(inst.stds),
        sigma_min=min(inst.stds),
        delta_max=distinct[-1] - distinct[0],
        delta_min=delta_min,
        second_best_mean=max(m for i, m in enumerate(means) if i != best),
        gaps=tuple(means[best] - m for m in means),
    )


def instance_constants(inst: BanditInstance) -> InstanceConstants:
    return inst.constants


@functools.lru_cache(maxsize=None)
def _load_catalog() -> Dict[str, Dict[str, Any]]:
    catalog_file = importlib.resources.files("kglab") / "data" / "catalog.json"
    return json.loads(catalog_file.read_text(encoding="utf8"))


def catalog_ids() -> List[int]:
    return sorted(int(x) for x in _load_catalog())


def catalog_description(instance_id: int) -> str:
    catalog(instance_id)
    return _load_catalog()[str(instance_id)].get("description", "")


def catalog(instance_id: int) -> BanditInstance:
    """One of the five reference instances"""
    entry = _load_catalog().get(str(instance_id))
    if entry is None:
        raise UnknownInstance(f"No catalog instance {instance_id!r}, expected one of {catalog_ids()}")
    return make_instance(entry["means"], entry["stds"], label=f"instance {instance_id}")


__all__ = [
    "BanditInstance",
    "InstanceConstants",
    "InstanceError",
    "LengthMismatch",
    "NonFiniteValue",
    "NonPositiveStd",
    "NonUniqueBest",
    "UnknownInstance",
    "catalog",
    "catalog_description",
    "catalog_ids",
    "instance_constants",
    "make_instance",
]
