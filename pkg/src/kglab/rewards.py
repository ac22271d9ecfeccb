from __future__ import annotations

import abc
import collections
from typing import *

import numpy as np

from .instances import BanditInstance

# Standard normals are pulled from a stream in blocks of this size. Changing it
# changes no values, only how often the generator is called.
NOISE_BLOCK = 1024


class RngStream:
    """
    Seeded source of standard normal draws for exactly one replication

    Replication `r` of seed `s` always maps to the same substream, so a replication
    produces the same rewards no matter which worker or batch ends up running it.
    """

    def __init__(self, seed: int, replication_index: int = 0):
        if seed < 0 or replication_index < 0:
            raise ValueError(
                f"seed and replication_index must be nonnegative, got {seed!r}, {replication_index!r}"
            )
        self.seed = int(seed)
        self.replication_index = int(replication_index)
        self.step = 0
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.replication_index,))
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def standard_normal(self) -> float:
        self.step += 1
        return float(self._gen.standard_normal())

    def standard_normals(self, count: int) -> np.ndarray:
        self.step += count
        return self._gen.standard_normal(count)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, replication_index={self.replication_index}, step={self.step})"


def _check_arm(inst: BanditInstance, arm: int) -> None:
    if not 0 <= arm < inst.k:
        raise IndexError(f"Arm {arm!r} out of range for a {inst.k}-armed instance")


def sample_reward(inst: BanditInstance, arm: int, rng: RngStream) -> float:
    """One draw from N(mu_arm, sigma_arm^2)"""
    _check_arm(inst, arm)
    return inst.means[arm] + inst.stds[arm] * rng.standard_normal()


class AbstractRewardSource(abc.ABC):
    """Produces rewards for a batch of replications advancing in lockstep"""

    instance: BanditInstance

    @property
    @abc.abstractmethod
    def batch_size(self) -> int:
        pass

    @abc.abstractmethod
    def draw(self, arms: np.ndarray) -> np.ndarray:
        """Return one reward per replication, `arms[r]` being the arm pulled in replication `r`"""
        pass


class GaussianRewardSource(AbstractRewardSource):
    """Draws rewards from the instance's true distributions, one RngStream per replication"""

    def __init__(self, instance: BanditInstance, streams: Sequence[RngStream]):
        if not streams:
            raise ValueError("Need at least one RngStream")
        self.instance = instance
        self.streams = list(streams)
        self._noise = np.empty((len(self.streams), NOISE_BLOCK))
        self._pos = NOISE_BLOCK

    @classmethod
    def for_replications(cls, instance: BanditInstance, seed: int, replications: Iterable[int]):
        return cls(instance, [RngStream(seed, rep) for rep in replications])

    @property
    def batch_size(self) -> int:
        return len(self.streams)

    def draw(self, arms: np.ndarray) -> np.ndarray:
        arms = np.asarray(arms)
        if arms.shape != (self.batch_size,):
            raise ValueError(f"Expected {self.batch_size} arms, got shape {arms.shape}")
        if (arms < 0).any() or (arms >= self.instance.k).any():
            raise IndexError(f"Arm out of range for a {self.instance.k}-armed instance")
        if self._pos == NOISE_BLOCK:
            for row, stream in enumerate(self.streams):
                self._noise[row] = stream.standard_normals(NOISE_BLOCK)
            self._pos = 0
        z = self._noise[:, self._pos]
        self._pos += 1
        return self.instance.mean_array[arms] + self.instance.std_array[arms] * z


class ScriptedRewardSource(AbstractRewardSource):
    """Replays pre-recorded rewards for a single replication, arm by arm"""

    def __init__(self, instance: BanditInstance, rewards: Mapping[int, Iterable[float]]):
        self.instance = instance
        self._queues: Dict[int, Deque[float]] = collections.defaultdict(collections.deque)
        for arm, arm_rewards in rewards.items():
            _check_arm(instance, arm)
            self._queues[arm].extend(float(x) for x in arm_rewards)

    @property
    def batch_size(self) -> int:
        return 1

    def remaining(self, arm: int) -> int:
        return len(self._queues[arm])

    def draw(self, arms: np.ndarray) -> np.ndarray:
        arms = np.asarray(arms).reshape(-1)
        if arms.shape != (1,):
            raise ValueError("ScriptedRewardSource only drives a single replication")
        arm = int(arms[0])
        _check_arm(self.instance, arm)
        if not self._queues[arm]:
            raise LookupError(f"No scripted rewards left for arm {arm}")
        return np.array([self._queues[arm].popleft()])


__all__ = [
    "AbstractRewardSource",
    "GaussianRewardSource",
    "NOISE_BLOCK",
    "RngStream",
    "ScriptedRewardSource",
    "sample_reward",
]
