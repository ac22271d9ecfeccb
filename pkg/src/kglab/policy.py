from __future__ import annotations

import dataclasses
from typing import *

import numpy as np

from .instances import BanditInstance
from .normal import LogValue, log_f_neg_array
from .rewards import AbstractRewardSource, GaussianRewardSource, RngStream

REWARD_SOURCE_TYPE = Union[AbstractRewardSource, RngStream, Sequence[RngStream]]


class PolicyError(ValueError):
    pass


class HorizonTooSmall(PolicyError):
    pass


class UnpulledArm(PolicyError):
    pass


class InvalidCheckpoints(PolicyError):
    pass


@dataclasses.dataclass
class PosteriorState:
    """
    Posterior over arm means under the non-informative prior

    Arrays are either `(k,)` for a single replication or `(batch, k)` for
    replications advancing in lockstep. Precision is never stored, it is
    always `pulls / sigma^2`.
    """

    instance: BanditInstance
    post_mean: np.ndarray
    # Running mean of each arm's rewards, kept apart from the Bayesian update
    sample_mean: np.ndarray
    pulls: np.ndarray
    round: int = 0

    @classmethod
    def empty(cls, instance: BanditInstance, batch: Optional[int] = None) -> PosteriorState:
        shape = (instance.k,) if batch is None else (batch, instance.k)
        return cls(
            instance=instance,
            post_mean=np.zeros(shape),
            sample_mean=np.zeros(shape),
            pulls=np.zeros(shape, dtype=np.int64),
        )

    @classmethod
    def from_arrays(
        cls, instance: BanditInstance, post_mean: Sequence[float], pulls: Sequence[int]
    ) -> PosteriorState:
        """Build a state directly, e.g. to look at KG values for a hand-picked posterior"""
        post_mean = np.array(post_mean, dtype=np.float64)
        pulls = np.array(pulls, dtype=np.int64)
        if post_mean.shape != pulls.shape or post_mean.shape[-1] != instance.k:
            raise ValueError(f"Expected arrays ending in {instance.k} arms, got {post_mean.shape}")
        if (pulls < 0).any():
            raise ValueError("Pull counts can't be negative")
        rounds = pulls.sum(axis=-1)
        if np.ndim(rounds) and (rounds != rounds.flat[0]).any():
            raise ValueError("Batched states must share one round counter")
        return cls(
            instance=instance,
            post_mean=post_mean,
            sample_mean=post_mean.copy(),
            pulls=pulls,
            round=int(np.max(rounds)),
        )

    @property
    def k(self) -> int:
        return self.instance.k

    @property
    def batched(self) -> bool:
        return self.pulls.ndim == 2

    @property
    def post_precision(self) -> np.ndarray:
        return self.pulls / self.instance.variance_array

    def copy(self) -> PosteriorState:
        return dataclasses.replace(
            self,
            post_mean=self.post_mean.copy(),
            sample_mean=self.sample_mean.copy(),
            pulls=self.pulls.copy(),
        )

    def _index(self, arms) -> tuple:
        if self.batched:
            arms = np.asarray(arms, dtype=np.int64)
            return np.arange(arms.shape[0]), arms
        return (int(arms),)

    def observe(self, arms: Union[int, np.ndarray], rewards: Union[float, np.ndarray]) -> None:
        """Fold one reward per replication into the posterior, in place"""
        idx = self._index(arms)
        arm_idx = idx[-1]
        if np.any(arm_idx < 0) or np.any(arm_idx >= self.k):
            raise IndexError(f"Arm out of range for a {self.k}-armed instance")
        rewards = np.asarray(rewards, dtype=np.float64)
        noise_precision = 1.0 / self.instance.variance_array[arm_idx]
        precision = self.pulls[idx] * noise_precision

        self.post_mean[idx] = (precision * self.post_mean[idx] + noise_precision * rewards) / (
            precision + noise_precision
        )
        self.pulls[idx] += 1
        self.sample_mean[idx] += (rewards - self.sample_mean[idx]) / self.pulls[idx]
        self.round += 1


def posterior_update(state: PosteriorState, arm: int, reward: float) -> PosteriorState:
    """Return a new state with `reward` observed on `arm`"""
    new_state = state.copy()
    new_state.observe(arm, reward)
    return new_state


def log_kg_values(state: PosteriorState) -> np.ndarray:
    """log of the knowledge gradient of every arm, same shape as the state's arrays"""
    if (state.pulls == 0).any():
        raise UnpulledArm("KG value is undefined for an arm that hasn't been pulled")
    mean = state.post_mean
    precision = state.post_precision
    noise_precision = 1.0 / state.instance.variance_array
    # Variance of the change in posterior mean from one more pull,
    # 1/p - 1/(p + s) without the subtraction.
    zeta = np.sqrt(noise_precision / (precision * (precision + noise_precision)))

    best_idx = np.expand_dims(np.argmax(mean, axis=-1), -1)
    best = np.take_along_axis(mean, best_idx, axis=-1)
    runner_up = mean.copy()
    np.put_along_axis(runner_up, best_idx, -np.inf, axis=-1)
    runner_up = runner_up.max(axis=-1, keepdims=True)

    is_best = np.arange(state.k) == best_idx
    gap = np.abs(mean - np.where(is_best, runner_up, best))
    return np.log(zeta) + log_f_neg_array(gap / zeta)


def kg_value(state: PosteriorState, arm: int) -> LogValue:
    if state.batched:
        raise ValueError("kg_value() takes a single-replication state")
    if not 0 <= arm < state.k:
        raise IndexError(f"Arm {arm!r} out of range for a {state.k}-armed instance")
    return LogValue(float(log_kg_values(state)[arm]))


def select_arms(state: PosteriorState) -> np.ndarray:
    """KG choice for every replication, lowest index on ties"""
    return np.argmax(log_kg_values(state), axis=-1)


def select_arm(state: PosteriorState) -> int:
    if state.batched:
        raise ValueError("select_arm() takes a single-replication state, use select_arms()")
    return int(select_arms(state))


def recommend_arms(state: PosteriorState) -> np.ndarray:
    if (state.pulls == 0).any():
        raise UnpulledArm("Can't recommend before every arm has been pulled")
    return np.argmax(state.post_mean, axis=-1)


def recommend(state: PosteriorState) -> int:
    """J = argmax of the posterior means, lowest index on ties"""
    if state.batched:
        raise ValueError("recommend() takes a single-replication state, use recommend_arms()")
    return int(recommend_arms(state))


@dataclasses.dataclass
class RunTrace:
    """Everything recorded from one replication of the KG policy"""

    instance: BanditInstance
    n0: int
    horizon: int
    checkpoint_rounds: np.ndarray
    pulls_at_checkpoints: np.ndarray
    recommendation_at_checkpoints: np.ndarray
    final_recommendation: int
    final_post_mean: np.ndarray
    final_sample_mean: np.ndarray
    final_pulls: np.ndarray
    replication_index: Optional[int] = None
    # Only filled in diagnostic mode
    pull_sequence: Optional[np.ndarray] = None
    reward_sequence: Optional[np.ndarray] = None

    @property
    def alpha_at_checkpoints(self) -> np.ndarray:
        return self.pulls_at_checkpoints / self.checkpoint_rounds[:, None]

    @property
    def diagnostic(self) -> bool:
        return self.pull_sequence is not None

    def reward_log(self, arm: int) -> np.ndarray:
        """Rewards observed on `arm`, in the order they were drawn"""
        if not self.diagnostic:
            raise ValueError("Reward logs are only kept for diagnostic runs")
        return self.reward_sequence[self.pull_sequence == arm]


def resolve_checkpoints(
    inst: BanditInstance, n: int, n0: int, checkpoints: Optional[Iterable[int]]
) -> np.ndarray:
    """Sorted, deduplicated checkpoint rounds inside [k*n0, n]"""
    if checkpoints is None:
        return np.array([n], dtype=np.int64)
    cps = np.unique(np.array(list(checkpoints), dtype=np.int64))
    if not len(cps):
        raise InvalidCheckpoints("Need at least one checkpoint")
    lo = inst.k * n0
    if cps[0] < lo or cps[-1] > n:
        raise InvalidCheckpoints(f"Checkpoints must lie in [{lo}, {n}], got {cps[0]}..{cps[-1]}")
    return cps


def _check_horizon(inst: BanditInstance, n: int, n0: int) -> None:
    if n0 < 1:
        raise PolicyError(f"The initial stage needs n0 >= 1, got {n0!r}")
    if n < inst.k * n0:
        raise HorizonTooSmall(f"Horizon {n} is shorter than the initial stage of {inst.k * n0} pulls")


def _as_source(inst: BanditInstance, rng: REWARD_SOURCE_TYPE) -> AbstractRewardSource:
    if isinstance(rng, AbstractRewardSource):
        return rng
    if isinstance(rng, RngStream):
        return GaussianRewardSource(inst, [rng])
    return GaussianRewardSource(inst, rng)


class _LockstepRun:
    """Drives a batch of replications forward one pull at a time"""

    def __init__(
        self,
        source: AbstractRewardSource,
        n: int,
        checkpoints: np.ndarray,
        diagnostic: bool,
    ):
        self.source = source
        self.instance = source.instance
        batch = source.batch_size
        self.state = PosteriorState.empty(self.instance, batch=batch)
        self.checkpoints = checkpoints
        self.pulls_at = np.zeros((batch, len(checkpoints), self.instance.k), dtype=np.int64)
        self.recommended_at = np.zeros((batch, len(checkpoints)), dtype=np.int64)
        self._next_checkpoint = 0
        self.pull_sequence = np.zeros((batch, n), dtype=np.int64) if diagnostic else None
        self.reward_sequence = np.zeros((batch, n)) if diagnostic else None

    def pull(self, arms: np.ndarray) -> None:
        rewards = self.source.draw(arms)
        if self.pull_sequence is not None:
            self.pull_sequence[:, self.state.round] = arms
            self.reward_sequence[:, self.state.round] = rewards
        self.state.observe(arms, rewards)

        while (
            self._next_checkpoint < len(self.checkpoints)
            and self.checkpoints[self._next_checkpoint] == self.state.round
        ):
            self.pulls_at[:, self._next_checkpoint] = self.state.pulls
            self.recommended_at[:, self._next_checkpoint] = recommend_arms(self.state)
            self._next_checkpoint += 1

    def initial_stage(self, n0: int) -> None:
        # Round robin, so every arm has n0 pulls after k*n0 rounds
        for _ in range(n0):
            for arm in range(self.instance.k):
                self.pull(np.full(self.source.batch_size, arm, dtype=np.int64))

    def run(self, n: int, n0: int) -> None:
        self.initial_stage(n0)
        while self.state.round < n:
            self.pull(select_arms(self.state))

    def traces(self, n0: int, n: int, replication_indices: Sequence[Optional[int]]) -> List[RunTrace]:
        final_recs = recommend_arms(self.state)
        traces = []
        for row, rep in enumerate(replication_indices):
            traces.append(
                RunTrace(
                    instance=self.instance,
                    n0=n0,
                    horizon=n,
                    checkpoint_rounds=self.checkpoints.copy(),
                    pulls_at_checkpoints=self.pulls_at[row].copy(),
                    recommendation_at_checkpoints=self.recommended_at[row].copy(),
                    final_recommendation=int(final_recs[row]),
                    final_post_mean=self.state.post_mean[row].copy(),
                    final_sample_mean=self.state.sample_mean[row].copy(),
                    final_pulls=self.state.pulls[row].copy(),
                    replication_index=rep,
                    pull_sequence=None if self.pull_sequence is None else self.pull_sequence[row].copy(),
                    reward_sequence=(
                        None if self.reward_sequence is None else self.reward_sequence[row].copy()
                    ),
                )
            )
        return traces


def init_state(inst: BanditInstance, n0: int, rng: REWARD_SOURCE_TYPE) -> PosteriorState:
    """Pull every arm n0 times round robin; a single stream gives an unbatched state"""
    _check_horizon(inst, inst.k * n0, n0)
    source = _as_source(inst, rng)
    runner = _LockstepRun(source, inst.k * n0, np.array([inst.k * n0]), diagnostic=False)
    runner.initial_stage(n0)
    state = runner.state
    if source.batch_size == 1 and not isinstance(rng, Sequence):
        return PosteriorState(
            instance=inst,
            post_mean=state.post_mean[0],
            sample_mean=state.sample_mean[0],
            pulls=state.pulls[0],
            round=state.round,
        )
    return state


def run_kg_batch(
    inst: BanditInstance,
    n: int,
    n0: int,
    rng: REWARD_SOURCE_TYPE,
    checkpoints: Optional[Iterable[int]] = None,
    diagnostic: bool = False,
) -> List[RunTrace]:
    """
    Run the KG policy for every replication the reward source drives

    `n` counts every pull, the k*n0 initial-stage pulls included.
    """
    _check_horizon(inst, n, n0)
    cps = resolve_checkpoints(inst, n, n0, checkpoints)
    source = _as_source(inst, rng)
    runner = _LockstepRun(source, n, cps, diagnostic)
    runner.run(n, n0)

    if isinstance(source, GaussianRewardSource):
        rep_indices = [stream.replication_index for stream in source.streams]
    else:
        rep_indices = [None] * source.batch_size
    return runner.traces(n0, n, rep_indices)


def run_kg(
    inst: BanditInstance,
    n: int,
    n0: int,
    rng: Union[RngStream, AbstractRewardSource],
    checkpoints: Optional[Iterable[int]] = None,
    diagnostic: bool = False,
) -> RunTrace:
    source = _as_source(inst, rng)
    if source.batch_size != 1:
        raise ValueError("run_kg() drives a single replication, use run_kg_batch()")
    return run_kg_batch(inst, n, n0, source, checkpoints, diagnostic)[0]


def pull_floor(t: Union[int, np.ndarray], k: int) -> Union[float, np.ndarray]:
    """(t/k)^(3/4), the pull count every arm should eventually stay above"""
    return (np.asarray(t, dtype=np.float64) / k) ** 0.75


def pull_floor_violations(trace: RunTrace, min_round: int = 0) -> List[Tuple[int, int]]:
    """(checkpoint round, arm) pairs where the arm was pulled less than the floor"""
    floors = pull_floor(trace.checkpoint_rounds, trace.instance.k)
    below = trace.pulls_at_checkpoints < floors[:, None]
    below &= (trace.checkpoint_rounds >= min_round)[:, None]
    return [(int(trace.checkpoint_rounds[c]), int(arm)) for c, arm in zip(*np.nonzero(below))]


__all__ = [
    "HorizonTooSmall",
    "InvalidCheckpoints",
    "PolicyError",
    "PosteriorState",
    "RunTrace",
    "UnpulledArm",
    "init_state",
    "kg_value",
    "log_kg_values",
    "posterior_update",
    "pull_floor",
    "pull_floor_violations",
    "recommend",
    "recommend_arms",
    "resolve_checkpoints",
    "run_kg",
    "run_kg_batch",
    "select_arm",
    "select_arms",
]
