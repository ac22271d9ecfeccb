"""
Replication engine for the KG policy and Monte Carlo estimators built on it
"""

from __future__ import annotations

import asyncio
import concurrent.futures
import dataclasses
import logging
import math
from typing import *

import numpy as np

from .bounds import BoundSet
from .instances import BanditInstance
from .normal import norm_cdf
from .policy import RunTrace, pull_floor, resolve_checkpoints, run_kg_batch
from .rewards import GaussianRewardSource, RngStream
from .utils import worker_count

LOG = logging.getLogger(__name__)

# Replications per lockstep batch. Part of the job's identity only through
# scheduling, each replication still draws from its own stream.
REPLICATION_BLOCK = 250
# Pull-floor violations from this round on are worth a warning
PULL_FLOOR_FROM = 2000
# Normal draws per chunk in concentration checks
_CONCENTRATION_CHUNK = 1 << 21


@dataclasses.dataclass
class EstimateSeries:
    """Monte Carlo estimates of PE, SR, CR and sampling rates at each checkpoint"""

    instance: BanditInstance
    horizon: int
    n0: int
    checkpoint_rounds: np.ndarray
    pe_hat: np.ndarray
    pe_stderr: np.ndarray
    sr_hat: np.ndarray
    sr_stderr: np.ndarray
    cr_hat: np.ndarray
    cr_stderr: np.ndarray
    alpha_hat: np.ndarray
    alpha_stderr: np.ndarray
    replications: int
    seed: int
    # Per checkpoint, (replication, arm) pairs sitting below the (t/k)^(3/4) pull floor
    pull_floor_violations: np.ndarray
    traces: Optional[List[RunTrace]] = None

    @property
    def low_replication(self) -> bool:
        return self.replications < 2

    def __len__(self):
        return len(self.checkpoint_rounds)


def _sample_stderr(values: np.ndarray) -> np.ndarray:
    if values.shape[0] < 2:
        return np.zeros(values.shape[1:])
    return values.std(axis=0, ddof=1) / math.sqrt(values.shape[0])


def summarize_traces(inst: BanditInstance, traces: Sequence[RunTrace], seed: int) -> EstimateSeries:
    """Reduce traces into estimates, strictly in the order given"""
    if not traces:
        raise ValueError("Need at least one trace to summarize")
    consts = inst.constants
    reps = len(traces)
    rounds = traces[0].checkpoint_rounds
    recs = np.stack([tr.recommendation_at_checkpoints for tr in traces])
    pulls = np.stack([tr.pulls_at_checkpoints for tr in traces])
    gaps = np.array(consts.gaps)

    pe_hat = np.count_nonzero(recs != consts.best, axis=0) / reps
    pe_stderr = np.sqrt(pe_hat * (1.0 - pe_hat) / reps) if reps > 1 else np.zeros_like(pe_hat)

    regrets = gaps[recs]
    # CR from pull counts and true gaps, not from the realized rewards
    cum_regrets = (pulls * gaps).sum(axis=-1)
    alphas = pulls / rounds[None, :, None]

    below_floor = pulls < pull_floor(rounds, inst.k)[None, :, None]
    return EstimateSeries(
        instance=inst,
        horizon=traces[0].horizon,
        n0=traces[0].n0,
        checkpoint_rounds=rounds.copy(),
        pe_hat=pe_hat,
        pe_stderr=pe_stderr,
        sr_hat=regrets.mean(axis=0),
        sr_stderr=_sample_stderr(regrets),
        cr_hat=cum_regrets.mean(axis=0),
        cr_stderr=_sample_stderr(cum_regrets),
        alpha_hat=alphas.mean(axis=0),
        alpha_stderr=_sample_stderr(alphas),
        replications=reps,
        seed=seed,
        pull_floor_violations=below_floor.sum(axis=(0, 2)),
        traces=list(traces) if traces[0].diagnostic else None,
    )


def _run_block(
    inst: BanditInstance,
    n: int,
    n0: int,
    seed: int,
    replications: range,
    checkpoints: np.ndarray,
    diagnostic: bool,
) -> List[RunTrace]:
    source = GaussianRewardSource.for_replications(inst, seed, replications)
    return run_kg_batch(inst, n, n0, source, checkpoints, diagnostic)


def _replication_blocks(reps: int, block_size: int) -> List[range]:
    return [range(start, min(start + block_size, reps)) for start in range(0, reps, block_size)]


async def run_replications_async(
    inst: BanditInstance,
    n: int,
    n0: int,
    reps: int,
    seed: int,
    checkpoints: Optional[Iterable[int]] = None,
    workers: Optional[int] = None,
    diagnostic: bool = False,
    block_size: int = REPLICATION_BLOCK,
) -> EstimateSeries:
    """Run `reps` independent KG replications on a thread pool and summarize them"""
    if reps < 1:
        raise ValueError(f"Need at least one replication, got {reps!r}")
    if block_size < 1:
        raise ValueError(f"block_size must be positive, got {block_size!r}")
    cps = resolve_checkpoints(inst, n, n0, checkpoints)
    if workers is None:
        workers = worker_count()
    blocks = _replication_blocks(reps, block_size)
    LOG.info(
        "Running %d replications of %s to n=%d in %d blocks on %d workers",
        reps,
        inst,
        n,
        len(blocks),
        workers,
    )

    loop = asyncio.get_running_loop()
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futs = [
            loop.run_in_executor(pool, _run_block, inst, n, n0, seed, block, cps, diagnostic)
            for block in blocks
        ]
        # gather() hands results back in submission order, which is replication order
        block_traces = await asyncio.gather(*futs)

    series = summarize_traces(inst, [tr for block in block_traces for tr in block], seed)
    if series.low_replication:
        LOG.warning("Only %d replication, standard errors are reported as 0", reps)
    late = series.checkpoint_rounds >= PULL_FLOOR_FROM
    if series.pull_floor_violations[late].any():
        LOG.warning(
            "Pull floor violated at %d late checkpoints",
            int(np.count_nonzero(series.pull_floor_violations[late])),
        )
    return series


def run_replications(
    inst: BanditInstance,
    n: int,
    n0: int,
    reps: int,
    seed: int,
    checkpoints: Optional[Iterable[int]] = None,
    workers: Optional[int] = None,
    diagnostic: bool = False,
    block_size: int = REPLICATION_BLOCK,
) -> EstimateSeries:
    return asyncio.run(
        run_replications_async(inst, n, n0, reps, seed, checkpoints, workers, diagnostic, block_size)
    )


def transform_rates(values: np.ndarray, rounds: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """-log(values)/t, with a gap flag (and NaN) wherever the value is 0 or undefined"""
    values = np.asarray(values, dtype=np.float64)
    gap = ~(values > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        rates = np.where(gap, np.nan, -np.log(np.where(gap, 1.0, values)) / rounds)
    return rates, gap


def _log_rates(logs: Sequence[float], rounds: np.ndarray) -> np.ndarray:
    logs = np.array(logs, dtype=np.float64)
    rates = -logs / rounds
    rates[~np.isfinite(rates)] = np.nan
    return rates


@dataclasses.dataclass
class TransformedBounds:
    """Bound curves on the same rate scales as the estimates"""

    checkpoint_rounds: np.ndarray
    pe_upper_rate: np.ndarray
    pe_lower_rate: np.ndarray
    sr_upper_rate: np.ndarray
    sr_lower_rate: np.ndarray
    cr_upper_rate: np.ndarray
    valid: np.ndarray
    vacuous: np.ndarray


def transform_bounds(bounds: Sequence[BoundSet]) -> TransformedBounds:
    rounds = np.array([b.t for b in bounds], dtype=np.float64)
    return TransformedBounds(
        checkpoint_rounds=rounds,
        pe_upper_rate=_log_rates([b.pe_upper.log_magnitude for b in bounds], rounds),
        pe_lower_rate=_log_rates([b.pe_lower.log_magnitude for b in bounds], rounds),
        sr_upper_rate=_log_rates([b.sr_upper.log_magnitude for b in bounds], rounds),
        sr_lower_rate=_log_rates([b.sr_lower.log_magnitude for b in bounds], rounds),
        cr_upper_rate=np.array([b.cr_upper for b in bounds], dtype=np.float64) / rounds,
        valid=np.array([b.valid for b in bounds], dtype=bool),
        vacuous=np.array([b.vacuous for b in bounds], dtype=bool),
    )


@dataclasses.dataclass
class TransformedSeries:
    checkpoint_rounds: np.ndarray
    pe_rate: np.ndarray
    pe_gap: np.ndarray
    sr_rate: np.ndarray
    sr_gap: np.ndarray
    cr_rate: np.ndarray
    # -log(3/reps)/t, only when asked for
    pe_rule_of_three_rate: Optional[np.ndarray] = None
    bounds: Optional[TransformedBounds] = None


def estimate_transforms(
    series: EstimateSeries,
    bounds: Optional[Sequence[BoundSet]] = None,
    rule_of_three: bool = False,
) -> TransformedSeries:
    """Put estimates (and optionally their bounds) on the -(1/t)log and R/t scales"""
    rounds = series.checkpoint_rounds.astype(np.float64)
    pe_rate, pe_gap = transform_rates(series.pe_hat, rounds)
    sr_rate, sr_gap = transform_rates(series.sr_hat, rounds)
    rule_rate = None
    if rule_of_three:
        rule_rate = np.full_like(rounds, -math.log(min(3.0 / series.replications, 1.0))) / rounds
    transformed_bounds = None
    if bounds is not None:
        if [b.t for b in bounds] != list(series.checkpoint_rounds):
            raise ValueError("Bounds must be evaluated at the series' checkpoints")
        transformed_bounds = transform_bounds(bounds)
    return TransformedSeries(
        checkpoint_rounds=rounds,
        pe_rate=pe_rate,
        pe_gap=pe_gap,
        sr_rate=sr_rate,
        sr_gap=sr_gap,
        cr_rate=series.cr_hat / rounds,
        pe_rule_of_three_rate=rule_rate,
        bounds=transformed_bounds,
    )


def _check_concentration_args(sigma: float, m: int, eps: float) -> None:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    if m < 1:
        raise ValueError(f"m must be at least 1, got {m!r}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")


def mean_tail_bound(sigma: float, m: int, eps: float) -> float:
    """Bound on P(|mean of m draws - mu| >= eps) for N(mu, sigma^2) rewards"""
    _check_concentration_args(sigma, m, eps)
    return 2.0 * sigma / (math.sqrt(m) * eps) * math.exp(-m * eps**2 / (2.0 * sigma**2))


def gaussian_tail_prob(sigma: float, m: int, eps: float) -> float:
    """The exact probability `mean_tail_bound()` bounds"""
    _check_concentration_args(sigma, m, eps)
    return 2.0 * norm_cdf(-math.sqrt(m) * eps / sigma)


class ConcentrationCheck(NamedTuple):
    empirical_prob: float
    bound: float
    replications: int

    @property
    def stderr(self) -> float:
        p = self.empirical_prob
        return math.sqrt(p * (1.0 - p) / self.replications)

    def contained(self, slack: float = 4.0) -> bool:
        return self.empirical_prob <= self.bound + slack * self.stderr


def concentration_check(sigma: float, m: int, eps: float, reps: int, seed: int) -> ConcentrationCheck:
    """Empirical frequency of |sample mean - mu| >= eps against `mean_tail_bound()`"""
    bound = mean_tail_bound(sigma, m, eps)
    if reps < 1:
        raise ValueError(f"Need at least one replication, got {reps!r}")
    stream = RngStream(seed, 0)
    per_chunk = max(1, _CONCENTRATION_CHUNK // m)
    exceed = 0
    done = 0
    while done < reps:
        count = min(per_chunk, reps - done)
        draws = sigma * stream.standard_normals(count * m).reshape(count, m)
        exceed += int(np.count_nonzero(np.abs(draws.mean(axis=1)) >= eps))
        done += count
    return ConcentrationCheck(empirical_prob=exceed / reps, bound=bound, replications=reps)


__all__ = [
    "ConcentrationCheck",
    "EstimateSeries",
    "PULL_FLOOR_FROM",
    "REPLICATION_BLOCK",
    "TransformedBounds",
    "TransformedSeries",
    "concentration_check",
    "estimate_transforms",
    "gaussian_tail_prob",
    "mean_tail_bound",
    "run_replications",
    "run_replications_async",
    "summarize_traces",
    "transform_bounds",
    "transform_rates",
]
