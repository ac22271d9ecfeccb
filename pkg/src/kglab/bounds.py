"""
Closed-form finite-time bounds for the KG policy

Every function here is a pure function of the instance constants and the round
`t`. Nothing tries to work out *when* a bound starts to hold, instead each
result carries a `valid` flag (the rho envelopes are defined) and a `vacuous`
flag (the confidence prefactor clamped to zero). Probabilities are returned as
`LogValue`s since they underflow long before the interesting values of `t`.
"""

from __future__ import annotations

import dataclasses
import fractions
import logging
import math
from typing import *

import numpy as np
from scipy.special import logsumexp

from .instances import InstanceConstants
from .normal import LogValue

LOG = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)

LOWER_VARIANTS = ("split", "combined")


def q_fn(consts: InstanceConstants, s: float) -> float:
    """Probability defect q(s), may exceed 1"""
    if not s > 0:
        raise ValueError(f"q(s) needs s > 0, got {s!r}")
    k = consts.k
    sig = consts.sigma_max
    return 4.0 * sig * k ** (-1 / 8) * s ** (-1 / 8) * math.exp(-(k ** 0.25) * s ** 0.25 / (8.0 * sig**2))


def _log_one_minus_q_pow(consts: InstanceConstants, t: float, power: int) -> float:
    """log([1 - q(3t/4)]^power), -inf once q reaches 1"""
    q = q_fn(consts, 0.75 * t)
    if q >= 1.0:
        return -math.inf
    return power * math.log1p(-q)


def confidence(consts: InstanceConstants, t: float) -> float:
    """[1 - q(3t/4)]^k clamped into [0, 1]"""
    return math.exp(_log_one_minus_q_pow(consts, t, consts.k))


def _log_q(consts: InstanceConstants, s: float) -> float:
    k = consts.k
    sig = consts.sigma_max
    return math.log(4.0 * sig) - math.log(k) / 8 - math.log(s) / 8 - k**0.25 * s**0.25 / (8.0 * sig**2)


def _log_defect_weight(consts: InstanceConstants, t: float) -> float:
    """log(1 - [1 - q(3t/4)]^k)"""
    log_q = _log_q(consts, 0.75 * t)
    if log_q >= 0.0:
        return 0.0
    q = math.exp(log_q)
    if q < 1e-300:
        # 1 - (1 - q)^k == k*q to well below double precision here
        return math.log(consts.k) + log_q
    return math.log(-math.expm1(consts.k * math.log1p(-q)))


class RhoComponents(NamedTuple):
    lower_1: float
    lower_2: float
    upper_1: float
    upper_2: float


class RhoEnvelope(NamedTuple):
    rho_lower: float
    rho_upper: float
    valid: bool


def rho_components(consts: InstanceConstants, i: int, t: float) -> Tuple[RhoComponents, bool]:
    """The four envelope formulas for arm `i` and whether they're all defined"""
    if i == consts.best:
        raise ValueError("The rho envelopes are only defined for non-best arms")
    if not 0 <= i < consts.k:
        raise IndexError(f"Arm {i!r} out of range for a {consts.k}-armed instance")
    if not t >= 1:
        raise ValueError(f"t must be at least 1, got {t!r}")

    k = consts.k
    gap = consts.gaps[i]
    second_gap = consts.second_gap
    sig_i = consts.stds[i]
    sig_b = consts.sigma_best
    log_term = consts.log_term

    eps_1 = t ** -0.25
    eps_2 = (0.75 * t) ** -0.25
    scale_1 = 1.0 + (t / k) ** -0.75
    scale_2 = (1.0 + (3.0 * t / (4.0 * k)) ** -0.75) ** 2
    slack_1 = 8.0 * k / math.sqrt(t) + 2.0 * k * log_term / t
    slack_2 = 16.0 * k / math.sqrt(3.0 * t) + 8.0 * k * log_term / (3.0 * t)

    valid = min(gap - eps_1, gap - eps_2, second_gap - eps_1, second_gap - eps_2) > 0
    if not valid:
        nan = math.nan
        return RhoComponents(nan, nan, nan, nan), False

    inner_lower_2 = (gap + eps_2) ** 2 / sig_i**2 + slack_2
    inner_lower_1 = (gap + eps_1) ** 2 / sig_i**2 + slack_1
    inner_upper_1 = (second_gap + eps_1) ** 2 / sig_b**2 + slack_1
    inner_upper_2 = (second_gap + eps_2) ** 2 / sig_b**2 + slack_2
    return (
        RhoComponents(
            lower_1=(second_gap - eps_2) / (scale_2 * sig_b) / math.sqrt(inner_lower_2),
            lower_2=(second_gap - eps_1) / (scale_1 * sig_b) / math.sqrt(inner_lower_1),
            upper_1=scale_1 * sig_i / (gap - eps_1) * math.sqrt(inner_upper_1),
            upper_2=scale_2 * sig_i / (gap - eps_2) * math.sqrt(inner_upper_2),
        ),
        True,
    )


def rho_bounds(consts: InstanceConstants, i: int, t: float) -> RhoEnvelope:
    """Envelope on N_i / N_b for non-best arm `i` at round `t`"""
    comps, valid = rho_components(consts, i, t)
    return RhoEnvelope(
        rho_lower=min(comps.lower_1, comps.lower_2),
        rho_upper=max(comps.upper_1, comps.upper_2),
        valid=valid,
    )


@dataclasses.dataclass(frozen=True)
class RhoBounds:
    """rho envelopes of every non-best arm at one round"""

    t: float
    arms: Tuple[int, ...]
    rho_lower: np.ndarray
    rho_upper: np.ndarray
    valid: bool

    @property
    def sum_lower(self) -> float:
        return float(np.sum(self.rho_lower))

    @property
    def sum_upper(self) -> float:
        return float(np.sum(self.rho_upper))

    @property
    def ordered(self) -> bool:
        return self.valid and bool(np.all(self.rho_lower <= self.rho_upper))

    def for_arm(self, arm: int) -> RhoEnvelope:
        idx = self.arms.index(arm)
        return RhoEnvelope(float(self.rho_lower[idx]), float(self.rho_upper[idx]), self.valid)


def rho_bound_set(consts: InstanceConstants, t: float) -> RhoBounds:
    envelopes = [rho_bounds(consts, i, t) for i in consts.others]
    valid = all(env.valid for env in envelopes)
    if not valid:
        LOG.debug("rho envelopes undefined at t=%s", t)
    return RhoBounds(
        t=t,
        arms=consts.others,
        rho_lower=np.array([env.rho_lower for env in envelopes]),
        rho_upper=np.array([env.rho_upper for env in envelopes]),
        valid=valid,
    )


class AlphaBounds(NamedTuple):
    lower: np.ndarray
    upper: np.ndarray


def alpha_bounds(consts: InstanceConstants, rho: RhoBounds) -> AlphaBounds:
    """Per-arm sampling rate bounds, NaN wherever the envelopes are undefined"""
    lower = np.full(consts.k, np.nan)
    upper = np.full(consts.k, np.nan)
    if not rho.valid:
        return AlphaBounds(lower, upper)
    lower_den = 1.0 + rho.sum_upper
    upper_den = 1.0 + rho.sum_lower
    lower[consts.best] = 1.0 / lower_den
    upper[consts.best] = 1.0 / upper_den
    others = list(rho.arms)
    lower[others] = rho.rho_lower / lower_den
    upper[others] = rho.rho_upper / upper_den
    return AlphaBounds(lower, upper)


def _pe_upper_terms(consts: InstanceConstants, rho: RhoBounds, defect_terms: bool) -> List[float]:
    t = rho.t
    k = consts.k
    delta = consts.delta_min
    sig_b = consts.sigma_best
    spread = 1.0 + rho.sum_upper

    terms = [
        math.log(sig_b * math.sqrt(2.0 * spread) / (delta * math.sqrt(math.pi * t)))
        - delta**2 * t / (8.0 * sig_b**2 * spread)
    ]
    log_defect = _log_defect_weight(consts, t) if defect_terms else -math.inf
    if defect_terms:
        terms.append(
            math.log(math.sqrt(2.0) * k ** (3 / 8) * sig_b / (math.sqrt(math.pi) * delta * t ** (3 / 8)))
            + log_defect
            - delta**2 * t**0.75 / (8.0 * sig_b**2 * k**0.75)
        )
    for idx, i in enumerate(rho.arms):
        sig_i = consts.stds[i]
        margin = consts.gaps[i] - delta / 2.0
        rho_lo = rho.rho_lower[idx]
        terms.append(
            math.log(sig_i * math.sqrt(spread) / (margin * math.sqrt(2.0 * math.pi * rho_lo * t)))
            - margin**2 * rho_lo * t / (2.0 * sig_i**2 * spread)
        )
        if defect_terms:
            terms.append(
                math.log(k ** (3 / 8) * sig_i / (math.sqrt(2.0 * math.pi) * margin * t ** (3 / 8)))
                + log_defect
                - margin**2 * t**0.75 / (2.0 * sig_i**2 * k**0.75)
            )
    return terms


def pe_upper(consts: InstanceConstants, rho: RhoBounds, defect_terms: bool = True) -> LogValue:
    """
    Upper bound on the probability of error at round `rho.t`

    `defect_terms=False` leaves out the two families of terms weighted by
    1 - [1 - q(3t/4)]^k. They decay like exp(-c t^(3/4)) and end up dominating
    the bound, so only the remaining terms carry the linear exponential rate.
    """
    if not rho.valid:
        return LogValue(math.nan)
    return LogValue(float(logsumexp(_pe_upper_terms(consts, rho, defect_terms))))


def sr_upper(consts: InstanceConstants, rho: RhoBounds, defect_terms: bool = True) -> LogValue:
    """Same display as `pe_upper()` with every term scaled by delta_max"""
    return LogValue(pe_upper(consts, rho, defect_terms).log_magnitude + math.log(consts.delta_max))


def _pe_lower_log_candidates(consts: InstanceConstants, rho: RhoBounds, variant: str) -> np.ndarray:
    t = rho.t
    delta = consts.delta_min
    sig_b = consts.sigma_best
    spread_up = 1.0 + rho.sum_upper
    spread_lo = 1.0 + rho.sum_lower

    candidates = []
    for idx, j in enumerate(rho.arms):
        sig_j = consts.stds[j]
        margin = consts.gaps[j] - delta / 2.0
        rho_lo = rho.rho_lower[idx]
        rho_up = rho.rho_upper[idx]
        if variant == "split":
            head = delta / (2.0 * sig_j) * math.sqrt(rho_lo * t / spread_up)
            tail_num = margin * math.sqrt(t) / (sig_b * math.sqrt(spread_up))
        else:
            head = delta / (2.0 * sig_j) * math.sqrt(rho_lo / spread_up)
            tail_num = margin * t / (sig_b * math.sqrt(spread_up))
        first = head / (1.0 + delta**2 * rho_up * t / (4.0 * sig_j**2 * spread_lo))
        second = tail_num / (1.0 + margin**2 * t / (sig_b**2 * spread_lo))
        exponent = -(delta**2) * rho_up * t / (8.0 * sig_j**2 * spread_lo) - margin**2 * t / (
            2.0 * sig_b**2 * spread_lo
        )
        candidates.append(math.log(first) + math.log(second) + exponent)
    return np.array(candidates)


def pe_lower(consts: InstanceConstants, rho: RhoBounds, variant: str = "split") -> LogValue:
    """
    Lower bound on the probability of error at round `rho.t`

    `variant` picks where the sqrt(t) factors sit, "split" spreading them over both
    factors and "combined" putting a full t in the second. Both describe the
    same number.
    """
    if variant not in LOWER_VARIANTS:
        raise ValueError(f"Unknown lower bound variant {variant!r}, expected one of {LOWER_VARIANTS}")
    if not rho.valid:
        return LogValue(math.nan)
    log_prefactor = _log_one_minus_q_pow(consts, rho.t, 2 * consts.k)
    if log_prefactor == -math.inf:
        return LogValue(-math.inf)
    best_case = float(np.min(_pe_lower_log_candidates(consts, rho, variant)))
    return LogValue(log_prefactor - LOG_2PI + best_case)


def sr_lower(consts: InstanceConstants, rho: RhoBounds, variant: str = "split") -> LogValue:
    return LogValue(pe_lower(consts, rho, variant).log_magnitude + math.log(consts.delta_min))


def cr_upper(consts: InstanceConstants, rho: RhoBounds) -> float:
    if not rho.valid:
        return math.nan
    t = rho.t
    gaps = np.array([consts.gaps[i] for i in rho.arms])
    allocated = float(np.sum(gaps * rho.rho_upper)) / (1.0 + rho.sum_lower) * t
    return allocated + consts.k * float(np.sum(gaps)) * q_fn(consts, 0.75 * t) * t


def cr_rate_limit(consts: InstanceConstants) -> float:
    """lim R_t / t"""
    others = consts.others
    sig_sum = sum(consts.stds[i] for i in others)
    den = consts.sigma_best / consts.second_gap + sum(consts.stds[i] / consts.gaps[i] for i in others)
    return sig_sum / den


@dataclasses.dataclass(frozen=True)
class BoundSet:
    """Every bound evaluated at one round"""

    t: float
    rho: RhoBounds
    alpha_lower: np.ndarray
    alpha_upper: np.ndarray
    pe_upper: LogValue
    pe_lower: LogValue
    sr_upper: LogValue
    sr_lower: LogValue
    cr_upper: float
    confidence: float
    vacuous: bool

    @property
    def valid(self) -> bool:
        return self.rho.valid


def evaluate_bounds(
    consts: InstanceConstants,
    t: float,
    defect_terms: bool = True,
    lower_variant: str = "split",
) -> BoundSet:
    rho = rho_bound_set(consts, t)
    alpha = alpha_bounds(consts, rho)
    vacuous = q_fn(consts, 0.75 * t) >= 1.0
    if vacuous:
        LOG.debug("Confidence prefactor is vacuous at t=%s", t)
    return BoundSet(
        t=t,
        rho=rho,
        alpha_lower=alpha.lower,
        alpha_upper=alpha.upper,
        pe_upper=pe_upper(consts, rho, defect_terms),
        pe_lower=pe_lower(consts, rho, lower_variant),
        sr_upper=sr_upper(consts, rho, defect_terms),
        sr_lower=sr_lower(consts, rho, lower_variant),
        cr_upper=cr_upper(consts, rho),
        confidence=confidence(consts, t),
        vacuous=vacuous,
    )


def bound_curves(
    consts: InstanceConstants,
    t_grid: Iterable[float],
    defect_terms: bool = True,
    lower_variant: str = "split",
) -> List[BoundSet]:
    return [evaluate_bounds(consts, t, defect_terms, lower_variant) for t in t_grid]


def pairwise_ratio(consts: InstanceConstants, i1: int, i2: int) -> float:
    """lim N_i1 / N_i2 for two non-best arms"""
    if consts.best in (i1, i2):
        raise ValueError("Pairwise ratios are only defined between non-best arms")
    return consts.stds[i1] / consts.stds[i2] * consts.gaps[i2] / consts.gaps[i1]


@dataclasses.dataclass(frozen=True)
class AsymptoticProfile:
    """Where the allocation, regret and bound rates settle as t grows"""

    arms: Tuple[int, ...]
    ratio_to_best: np.ndarray
    alpha_limits: np.ndarray
    cr_rate: float
    pe_upper_rate: float
    pe_lower_rate: float

    def ratio(self, arm: int) -> float:
        return float(self.ratio_to_best[self.arms.index(arm)])

    def pairwise_consistent(self, consts: InstanceConstants, rel_tol: float = 1e-12) -> bool:
        for a, i1 in enumerate(self.arms):
            for b, i2 in enumerate(self.arms):
                expected = pairwise_ratio(consts, i1, i2)
                got = self.ratio_to_best[a] / self.ratio_to_best[b]
                if not math.isclose(got, expected, rel_tol=rel_tol):
                    return False
        return True


def asymptotic_profile(consts: InstanceConstants) -> AsymptoticProfile:
    others = consts.others
    sig_b = consts.sigma_best
    delta = consts.delta_min
    ratios = np.array([consts.stds[i] * consts.second_gap / (sig_b * consts.gaps[i]) for i in others])
    total = 1.0 + float(np.sum(ratios))

    alpha = np.empty(consts.k)
    alpha[consts.best] = 1.0 / total
    alpha[list(others)] = ratios / total

    # Exponents of the bound terms once both envelopes have met at the ratios above
    upper_rates = [delta**2 / (8.0 * sig_b**2 * total)]
    lower_rates = []
    for idx, i in enumerate(others):
        sig_i = consts.stds[i]
        margin = consts.gaps[i] - delta / 2.0
        upper_rates.append(margin**2 * ratios[idx] / (2.0 * sig_i**2 * total))
        lower_rates.append(
            delta**2 * ratios[idx] / (8.0 * sig_i**2 * total) + margin**2 / (2.0 * sig_b**2 * total)
        )

    return AsymptoticProfile(
        arms=others,
        ratio_to_best=ratios,
        alpha_limits=alpha,
        cr_rate=cr_rate_limit(consts),
        pe_upper_rate=min(upper_rates),
        pe_lower_rate=max(lower_rates),
    )


def _parse_alpha0(alpha0: Union[float, str, fractions.Fraction]) -> fractions.Fraction:
    if isinstance(alpha0, fractions.Fraction):
        return alpha0
    if isinstance(alpha0, float):
        # Read floats by their shortest decimal form so that 0.3 means 3/10
        return fractions.Fraction(repr(alpha0))
    try:
        return fractions.Fraction(alpha0)
    except (TypeError, ValueError, ZeroDivisionError) as e:
        raise ValueError(f"Can't read alpha0 from {alpha0!r}") from e


class FixedRateBounds(NamedTuple):
    lower: LogValue
    upper: LogValue
    # floor(alpha0 * n), the guaranteed pulls per arm
    min_pulls: int


def _fixed_rate_parts(
    consts: InstanceConstants, n: int, alpha0: Union[float, str, fractions.Fraction]
) -> Tuple[float, float, int]:
    alpha = _parse_alpha0(alpha0)
    if not 0 < alpha <= fractions.Fraction(1, consts.k):
        raise ValueError(f"alpha0 must lie in (0, 1/{consts.k}], got {alpha}")
    m = math.floor(alpha * n)
    if m < 1:
        raise ValueError(f"floor(alpha0 * n) = {m}, need at least one guaranteed pull per arm")

    delta = consts.delta_min
    sig_b = consts.sigma_best
    upper_terms = [
        math.log(math.sqrt(2.0) * sig_b / (math.sqrt(math.pi * m) * delta)) - delta**2 * m / (8.0 * sig_b**2)
    ]
    lower_candidates = []
    for i in consts.others:
        sig_i = consts.stds[i]
        margin = consts.gaps[i] - delta / 2.0
        upper_terms.append(
            math.log(sig_i / (math.sqrt(2.0 * math.pi * m) * margin)) - margin**2 * m / (2.0 * sig_i**2)
        )
        first = delta / (2.0 * math.sqrt(2.0 * math.pi) * sig_i * (1.0 + delta**2 * n / (4.0 * sig_i**2)))
        second = margin * m / (math.sqrt(2.0 * math.pi) * sig_b * (1.0 + margin**2 * n / sig_b**2))
        exponent = -(delta**2 / (8.0 * sig_i**2) + margin**2 / (2.0 * sig_b**2)) * n
        lower_candidates.append(math.log(first) + math.log(second) + exponent)
    return min(lower_candidates), float(logsumexp(upper_terms)), m


def fixed_rate_pe_bounds(
    consts: InstanceConstants, n: int, alpha0: Union[float, str, fractions.Fraction]
) -> FixedRateBounds:
    """
    PE bounds that hold whenever every arm is guaranteed floor(alpha0 * n) pulls

    `alpha0` may be a float, a Fraction or a "p/q" string. The floor is taken on
    the exact rational.
    """
    lower, upper, m = _fixed_rate_parts(consts, n, alpha0)
    return FixedRateBounds(LogValue(lower), LogValue(upper), m)


def fixed_rate_sr_bounds(
    consts: InstanceConstants, n: int, alpha0: Union[float, str, fractions.Fraction]
) -> FixedRateBounds:
    lower, upper, m = _fixed_rate_parts(consts, n, alpha0)
    return FixedRateBounds(
        LogValue(lower + math.log(consts.delta_min)),
        LogValue(upper + math.log(consts.delta_max)),
        m,
    )


__all__ = [
    "AlphaBounds",
    "AsymptoticProfile",
    "BoundSet",
    "FixedRateBounds",
    "RhoBounds",
    "RhoComponents",
    "RhoEnvelope",
    "alpha_bounds",
    "asymptotic_profile",
    "bound_curves",
    "confidence",
    "cr_rate_limit",
    "cr_upper",
    "evaluate_bounds",
    "fixed_rate_pe_bounds",
    "fixed_rate_sr_bounds",
    "pairwise_ratio",
    "pe_lower",
    "pe_upper",
    "q_fn",
    "rho_bound_set",
    "rho_bounds",
    "rho_components",
    "sr_lower",
    "sr_upper",
]
