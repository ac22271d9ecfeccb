"""
Standard normal helpers and the f(x) = x*Phi(x) + phi(x) kernel behind the knowledge gradient

This module owns all Gaussian tail arithmetic. Anything that can underflow
(acquisition values of well separated arms, bound terms at huge t) is handed
around as a log magnitude instead of a plain float.
"""

from __future__ import annotations

import math
from typing import *

import numpy as np
from scipy import special

ArrayLike = Union[float, np.ndarray]

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_HALF_PI = math.sqrt(math.pi / 2.0)

# f(-x) is evaluated directly up to here, in log space beyond.
DIRECT_LIMIT = 8.0
# Past this point the asymptotic Mills series is more accurate than 1 - x*R(x).
SERIES_LIMIT = 30.0
# (2n+1)!! with alternating signs, n = 1..8
_SERIES_COEFFS = (-3.0, 15.0, -105.0, 945.0, -10395.0, 135135.0, -2027025.0, 34459425.0)


class LogValue(NamedTuple):
    """Natural log of a nonnegative quantity, -inf encodes exactly zero"""

    log_magnitude: float

    @classmethod
    def from_value(cls, value: float) -> LogValue:
        if value < 0 or math.isnan(value):
            raise ValueError(f"LogValue can only carry nonnegative magnitudes, got {value!r}")
        if value == 0:
            return cls(-math.inf)
        return cls(math.log(value))

    @property
    def value(self) -> float:
        """Linear value, may underflow to 0.0"""
        if self.log_magnitude > 709.0:
            return math.inf
        return math.exp(self.log_magnitude)

    @property
    def is_zero(self) -> bool:
        return self.log_magnitude == -math.inf

    @property
    def is_defined(self) -> bool:
        return not math.isnan(self.log_magnitude)

    def rate(self, t: float) -> float:
        """The -(1/t) log(value) transform used for PE / SR curves"""
        return -self.log_magnitude / t

    def scaled(self, factor: float) -> LogValue:
        return LogValue(self.log_magnitude + math.log(factor))


def _as_checked_array(x: ArrayLike) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if np.isnan(arr).any():
        raise ValueError("NaN passed to a normal helper")
    return arr


def _unwrap(arr: np.ndarray, like: ArrayLike) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(arr)
    return arr


def norm_pdf(x: ArrayLike) -> ArrayLike:
    arr = _as_checked_array(x)
    return _unwrap(np.exp(-0.5 * arr * arr - LOG_SQRT_2PI), x)


def norm_log_pdf(x: ArrayLike) -> ArrayLike:
    arr = _as_checked_array(x)
    return _unwrap(-0.5 * arr * arr - LOG_SQRT_2PI, x)


def norm_cdf(x: ArrayLike) -> ArrayLike:
    """Phi(x). Underflows to 0 somewhere below -37, use `norm_cdf_log()` out there."""
    arr = _as_checked_array(x)
    return _unwrap(special.ndtr(arr), x)


def norm_cdf_log(x: ArrayLike) -> ArrayLike:
    arr = _as_checked_array(x)
    return _unwrap(special.log_ndtr(arr), x)


def mills_ratio(x: ArrayLike) -> ArrayLike:
    """R(x) = Phi(-x) / phi(x), accurate far into the upper tail"""
    arr = _as_checked_array(x)
    return _unwrap(_SQRT_HALF_PI * special.erfcx(arr / math.sqrt(2.0)), x)


def f_kg(x: ArrayLike) -> ArrayLike:
    """f(x) = x*Phi(x) + phi(x), evaluated directly"""
    arr = _as_checked_array(x)
    return _unwrap(arr * special.ndtr(arr) + np.exp(-0.5 * arr * arr - LOG_SQRT_2PI), x)


def _series_log_correction(x: np.ndarray) -> np.ndarray:
    """log(1 + eps(x)) where f(-x) = phi(x) / x^2 * (1 + eps(x))"""
    u = 1.0 / (x * x)
    acc = np.zeros_like(x)
    for coeff in reversed(_SERIES_COEFFS):
        acc = (acc + coeff) * u
    return np.log1p(acc)


def log_f_neg_array(x: ArrayLike) -> np.ndarray:
    """Vectorized log f(-x) for x >= 0, finite for every finite x"""
    arr = _as_checked_array(x)
    if (arr < 0).any():
        raise ValueError("log_f_neg is only defined for nonnegative arguments")
    out = np.empty_like(arr)

    direct = arr <= DIRECT_LIMIT
    if direct.any():
        xd = arr[direct]
        out[direct] = np.log(f_kg(-xd))

    mid = (arr > DIRECT_LIMIT) & (arr <= SERIES_LIMIT)
    if mid.any():
        xm = arr[mid]
        # f(-x) = phi(x) * (1 - x*R(x)); rescale by x^2 to expose the same
        # log(phi) - 2 log(x) + log(1 + eps) shape as the series branch.
        scaled = xm * xm * (1.0 - xm * mills_ratio(xm))
        out[mid] = -0.5 * xm * xm - LOG_SQRT_2PI - 2.0 * np.log(xm) + np.log(scaled)

    far = arr > SERIES_LIMIT
    if far.any():
        xf = arr[far]
        out[far] = -0.5 * xf * xf - LOG_SQRT_2PI - 2.0 * np.log(xf) + _series_log_correction(xf)
    return out


def log_f_neg(x: float) -> LogValue:
    """log f(-x) for a single x >= 0"""
    if math.isnan(x):
        raise ValueError("NaN passed to log_f_neg")
    if x < 0:
        raise ValueError(f"log_f_neg is only defined for nonnegative arguments, got {x!r}")
    return LogValue(float(log_f_neg_array(np.array([x]))[0]))


class TailEnvelope(NamedTuple):
    lower: LogValue
    upper: LogValue


def f_neg_envelope(x: float) -> TailEnvelope:
    """(phi(x)/x^3, phi(x)/x^2), which strictly sandwich f(-x) for x >= 2"""
    if math.isnan(x) or x < 2:
        raise ValueError(f"The f(-x) envelope only holds for x >= 2, got {x!r}")
    log_pdf = -0.5 * x * x - LOG_SQRT_2PI
    log_x = math.log(x)
    return TailEnvelope(lower=LogValue(log_pdf - 3.0 * log_x), upper=LogValue(log_pdf - 2.0 * log_x))


__all__ = [
    "DIRECT_LIMIT",
    "LogValue",
    "TailEnvelope",
    "f_kg",
    "f_neg_envelope",
    "log_f_neg",
    "log_f_neg_array",
    "mills_ratio",
    "norm_cdf",
    "norm_cdf_log",
    "norm_log_pdf",
    "norm_pdf",
]
