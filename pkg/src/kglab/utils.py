import math
import os
from typing import *

THREADS_ENV_VAR = "KG_LAB_THREADS"


def worker_count(environ: Optional[Mapping[str, str]] = None) -> int:
    """
    How many worker threads replication jobs may use

    Read from `KG_LAB_THREADS`, where unset or 0 means one per CPU. Only affects
    scheduling, never results.
    """
    if environ is None:
        environ = os.environ
    raw = environ.get(THREADS_ENV_VAR, "").strip()
    requested = 0
    if raw:
        try:
            requested = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None
        if requested < 0:
            raise ValueError(f"{THREADS_ENV_VAR} can't be negative, got {requested}")
    if requested == 0:
        return os.cpu_count() or 1
    return requested


# Below this magnitude numbers are always written in scientific notation
SCIENTIFIC_BELOW = 1e-4


def format_float(val: Optional[float]) -> str:
    """Deterministic text form for CSV cells, NaN and None become empty cells"""
    if val is None:
        return ""
    val = float(val)
    if math.isnan(val):
        return ""
    if math.isinf(val):
        return "inf" if val > 0 else "-inf"
    if val != 0.0 and abs(val) < SCIENTIFIC_BELOW:
        return "%.12e" % val
    return "%.12g" % val


__all__ = [
    "THREADS_ENV_VAR",
    "format_float",
    "worker_count",
]
