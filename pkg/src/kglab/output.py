"""
CSV and SVG emitters

Column orders below are part of the file formats, don't reorder them.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import os
from typing import *

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .bounds import BoundSet
from .montecarlo import EstimateSeries, TransformedSeries
from .utils import format_float

ALPHA_COLUMNS = ("t", "arm", "alpha_hat", "alpha_stderr", "alpha_lower", "alpha_upper", "valid")
MEASURES_COLUMNS = (
    "t",
    "pe_hat",
    "pe_stderr",
    "pe_upper",
    "pe_lower",
    "sr_hat",
    "sr_stderr",
    "sr_upper",
    "sr_lower",
    "cr_hat",
    "cr_stderr",
    "cr_upper",
    "confidence",
    "vacuous",
)
TRANSFORMED_COLUMNS = (
    "t",
    "pe_rate",
    "pe_gap",
    "sr_rate",
    "sr_gap",
    "cr_rate",
    "pe_rule_of_three_rate",
    "pe_upper_rate",
    "pe_lower_rate",
    "sr_upper_rate",
    "sr_lower_rate",
    "cr_upper_rate",
    "bound_valid",
    "bound_vacuous",
)
BOUNDS_COLUMNS = (
    "t",
    "valid",
    "vacuous",
    "confidence",
    "log_pe_upper",
    "log_pe_lower",
    "log_sr_upper",
    "log_sr_lower",
    "pe_upper_rate",
    "pe_lower_rate",
    "sr_upper_rate",
    "sr_lower_rate",
    "cr_upper",
    "cr_upper_rate",
)
BOUNDS_ALPHA_COLUMNS = ("t", "arm", "rho_lower", "rho_upper", "alpha_lower", "alpha_upper", "valid")

CELL_TYPE = Union[None, bool, int, float, str, np.generic]


def format_cell(val: CELL_TYPE) -> str:
    if isinstance(val, (bool, np.bool_)):
        return "1" if val else "0"
    if isinstance(val, (int, np.integer)):
        return str(int(val))
    if isinstance(val, str):
        return val
    return format_float(val)


def emit_csv(
    path: Union[str, os.PathLike], header: Sequence[str], rows: Iterable[Sequence[CELL_TYPE]]
) -> None:
    """Write a header row plus `rows`, every cell formatted deterministically"""
    with open(path, "w", newline="", encoding="utf8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"Row has {len(row)} cells but the header has {len(header)}")
            writer.writerow([format_cell(x) for x in row])


def _check_bounds_match(series: EstimateSeries, bounds: Optional[Sequence[BoundSet]]) -> None:
    if bounds is not None and [b.t for b in bounds] != list(series.checkpoint_rounds):
        raise ValueError("Bounds must be evaluated at the series' checkpoints")


def alpha_rows(series: EstimateSeries, bounds: Optional[Sequence[BoundSet]] = None) -> Iterator[tuple]:
    _check_bounds_match(series, bounds)
    for c, t in enumerate(series.checkpoint_rounds):
        bound = bounds[c] if bounds is not None else None
        for arm in range(series.instance.k):
            yield (
                int(t),
                arm + 1,
                series.alpha_hat[c, arm],
                series.alpha_stderr[c, arm],
                bound.alpha_lower[arm] if bound else None,
                bound.alpha_upper[arm] if bound else None,
                bound.valid if bound else None,
            )


def measures_rows(series: EstimateSeries, bounds: Optional[Sequence[BoundSet]] = None) -> Iterator[tuple]:
    _check_bounds_match(series, bounds)
    for c, t in enumerate(series.checkpoint_rounds):
        bound = bounds[c] if bounds is not None else None
        yield (
            int(t),
            series.pe_hat[c],
            series.pe_stderr[c],
            bound.pe_upper.value if bound else None,
            bound.pe_lower.value if bound else None,
            series.sr_hat[c],
            series.sr_stderr[c],
            bound.sr_upper.value if bound else None,
            bound.sr_lower.value if bound else None,
            series.cr_hat[c],
            series.cr_stderr[c],
            bound.cr_upper if bound else None,
            bound.confidence if bound else None,
            bound.vacuous if bound else None,
        )


def transformed_rows(transformed: TransformedSeries) -> Iterator[tuple]:
    tb = transformed.bounds
    rule = transformed.pe_rule_of_three_rate
    for c, t in enumerate(transformed.checkpoint_rounds):
        yield (
            int(t),
            transformed.pe_rate[c],
            transformed.pe_gap[c],
            transformed.sr_rate[c],
            transformed.sr_gap[c],
            transformed.cr_rate[c],
            rule[c] if rule is not None else None,
            tb.pe_upper_rate[c] if tb else None,
            tb.pe_lower_rate[c] if tb else None,
            tb.sr_upper_rate[c] if tb else None,
            tb.sr_lower_rate[c] if tb else None,
            tb.cr_upper_rate[c] if tb else None,
            tb.valid[c] if tb else None,
            tb.vacuous[c] if tb else None,
        )


def _rate(log_val: float, t: float) -> Optional[float]:
    rate = -log_val / t
    return rate if np.isfinite(rate) else None


def bounds_rows(bounds: Sequence[BoundSet]) -> Iterator[tuple]:
    for b in bounds:
        yield (
            int(b.t),
            b.valid,
            b.vacuous,
            b.confidence,
            b.pe_upper.log_magnitude,
            b.pe_lower.log_magnitude,
            b.sr_upper.log_magnitude,
            b.sr_lower.log_magnitude,
            _rate(b.pe_upper.log_magnitude, b.t),
            _rate(b.pe_lower.log_magnitude, b.t),
            _rate(b.sr_upper.log_magnitude, b.t),
            _rate(b.sr_lower.log_magnitude, b.t),
            b.cr_upper,
            b.cr_upper / b.t,
        )


def bounds_alpha_rows(bounds: Sequence[BoundSet]) -> Iterator[tuple]:
    for b in bounds:
        for arm in range(len(b.alpha_lower)):
            if arm in b.rho.arms:
                env = b.rho.for_arm(arm)
                rho_lower, rho_upper = env.rho_lower, env.rho_upper
            else:
                rho_lower = rho_upper = None
            yield (int(b.t), arm + 1, rho_lower, rho_upper, b.alpha_lower[arm], b.alpha_upper[arm], b.valid)


class CurveStyle(enum.Enum):
    ESTIMATE = enum.auto()
    BOUND = enum.auto()


@dataclasses.dataclass
class CurveSpec:
    label: str
    x: np.ndarray
    y: np.ndarray
    style: CurveStyle = CurveStyle.ESTIMATE
    # Points to leave out (gap flags, undefined bounds)
    omit: Optional[np.ndarray] = None
    color: Optional[str] = None

    def plotted_y(self) -> np.ndarray:
        y = np.array(self.y, dtype=np.float64)
        if self.omit is not None:
            y[np.asarray(self.omit, dtype=bool)] = np.nan
        return y


@dataclasses.dataclass
class FigureSpec:
    """What goes into one figure and where its CSV / SVG end up"""

    title: str
    x_label: str
    y_label: str
    curves: List[CurveSpec] = dataclasses.field(default_factory=list)
    x_scale: str = "log"
    y_scale: str = "linear"
    csv_path: Optional[str] = None
    svg_path: Optional[str] = None


_ESTIMATE_COLOR = "tab:blue"
_BOUND_COLOR = "black"


def emit_svg(path: Union[str, os.PathLike], spec: FigureSpec) -> None:
    """Render `spec` as a standalone SVG line chart, bounds dashed"""
    # Fixed hash salt and no date keep the SVG stable between runs
    with matplotlib.rc_context({"svg.hashsalt": "kglab", "svg.fonttype": "none"}):
        fig = Figure(figsize=(7.0, 4.5))
        FigureCanvasSVG(fig)
        ax = fig.add_subplot(1, 1, 1)
        ax.set_title(spec.title)
        ax.set_xlabel(spec.x_label)
        ax.set_ylabel(spec.y_label)
        ax.set_xscale(spec.x_scale)
        ax.set_yscale(spec.y_scale)
        labelled = False
        for curve in spec.curves:
            x = np.asarray(curve.x, dtype=np.float64)
            if not len(x):
                continue
            if curve.style == CurveStyle.BOUND:
                style = dict(linestyle="--", color=curve.color or _BOUND_COLOR, linewidth=1.0)
            else:
                style = dict(linestyle="-", color=curve.color or _ESTIMATE_COLOR, linewidth=1.5)
            ax.plot(x, curve.plotted_y(), label=curve.label, **style)
            labelled = True
        if labelled:
            ax.legend(loc="best", fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})


__all__ = [
    "ALPHA_COLUMNS",
    "BOUNDS_ALPHA_COLUMNS",
    "BOUNDS_COLUMNS",
    "CurveSpec",
    "CurveStyle",
    "FigureSpec",
    "MEASURES_COLUMNS",
    "TRANSFORMED_COLUMNS",
    "alpha_rows",
    "bounds_alpha_rows",
    "bounds_rows",
    "emit_csv",
    "emit_svg",
    "format_cell",
    "measures_rows",
    "transformed_rows",
]
