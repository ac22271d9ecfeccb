"""
Assembly of the sampling-rate, PE / SR / CR and bounds-only figures
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import *

import numpy as np

from .bounds import BoundSet, bound_curves
from .config import ExperimentConfig, FigureKind
from .instances import InstanceConstants
from .montecarlo import (
    EstimateSeries,
    TransformedSeries,
    estimate_transforms,
    run_replications,
    transform_bounds,
)
from .output import (
    ALPHA_COLUMNS,
    BOUNDS_ALPHA_COLUMNS,
    BOUNDS_COLUMNS,
    MEASURES_COLUMNS,
    TRANSFORMED_COLUMNS,
    CurveSpec,
    CurveStyle,
    FigureSpec,
    alpha_rows,
    bounds_alpha_rows,
    bounds_rows,
    emit_csv,
    emit_svg,
    measures_rows,
    transformed_rows,
)

LOG = logging.getLogger(__name__)

_ARM_COLORS = ("tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple", "tab:brown")


def default_figure_arms(consts: InstanceConstants) -> List[int]:
    """First non-best arm, the middle non-best arm and the best arm (0-based)"""
    others = consts.others
    picked = [others[0], others[len(others) // 2], consts.best]
    return list(dict.fromkeys(picked))


def simulate_with_bounds(
    config: ExperimentConfig, workers: Optional[int] = None
) -> Tuple[EstimateSeries, List[BoundSet]]:
    series = run_replications(
        config.instance,
        config.rounds,
        config.n0,
        config.replications,
        config.seed,
        checkpoints=config.checkpoint_rounds(),
        workers=workers,
    )
    bounds = bound_curves(config.instance.constants, [int(t) for t in series.checkpoint_rounds])
    return series, bounds


def sampling_rate_figure(
    series: EstimateSeries, bounds: Sequence[BoundSet], arms: Sequence[int]
) -> FigureSpec:
    rounds = series.checkpoint_rounds.astype(np.float64)
    valid = np.array([b.valid for b in bounds], dtype=bool)
    spec = FigureSpec(
        title=f"Sampling rates, {series.instance.label or 'custom instance'}",
        x_label="t",
        y_label="sampling rate",
    )
    for pos, arm in enumerate(arms):
        color = _ARM_COLORS[pos % len(_ARM_COLORS)]
        spec.curves.append(CurveSpec(f"arm {arm + 1}", rounds, series.alpha_hat[:, arm], color=color))
        for side in ("lower", "upper"):
            values = np.array([getattr(b, f"alpha_{side}")[arm] for b in bounds])
            spec.curves.append(
                CurveSpec(f"arm {arm + 1} {side}", rounds, values, CurveStyle.BOUND, omit=~valid, color=color)
            )
    return spec


_MEASURE_LABELS = {
    FigureKind.PE: "-log(PE) / t",
    FigureKind.SR: "-log(SR) / t",
    FigureKind.CR: "CR / t",
}


def measure_figure(kind: FigureKind, transformed: TransformedSeries, title: str) -> FigureSpec:
    if kind not in _MEASURE_LABELS:
        raise ValueError(f"{kind.value} is not a performance measure figure")
    rounds = transformed.checkpoint_rounds
    spec = FigureSpec(title=title, x_label="t", y_label=_MEASURE_LABELS[kind])
    tb = transformed.bounds
    undefined = ~tb.valid if tb is not None else None
    if kind == FigureKind.CR:
        spec.curves.append(CurveSpec("empirical", rounds, transformed.cr_rate))
        if tb is not None:
            spec.curves.append(
                CurveSpec("upper bound", rounds, tb.cr_upper_rate, CurveStyle.BOUND, undefined)
            )
        return spec

    name = kind.value
    rate = getattr(transformed, f"{name}_rate")
    spec.curves.append(CurveSpec("empirical", rounds, rate, omit=getattr(transformed, f"{name}_gap")))
    if tb is not None:
        # An upper bound on the measure is a lower bound on its rate and vice versa
        for side in ("upper", "lower"):
            bound_rate = getattr(tb, f"{name}_{side}_rate")
            curve = CurveSpec(f"from {side} bound", rounds, bound_rate, CurveStyle.BOUND, undefined)
            spec.curves.append(curve)
    return spec


def bounds_only_figure(bounds: Sequence[BoundSet], title: str) -> FigureSpec:
    tb = transform_bounds(bounds)
    undefined = ~tb.valid
    spec = FigureSpec(title=title, x_label="t", y_label="-log(bound) / t")
    rounds = tb.checkpoint_rounds
    spec.curves.append(CurveSpec("PE upper bound", rounds, tb.pe_upper_rate, CurveStyle.BOUND, undefined))
    spec.curves.append(CurveSpec("PE lower bound", rounds, tb.pe_lower_rate, CurveStyle.BOUND, undefined))
    return spec


def write_simulation(
    config: ExperimentConfig,
    series: EstimateSeries,
    bounds: Sequence[BoundSet],
    rule_of_three: bool = False,
    stem: str = "",
) -> List[Path]:
    """Write the measures, transformed measures and alpha CSVs for a simulated series"""
    out_dir = config.outputs
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = f"{stem}_" if stem else ""
    transformed = estimate_transforms(series, bounds, rule_of_three=rule_of_three)
    paths = [
        out_dir / f"{prefix}measures.csv",
        out_dir / f"{prefix}measures_transformed.csv",
        out_dir / f"{prefix}alpha.csv",
    ]
    emit_csv(paths[0], MEASURES_COLUMNS, measures_rows(series, bounds))
    emit_csv(paths[1], TRANSFORMED_COLUMNS, transformed_rows(transformed))
    emit_csv(paths[2], ALPHA_COLUMNS, alpha_rows(series, bounds))
    return paths


def _emit_bounds(out_dir: Path, stem: str, bounds: Sequence[BoundSet]) -> List[Path]:
    paths = [out_dir / f"{stem}.csv", out_dir / f"{stem}_alpha.csv"]
    emit_csv(paths[0], BOUNDS_COLUMNS, bounds_rows(bounds))
    emit_csv(paths[1], BOUNDS_ALPHA_COLUMNS, bounds_alpha_rows(bounds))
    return paths


def write_bounds(config: ExperimentConfig, stem: str = "bounds") -> List[Path]:
    """Evaluate every bound on the config's t grid, write bounds.csv and bounds_alpha.csv"""
    bounds = bound_curves(config.instance.constants, config.bound_grid())
    config.outputs.mkdir(parents=True, exist_ok=True)
    return _emit_bounds(config.outputs, stem, bounds)


def write_figure(
    config: ExperimentConfig, workers: Optional[int] = None, rule_of_three: bool = False
) -> List[Path]:
    """Simulate if needed, then write the figure's CSV(s) and SVG"""
    out_dir = config.outputs
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"figure_{config.kind.value}"
    consts = config.instance.constants
    label = config.instance.label or "custom instance"

    if config.kind == FigureKind.BOUNDS_ONLY:
        bounds = bound_curves(consts, config.bound_grid())
        paths = _emit_bounds(out_dir, stem, bounds)
        spec = bounds_only_figure(bounds, f"Bounds, {label}")
    else:
        series, bounds = simulate_with_bounds(config, workers)
        if config.kind == FigureKind.SAMPLING_RATES:
            paths = [out_dir / f"{stem}.csv"]
            emit_csv(paths[0], ALPHA_COLUMNS, alpha_rows(series, bounds))
            arms = default_figure_arms(consts) if config.arms is None else [a - 1 for a in config.arms]
            spec = sampling_rate_figure(series, bounds, arms)
        else:
            transformed = estimate_transforms(series, bounds, rule_of_three=rule_of_three)
            paths = [out_dir / f"{stem}.csv", out_dir / f"{stem}_transformed.csv"]
            emit_csv(paths[0], MEASURES_COLUMNS, measures_rows(series, bounds))
            emit_csv(paths[1], TRANSFORMED_COLUMNS, transformed_rows(transformed))
            spec = measure_figure(config.kind, transformed, f"{config.kind.value.upper()}, {label}")

    svg_path = out_dir / f"{stem}.svg"
    spec.csv_path = str(paths[0])
    spec.svg_path = str(svg_path)
    emit_svg(svg_path, spec)
    LOG.info("Wrote %s", ", ".join(str(p) for p in paths + [svg_path]))
    return paths + [svg_path]


__all__ = [
    "bounds_only_figure",
    "default_figure_arms",
    "measure_figure",
    "sampling_rate_figure",
    "simulate_with_bounds",
    "write_bounds",
    "write_figure",
    "write_simulation",
]
