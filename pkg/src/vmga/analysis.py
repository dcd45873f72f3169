"""Pearson correlation analysis and comparison reporting (CSV + SVG)."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .datacenter import CSV_HEADER, JOULES_PER_KWH, MetricsReport, check_placement, power_watts
from .trace import FeatureMatrix


def _unit(d: np.ndarray):
    # Pre-scale so squaring tiny deviations cannot underflow to zero.
    peak = float(np.max(np.abs(d)))
    if peak == 0:
        return None
    d = d / peak
    return d / math.sqrt(float(np.dot(d, d)))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson r of two equal-length sequences; NaN when either is constant.

    Computed on unit-normalized deviations as ``1 - |u - v|^2 / 2`` (or the
    mirrored form for negative r), which equals the textbook ratio but keeps
    exactly affine-related inputs at exactly +/-1.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 1 or ya.ndim != 1:
        raise ValueError("pearson expects 1-D sequences")
    if xa.shape != ya.shape:
        raise ValueError(f"length mismatch: {xa.size} vs {ya.size}")
    if xa.size < 2:
        raise ValueError("pearson needs at least two observations")
    if np.ptp(xa) == 0 or np.ptp(ya) == 0:
        return math.nan
    u = _unit(xa - xa.mean())
    v = _unit(ya - ya.mean())
    if u is None or v is None:
        return math.nan
    if float(np.dot(u, v)) >= 0:
        r = 1.0 - 0.5 * float(np.dot(u - v, u - v))
    else:
        r = 0.5 * float(np.dot(u + v, u + v)) - 1.0
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class CorrelationMatrix:
    row_names: tuple[str, ...]
    col_names: tuple[str, ...]
    values: np.ndarray  # NaN marks an undefined cell

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", *self.col_names])
            for name, row in zip(self.row_names, self.values):
                w.writerow([name, *("" if math.isnan(v) else repr(float(v)) for v in row)])


def correlation_matrix(features: FeatureMatrix, targets: FeatureMatrix | None = None) -> CorrelationMatrix:
    """Pearson r of every feature column against every target column.

    With ``targets`` omitted the features are correlated with themselves.
    """
    targets = features if targets is None else targets
    if features.row_count != targets.row_count:
        raise ValueError("features and targets must have the same number of rows")
    vals = np.empty((len(features.names), len(targets.names)))
    for i in range(len(features.names)):
        for j in range(len(targets.names)):
            vals[i, j] = pearson(features.values[:, i], targets.values[:, j])
    return CorrelationMatrix(features.names, targets.names, vals)


def ramp_color(r: float) -> str:
    """Blue at -1, white at 0, red at +1; gray when undefined."""
    if math.isnan(r):
        return "#bfbfbf"
    r = min(1.0, max(-1.0, r))
    if r >= 0:
        g = round(255 * (1 - r))
        return f"#ff{g:02x}{g:02x}"
    g = round(255 * (1 + r))
    return f"#{g:02x}{g:02x}ff"


_CELL = 56
_FONT = 'font-family="DejaVu Sans, Arial, sans-serif"'


def export_heatmap_svg(matrix: CorrelationMatrix, path, title: str = "Correlation matrix") -> None:
    """Write an annotated correlation heatmap as standalone SVG 1.1."""
    rows, cols = len(matrix.row_names), len(matrix.col_names)
    left = 12 + 7 * max((len(n) for n in matrix.row_names), default=4)
    top = 40 + 7 * max((len(n) for n in matrix.col_names), default=4)
    width = left + cols * _CELL + 20
    height = top + rows * _CELL + 20
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14" {_FONT}>{escape(title)}</text>',
    ]
    for j, name in enumerate(matrix.col_names):
        x = left + j * _CELL + _CELL / 2
        out.append(
            f'<text x="{x:.1f}" y="{top - 6}" font-size="11" {_FONT} '
            f'transform="rotate(-60 {x:.1f} {top - 6})">{escape(name)}</text>'
        )
    for i, name in enumerate(matrix.row_names):
        y = top + i * _CELL + _CELL / 2
        out.append(
            f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end" font-size="11" {_FONT}>{escape(name)}</text>'
        )
        for j in range(cols):
            r = float(matrix.values[i, j])
            x0 = left + j * _CELL
            y0 = top + i * _CELL
            label = "n/a" if math.isnan(r) else "%.2f" % r
            out.append(
                f'<rect x="{x0}" y="{y0}" width="{_CELL}" height="{_CELL}" fill="{ramp_color(r)}" '
                f'stroke="#ffffff" stroke-width="1"/>'
            )
            out.append(
                f'<text x="{x0 + _CELL / 2:.1f}" y="{y0 + _CELL / 2 + 4:.1f}" text-anchor="middle" '
                f'font-size="11" {_FONT}>{label}</text>'
            )
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class ComparisonRow:
    strategy: str
    metrics: MetricsReport
    runs_averaged: int = 1
    wall_time_s: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.runs_averaged < 1:
            raise ValueError("runs_averaged must be >= 1")


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[ComparisonRow, ...]

    def row(self, strategy: str) -> ComparisonRow:
        for r in self.rows:
            if r.strategy == strategy:
                return r
        raise KeyError(strategy)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in self.rows:
                w.writerow(r.metrics.csv_row(r.strategy))


# (CSV column, MetricsReport attribute, chart title)
METRIC_CHARTS = (
    ("energy_kwh", "energy_kwh", "Energy consumption (kWh)"),
    ("sla_pct", "sla_violation_pct", "SLA violations (%)"),
    ("migrations", "migrations", "VM migrations"),
    ("exec_time_s", "exec_time_s", "Execution time proxy (s)"),
    ("active_pms", "active_pms", "Active PMs"),
)

_PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860")


def bar_chart_svg(labels: Sequence[str], values: Sequence[float], title: str, path) -> None:
    """One bar per strategy, value printed above each bar."""
    bar_w, gap, top, bottom, left = 70, 30, 50, 50, 60
    plot_h = 240
    width = left + len(labels) * (bar_w + gap) + gap
    height = top + plot_h + bottom
    vmax = max((float(v) for v in values), default=0.0)
    scale = plot_h / vmax if vmax > 0 else 0.0
    base = top + plot_h
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="14" {_FONT}>{escape(title)}</text>',
        f'<line x1="{left - 10}" y1="{base}" x2="{width - 10}" y2="{base}" stroke="#333333"/>',
    ]
    for k, (label, v) in enumerate(zip(labels, values)):
        v = float(v)
        h = v * scale
        x = left + k * (bar_w + gap)
        out.append(
            f'<rect x="{x}" y="{base - h:.3f}" width="{bar_w}" height="{h:.3f}" '
            f'fill="{_PALETTE[k % len(_PALETTE)]}"/>'
        )
        out.append(
            f'<text x="{x + bar_w / 2:.1f}" y="{base - h - 6:.3f}" text-anchor="middle" '
            f'font-size="11" {_FONT}>{"%.4g" % v}</text>'
        )
        out.append(
            f'<text x="{x + bar_w / 2:.1f}" y="{base + 18}" text-anchor="middle" '
            f'font-size="12" {_FONT}>{escape(label)}</text>'
        )
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def comparison_report(results: Sequence[tuple], out_dir, prefix: str = "comparison") -> ComparisonTable:
    """Write ``<prefix>.csv`` and one ``<prefix>_<metric>.svg`` bar chart per metric.

    ``results`` holds ``(strategy, MetricsReport, runs)`` tuples or ready
    :class:`ComparisonRow` objects.
    """
    if not results:
        raise ValueError("comparison_report needs at least one result row")
    rows = tuple(r if isinstance(r, ComparisonRow) else ComparisonRow(r[0], r[1], int(r[2])) for r in results)
    table = ComparisonTable(rows)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / f"{prefix}.csv")
    labels = [r.strategy for r in rows]
    for col, attr, title in METRIC_CHARTS:
        bar_chart_svg(labels, [getattr(r.metrics, attr) for r in rows], title, out / f"{prefix}_{col}.svg")
    return table


TARGET_COLUMNS = ("sla_violation_pct", "vm_migrations", "exec_time_s", "energy_kwh")


def per_vm_targets(instance, placement, previous=None) -> FeatureMatrix:
    """Attribute placement outcomes to individual VMs for correlation analysis.

    Each VM gets its host's SLA state (100 or 0), whether it moved relative
    to ``previous``, its host's makespan proxy and a CPU-share of its host's
    energy (an equal share when the host carries no CPU load).
    """
    arr = check_placement(placement, instance)
    m = instance.n_pms
    load = np.bincount(arr, weights=instance.cpu_demand, minlength=m)
    work = np.bincount(arr, weights=instance.work, minlength=m)
    count = np.bincount(arr, minlength=m)
    util = load / instance.cpu_capacity
    host_kwh = np.array([
        power_watts(pm, util[j], bool(count[j])) * instance.horizon / JOULES_PER_KWH
        for j, pm in enumerate(instance.pms)
    ])
    host = arr
    share = np.where(load[host] > 0, instance.cpu_demand / np.where(load[host] > 0, load[host], 1.0),
                     1.0 / count[host])
    moved = np.zeros(arr.size) if previous is None else (np.asarray(previous) != arr).astype(float)
    return FeatureMatrix.from_columns({
        "sla_violation_pct": np.where(util[host] > instance.sla_threshold, 100.0, 0.0),
        "vm_migrations": moved,
        "exec_time_s": work[host] / instance.cpu_capacity[host],
        "energy_kwh": host_kwh[host] * share,
    })
