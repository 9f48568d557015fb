"""Turn a sweep results CSV into the headline figures.

One figure per distinct skew bound (``delta_O_i``) found in the CSV:
measured gamma against the clock-offset spread, one series per
tie-breaking rule, with the 0.5 coin-flip baseline and the analytic
upper bound overlaid.  The bound is recomputed from each row's own
parameters so a stale or corrupted bound column can never leak into a
figure.

This package deliberately does not import the simulator; the CSV schema
is the entire contract between the two.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be fixed first)

#: Columns the figures cannot be drawn without.
REQUIRED_COLUMNS: Tuple[str, ...] = (
    "rule",
    "delta_O_i",
    "delta_B_i",
    "T_seconds",
    "offset_std",
    "gamma_mean",
)

#: Optional column: error bars are drawn when it is present and filled.
STDERR_COLUMN = "gamma_stderr"

IMAGE_FORMATS: Tuple[str, ...] = ("svg", "png")

Row = Dict[str, str]


class SchemaError(ValueError):
    """The CSV header lacks columns the figures need."""

    def __init__(self, missing: Sequence[str]):
        self.missing = tuple(missing)
        super().__init__("missing required columns: " + ", ".join(self.missing))


class EmptyFilterError(ValueError):
    """A filter matched no CSV rows."""


@dataclass(frozen=True)
class FigureSpec:
    """Everything needed to draw one figure."""

    csv_path: str
    delta_o: float
    out_path: str
    image_format: str = "svg"

    def __post_init__(self) -> None:
        if self.image_format not in IMAGE_FORMATS:
            raise ValueError(
                f"image_format must be one of {IMAGE_FORMATS}, "
                f"got {self.image_format!r}")


@dataclass(frozen=True)
class RuleSeries:
    """One plotted line: a rule's gamma across the offset-std sweep."""

    rule: str
    offset_std: Tuple[float, ...]
    gamma: Tuple[float, ...]
    stderr: Optional[Tuple[float, ...]]


def gamma_upper_bound(delta_o: float, delta_b: float,
                      mean_interval: float) -> float:
    """Closed-form ceiling on gamma for the given bounds and block rate."""
    return 0.5 - 0.5 * math.exp(-(2.0 * delta_o + 3.0 * delta_b)
                                / mean_interval)


def load_rows(csv_path: str) -> List[Row]:
    """Read the CSV, failing loudly if required columns are absent."""
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or ()
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(missing)
        return list(reader)


def delta_o_groups(rows: Sequence[Row]) -> List[float]:
    """Distinct skew-bound values present, ascending — one figure each."""
    return sorted({float(r["delta_O_i"]) for r in rows})


def series_for(rows: Sequence[Row], delta_o: float,
               ) -> Tuple[List[RuleSeries], Tuple[float, ...],
                          Tuple[float, ...]]:
    """Extract the plottable series for one skew-bound group.

    Returns (per-rule series, bound_x, bound_y).  This is the pure part
    of rendering: identical CSV bytes always produce identical values
    here, whatever the image encoder later does with metadata.
    """
    subset = [r for r in rows if float(r["delta_O_i"]) == delta_o]
    if not subset:
        raise EmptyFilterError(f"no rows with delta_O_i == {delta_o:g}")

    have_stderr = all(r.get(STDERR_COLUMN) not in (None, "")
                      for r in subset)
    series: List[RuleSeries] = []
    for rule in sorted({r["rule"] for r in subset}):
        cells = sorted((r for r in subset if r["rule"] == rule),
                       key=lambda r: float(r["offset_std"]))
        series.append(RuleSeries(
            rule=rule,
            offset_std=tuple(float(r["offset_std"]) for r in cells),
            gamma=tuple(float(r["gamma_mean"]) for r in cells),
            stderr=tuple(float(r[STDERR_COLUMN]) for r in cells)
            if have_stderr else None,
        ))

    by_std: Dict[float, Row] = {}
    for r in subset:
        by_std.setdefault(float(r["offset_std"]), r)
    bound_x = tuple(sorted(by_std))
    bound_y = tuple(
        gamma_upper_bound(float(by_std[x]["delta_O_i"]),
                          float(by_std[x]["delta_B_i"]),
                          float(by_std[x]["T_seconds"]))
        for x in bound_x)
    return series, bound_x, bound_y


def render(spec: FigureSpec) -> Path:
    """Draw one figure and write it to spec.out_path."""
    rows = load_rows(spec.csv_path)
    series, bound_x, bound_y = series_for(rows, spec.delta_o)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for s in series:
        ax.errorbar(s.offset_std, s.gamma, yerr=s.stderr, marker="o",
                    capsize=3, label=f"{s.rule} rule")
    ax.axhline(0.5, linestyle=":", color="gray", linewidth=1.2,
               label="coin-flip baseline (0.5)")
    ax.plot(bound_x, bound_y, linestyle="--", color="black", linewidth=1.2,
            label="analytic upper bound")
    ax.set_xlabel("clock-offset std (s)")
    ax.set_ylabel("γ (honest hashrate following the adversary)")
    ax.set_title(f"γ vs clock-offset spread — skew bound {spec.delta_o:g} s")
    ax.set_ylim(bottom=0.0)
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()

    out = Path(spec.out_path)
    fig.savefig(out, format=spec.image_format)
    plt.close(fig)
    return out


def render_all(csv_path: str, out_dir: str,
               image_format: str = "svg") -> List[Path]:
    """One figure per skew-bound group in the CSV; returns written paths."""
    rows = load_rows(csv_path)
    groups = delta_o_groups(rows)
    if not groups:
        raise EmptyFilterError("CSV has a valid header but no data rows")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for value in groups:
        name = f"gamma_vs_offset_std_skew_{value:g}s.{image_format}"
        written.append(render(FigureSpec(
            csv_path=csv_path, delta_o=value,
            out_path=str(out / name), image_format=image_format)))
    return written
