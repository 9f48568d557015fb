"""Batch experiment driver.

Expands a sweep grid (rules x delta_o x offset_std x a_t) into simulation
cells, runs them (optionally in parallel), and writes:

* results.csv -- one row per cell, fixed column order (see CSV_COLUMNS);
* bounds.csv  -- the closed-form reference values per parameter combo;
* a plain-text summary table on stdout.

Reruns with the same base seed produce byte-identical CSV files. Cell seeds
are base_seed + cell_index, so cells are independent of --jobs.
"""
from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import yaml

from .adversary import (FixedOffset, HonestClock, TheoremOptimal,
                        TimestampStrategy)
from .core import LocalParams
from .engine import ConfigError, SimConfig, SimReport, run
from .forkchoice import RuleKind
from .metrics import expected_gamma_ideal, gamma_upper_bound

CSV_COLUMNS = [
    "rule", "n_honest", "T_seconds", "delta_B_i", "delta_O_i", "w",
    "offset_std", "ts_strategy", "a_t", "seed", "n_ties", "gamma_mean",
    "gamma_stderr", "theorem2_bound", "expected_gamma_ideal",
    "n_blocks_honest", "n_blocks_adversary",
]

BOUNDS_COLUMNS = [
    "delta_O_i", "delta_B_i", "T_seconds", "honest_T_seconds",
    "theorem2_bound", "expected_gamma_ideal",
]

VALID_RULES = {r.value for r in RuleKind}
VALID_STRATEGIES = ("theorem_optimal", "honest_clock", "fixed_offset")

_DEFAULTS: Dict[str, object] = {
    "n_honest": 1000,
    "mean_block_interval": 600.0,
    "adversary_fraction": 0.5,
    "propagation_delay": 0.0,
    "delta_b": 20.0,
    "window": None,
    "ties_per_cell": 10_000,
    "seed": 0,
    "timestamp_strategy": "theorem_optimal",
    "fixed_offset_shift": 0.0,
    "rules": ["proposed", "random"],
    "delta_o": [20.0, 200.0],
    "offset_std": [0.0, 10.0, 20.0, 50.0, 100.0, 200.0],
    "a_t": [0.0],
}


class PlanError(ValueError):
    """Config-file or flag problem; maps to exit code 2."""


@dataclass(frozen=True)
class ExperimentPlan:
    """A fully expanded sweep: base cell settings plus the four axes.

    Cells enumerate as product(rules, delta_o, offset_std, a_t) in that
    nesting order; cell i runs with seed base_seed + i.
    """

    n_honest: int
    mean_block_interval: float
    adversary_fraction: float
    propagation_delay: float
    delta_b: float
    window: Optional[float]
    ties_per_cell: int
    seed: int
    timestamp_strategy: str
    fixed_offset_shift: float
    rules: Tuple[str, ...]
    delta_o: Tuple[float, ...]
    offset_std: Tuple[float, ...]
    a_t: Tuple[float, ...]

    def n_cells(self) -> int:
        return (len(self.rules) * len(self.delta_o) * len(self.offset_std)
                * len(self.a_t))

    def strategy(self, delta_o: float) -> TimestampStrategy:
        if self.timestamp_strategy == "honest_clock":
            return HonestClock()
        if self.timestamp_strategy == "fixed_offset":
            return FixedOffset(shift=self.fixed_offset_shift)
        return TheoremOptimal(delta_o=delta_o, delta_b=self.delta_b)

    def cells(self) -> List[Tuple[int, SimConfig]]:
        out = []
        i = 0
        for rule in self.rules:
            for d_o in self.delta_o:
                for std in self.offset_std:
                    for a_t in self.a_t:
                        params = LocalParams(delta_b=self.delta_b,
                                             delta_o=d_o,
                                             window=self.window)
                        out.append((i, SimConfig(
                            n_honest=self.n_honest,
                            adversary_fraction=self.adversary_fraction,
                            mean_block_interval=self.mean_block_interval,
                            propagation_delay=self.propagation_delay,
                            offset_std=std,
                            a_t=a_t,
                            rule=RuleKind(rule),
                            params=params,
                            timestamp_strategy=self.strategy(d_o),
                            stop_ties=self.ties_per_cell,
                            seed=self.seed + i,
                        )))
                        i += 1
        return out


def _as_float_list(value: object, key: str) -> List[float]:
    if not isinstance(value, (list, tuple)) or not value:
        raise PlanError(f"{key}: expected a non-empty list, got {value!r}")
    out = []
    for j, v in enumerate(value):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise PlanError(f"{key}[{j}]: expected a number, got {v!r}")
        out.append(float(v))
    return out


def parse_config(path: Optional[str],
                 overrides: Optional[Dict[str, object]] = None) -> ExperimentPlan:
    """Build a plan from a YAML config file plus flag overrides.

    Absent keys fall back to the default grid (both figure sweeps). Unknown
    keys, unknown rule names, and negative durations are errors.
    """
    raw: Dict[str, object] = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise PlanError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(p.read_text())
        except yaml.YAMLError as e:
            raise PlanError(f"malformed config {path}: {e}") from e
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise PlanError(f"config root must be a mapping, got {type(loaded).__name__}")
        raw = loaded
    unknown = sorted(set(raw) - set(_DEFAULTS))
    if unknown:
        raise PlanError(f"unknown config keys: {', '.join(unknown)} "
                        f"(valid: {', '.join(sorted(_DEFAULTS))})")
    merged = {**_DEFAULTS, **raw, **(overrides or {})}

    rules = merged["rules"]
    if not isinstance(rules, (list, tuple)) or not rules:
        raise PlanError(f"rules: expected a non-empty list, got {rules!r}")
    for r in rules:
        if r not in VALID_RULES:
            raise PlanError(
                f"rules: unknown rule {r!r}; valid rules are "
                f"{{{', '.join(sorted(VALID_RULES))}}}")

    strategy = merged["timestamp_strategy"]
    if strategy not in VALID_STRATEGIES:
        raise PlanError(
            f"timestamp_strategy: unknown strategy {strategy!r}; valid are "
            f"{{{', '.join(VALID_STRATEGIES)}}}")

    for key in ("delta_b", "mean_block_interval", "adversary_fraction",
                "propagation_delay", "fixed_offset_shift"):
        v = merged[key]
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise PlanError(f"{key}: expected a number, got {v!r}")
    for key in ("delta_b", "mean_block_interval", "propagation_delay"):
        if merged[key] < 0:
            raise PlanError(f"{key}: must be non-negative, got {merged[key]}")
    window = merged["window"]
    if window is not None:
        if not isinstance(window, (int, float)) or isinstance(window, bool):
            raise PlanError(f"window: expected a number or null, got {window!r}")
        if window < 0:
            raise PlanError(f"window: must be non-negative, got {window}")
        window = float(window)
    for key in ("n_honest", "ties_per_cell", "seed"):
        v = merged[key]
        if not isinstance(v, int) or isinstance(v, bool):
            raise PlanError(f"{key}: expected an integer, got {v!r}")
    if merged["n_honest"] < 1:
        raise PlanError(f"n_honest: must be >= 1, got {merged['n_honest']}")
    if merged["ties_per_cell"] < 1:
        raise PlanError(f"ties_per_cell: must be >= 1, got {merged['ties_per_cell']}")

    delta_o = _as_float_list(merged["delta_o"], "delta_o")
    offset_std = _as_float_list(merged["offset_std"], "offset_std")
    a_t = _as_float_list(merged["a_t"], "a_t")
    for key, vals in (("delta_o", delta_o), ("offset_std", offset_std)):
        for j, v in enumerate(vals):
            if v < 0:
                raise PlanError(f"{key}[{j}]: must be non-negative, got {v}")

    return ExperimentPlan(
        n_honest=int(merged["n_honest"]),
        mean_block_interval=float(merged["mean_block_interval"]),
        adversary_fraction=float(merged["adversary_fraction"]),
        propagation_delay=float(merged["propagation_delay"]),
        delta_b=float(merged["delta_b"]),
        window=window,
        ties_per_cell=int(merged["ties_per_cell"]),
        seed=int(merged["seed"]),
        timestamp_strategy=str(strategy),
        fixed_offset_shift=float(merged["fixed_offset_shift"]),
        rules=tuple(str(r) for r in rules),
        delta_o=tuple(delta_o),
        offset_std=tuple(offset_std),
        a_t=tuple(a_t),
    )


def _strategy_label(cfg: SimConfig) -> str:
    s = cfg.strategy()
    if isinstance(s, HonestClock):
        return "honest_clock"
    if isinstance(s, FixedOffset):
        return f"fixed_offset:{s.shift!r}"
    return "theorem_optimal"


def _row(cfg: SimConfig, report: SimReport) -> Dict[str, str]:
    def num(x: Optional[float]) -> str:
        return "" if x is None else repr(float(x))

    return {
        "rule": cfg.rule.value,
        "n_honest": str(cfg.n_honest),
        "T_seconds": repr(float(cfg.mean_block_interval)),
        "delta_B_i": repr(float(cfg.params.delta_b)),
        "delta_O_i": repr(float(cfg.params.delta_o)),
        "w": repr(float(cfg.params.window)),
        "offset_std": repr(float(cfg.offset_std)),
        "ts_strategy": _strategy_label(cfg),
        "a_t": repr(float(cfg.a_t)),
        "seed": str(cfg.seed),
        "n_ties": str(report.n_ties),
        "gamma_mean": num(report.gamma_mean),
        "gamma_stderr": num(report.gamma_stderr),
        "theorem2_bound": repr(report.bound_reference),
        "expected_gamma_ideal": repr(report.ideal_reference),
        "n_blocks_honest": str(report.n_blocks_honest),
        "n_blocks_adversary": str(report.n_blocks_adversary),
    }


def _run_cell(args: Tuple[int, SimConfig]) -> Tuple[int, SimConfig, SimReport]:
    index, cfg = args
    return index, cfg, run(cfg)


def execute(plan: ExperimentPlan, out_dir: str, jobs: int = 1) -> Path:
    """Run every cell and write results.csv + bounds.csv into out_dir.

    Returns the results.csv path. Cells run concurrently when jobs > 1;
    output order is always cell-index order.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise OSError(f"output directory not writable: {out} ({e})") from e

    cells = plan.cells()
    results: List[Optional[Tuple[SimConfig, SimReport]]] = [None] * len(cells)
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for index, cfg, report in pool.map(_run_cell, cells):
                    results[index] = (cfg, report)
        else:
            for item in cells:
                index, cfg, report = _run_cell(item)
                results[index] = (cfg, report)
    except (ConfigError, ValueError) as e:
        failed = next((c for i, c in cells if results[i] is None), None)
        raise RuntimeError(f"cell failed: {e}\ncell config: {failed}") from e

    results_path = out / "results.csv"
    with results_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for pair in results:
            assert pair is not None
            writer.writerow(_row(*pair))

    honest_t = plan.mean_block_interval / (1.0 - plan.adversary_fraction) \
        if plan.adversary_fraction < 1.0 else float("inf")
    seen = set()
    with (out / "bounds.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BOUNDS_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for d_o in plan.delta_o:
            key = (d_o, plan.delta_b, plan.mean_block_interval)
            if key in seen:
                continue
            seen.add(key)
            writer.writerow({
                "delta_O_i": repr(float(d_o)),
                "delta_B_i": repr(float(plan.delta_b)),
                "T_seconds": repr(float(plan.mean_block_interval)),
                "honest_T_seconds": repr(float(honest_t)),
                "theorem2_bound": repr(gamma_upper_bound(
                    d_o, plan.delta_b, plan.mean_block_interval)),
                "expected_gamma_ideal": repr(expected_gamma_ideal(
                    d_o, plan.delta_b, honest_t)
                    if honest_t != float("inf") else 0.0),
            })

    _print_summary(results)
    return results_path


def _print_summary(results: Sequence[Optional[Tuple[SimConfig, SimReport]]]) -> None:
    header = (f"{'rule':<11} {'delta_O':>8} {'std':>6} {'a_t':>6} "
              f"{'ties':>6} {'gamma':>8} {'stderr':>8} {'bound':>8}")
    print(header)
    print("-" * len(header))
    for pair in results:
        assert pair is not None
        cfg, rep = pair
        gm = "-" if rep.gamma_mean is None else f"{rep.gamma_mean:.4f}"
        gs = "-" if rep.gamma_stderr is None else f"{rep.gamma_stderr:.4f}"
        print(f"{cfg.rule.value:<11} {cfg.params.delta_o:>8.0f} "
              f"{cfg.offset_std:>6.0f} {cfg.a_t:>6.0f} {rep.n_ties:>6d} "
              f"{gm:>8} {gs:>8} {rep.bound_reference:>8.4f}")


def _float_list_flag(text: str) -> List[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from e


def build_arg_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lastgen",
        description="Sweep tie-breaking-rule simulations and write CSV results.")
    ap.add_argument("--config", metavar="PATH", default=None,
                    help="YAML config file (defaults cover the full figure grid)")
    ap.add_argument("--out", metavar="DIR", default="results",
                    help="output directory for results.csv and bounds.csv")
    ap.add_argument("--seed", metavar="N", type=int, default=None,
                    help="base seed; cell i uses seed + i")
    ap.add_argument("--rule", metavar="NAME", action="append", default=None,
                    help="tie-breaking rule (repeatable): proposed | random | first_seen")
    ap.add_argument("--offset-std", metavar="LIST", type=_float_list_flag,
                    default=None, help="comma-separated clock-offset std sweep, seconds")
    ap.add_argument("--delta-o", metavar="LIST", type=_float_list_flag,
                    default=None, help="comma-separated assumed offset bounds, seconds")
    ap.add_argument("--delta-b", metavar="VALUE", type=float, default=None,
                    help="assumed propagation bound (single value), seconds")
    ap.add_argument("--a-t", metavar="LIST", type=_float_list_flag,
                    default=None, help="comma-separated adversary clock offsets, seconds")
    ap.add_argument("--ties", metavar="N", type=int, default=None,
                    help="tie episodes per cell")
    ap.add_argument("--jobs", metavar="N", type=int, default=1,
                    help="parallel worker processes")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_arg_parser().parse_args(argv)
    overrides: Dict[str, object] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.rule is not None:
        overrides["rules"] = args.rule
    if args.offset_std is not None:
        overrides["offset_std"] = args.offset_std
    if args.delta_o is not None:
        overrides["delta_o"] = args.delta_o
    if args.delta_b is not None:
        overrides["delta_b"] = args.delta_b
    if args.a_t is not None:
        overrides["a_t"] = args.a_t
    if args.ties is not None:
        overrides["ties_per_cell"] = args.ties

    try:
        plan = parse_config(args.config, overrides)
    except (PlanError, ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    try:
        path = execute(plan, args.out, jobs=args.jobs)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except RuntimeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    print(f"\nwrote {path} ({plan.n_cells()} cells)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
