"""Experiment runner: config schema, sweeps, CSV traces and SVG regret plots."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .algorithm import KometoConfig, run as run_kometo
from .baselines import InapplicableEnvironment, run_baseline
from .benchmarks import DEFAULT_MAX_COST, benchmark, default_model
from .fidelity import INF, FidelityEnvironment, FidelitySchedule, model_from_dict
from .instances import SmoothnessProfile, TreeInstance, random_tree_instance
from .results import RegretTrace
from .theory import BoundQuery, theorem3_bound

log = logging.getLogger(__name__)

CSV_COLUMNS = ("algorithm", "instance", "budget", "seed", "spent", "regret", "wall_ms")
REGRET_FLOOR = 1e-10


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending path."""


# ---------------------------------------------------------------------------
# schema


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSpec(_Strict):
    kind: Literal["poly", "exp", "cutoff"]
    A: Optional[float] = None
    alpha: Optional[float] = None
    B: Optional[float] = None
    sigma: Optional[float] = None
    beta: Optional[float] = None
    a: Optional[float] = None

    def build(self):
        return model_from_dict(self.model_dump(exclude_none=True))


class ProfileSpec(_Strict):
    nu: float = 1.0
    rho: float = 0.5
    d: float = 0.0
    C: Optional[float] = None
    K: int = 2

    def build(self) -> SmoothnessProfile:
        if self.C is None:
            return SmoothnessProfile.with_min_constant(self.nu, self.rho, self.d, self.K)
        return SmoothnessProfile(self.nu, self.rho, self.d, self.C, self.K)


class RandomTreeSpec(_Strict):
    profile: ProfileSpec = ProfileSpec()
    model: ModelSpec
    horizon: int = Field(12, ge=1)
    dim: int = Field(1, ge=1)


class InstanceSpec(_Strict):
    """Exactly one of ``benchmark``, ``tree_file`` or ``random_tree``."""

    benchmark: Optional[str] = None
    tree_file: Optional[str] = None
    random_tree: Optional[RandomTreeSpec] = None
    model: Optional[ModelSpec] = None
    max_cost: Optional[float] = None
    name: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        given = [k for k in ("benchmark", "tree_file", "random_tree") if getattr(self, k) is not None]
        if len(given) != 1:
            raise ValueError("give exactly one of benchmark, tree_file, random_tree")
        if self.max_cost is not None and not self.max_cost > 1:
            raise ValueError("max_cost must exceed 1")
        return self


class AlgorithmSpec(_Strict):
    name: Literal["kometo", "sequool", "sqrt", "log"]
    label: Optional[str] = None
    arity: int = Field(2, ge=2)
    budget_optimization: bool = False
    lazy_child_evaluation: bool = True
    parent_reuse: bool = True

    @property
    def display(self) -> str:
        return self.label or self.name


class OutputSpec(_Strict):
    csv: str
    svg: Optional[str] = None


class ExperimentConfig(_Strict):
    instance: InstanceSpec
    algorithms: list[AlgorithmSpec] = Field(min_length=1)
    budgets: list[float] = Field(min_length=1)
    budget_unit: Literal["auto", "top_cost", "absolute"] = "auto"
    seeds: list[int] = [0]
    overlay: Optional[Literal["theorem3"]] = None
    workers: int = Field(1, ge=1)
    output: OutputSpec

    @model_validator(mode="after")
    def _check(self):
        if any(not b > 0 for b in self.budgets):
            raise ValueError("budgets must be positive")
        if self.overlay and self.instance.benchmark is not None:
            raise ValueError("the theorem3 overlay needs a tree instance")
        return self


def _format_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_config(data: dict, base_dir: Optional[Path] = None) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from None
    if base_dir is not None:
        # relative paths are resolved against the config file
        def rel(p):
            return p if p is None or os.path.isabs(p) else str(base_dir / p)

        cfg.instance.tree_file = rel(cfg.instance.tree_file)
        cfg.output.csv = rel(cfg.output.csv)
        cfg.output.svg = rel(cfg.output.svg)
    return cfg


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read a YAML or JSON config file."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data, path.parent)


# ---------------------------------------------------------------------------
# instances


@dataclass
class ResolvedInstance:
    name: str
    function: object
    schedule: FidelitySchedule
    tree: Optional[TreeInstance] = None

    def environment(self, budget: float) -> FidelityEnvironment:
        return FidelityEnvironment(self.function, self.schedule, budget)


def resolve_instance(spec: InstanceSpec, seed: int = 0) -> ResolvedInstance:
    """Build the function and fidelity schedule; ``seed`` only affects random trees."""
    if spec.benchmark is not None:
        try:
            fn = benchmark(spec.benchmark)
        except ValueError as exc:
            raise ConfigError(f"instance.benchmark: {exc}") from None
        model = spec.model.build() if spec.model else default_model(spec.benchmark)
        cap = DEFAULT_MAX_COST if spec.max_cost is None else spec.max_cost
        return ResolvedInstance(spec.name or spec.benchmark, fn, FidelitySchedule(model, cap))
    if spec.tree_file is not None:
        try:
            inst = TreeInstance.load(spec.tree_file)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"instance.tree_file: {exc}") from None
        name = spec.name or Path(spec.tree_file).stem
    else:
        rt = spec.random_tree
        try:
            inst = random_tree_instance(rt.profile.build(), rt.model.build(), rt.horizon, seed, rt.dim)
        except ValueError as exc:
            raise ConfigError(f"instance.random_tree: {exc}") from None
        name = spec.name or f"random-tree-{seed}"
    if spec.model is not None:
        inst.model = spec.model.build()
    cap = INF if spec.max_cost is None else spec.max_cost
    return ResolvedInstance(name, inst, FidelitySchedule(inst.model, cap), inst)


def absolute_budget(cfg: ExperimentConfig, multiple: float, top_cost: float) -> float:
    unit = cfg.budget_unit
    if unit == "auto":
        unit = "top_cost" if math.isfinite(top_cost) else "absolute"
    if unit == "top_cost":
        if not math.isfinite(top_cost):
            raise ConfigError("budget_unit: top_cost needs a finite max_cost")
        return multiple * top_cost
    return multiple


# ---------------------------------------------------------------------------
# running


def run_algorithm(alg: AlgorithmSpec, env: FidelityEnvironment) -> RegretTrace:
    if alg.name == "kometo":
        cfg = KometoConfig(env.budget, alg.arity, alg.budget_optimization,
                           alg.lazy_child_evaluation, alg.parent_reuse)
        return run_kometo(cfg, env, label=alg.display)
    return run_baseline(alg.name, env, arity=alg.arity, label=alg.display)


def skipped_trace(label: str, budget: float, reason: str = "skipped") -> RegretTrace:
    return RegretTrace(algorithm=label, budget=budget, spent=0.0, output=(), regret=math.nan, status=reason)


def _run_cell(cfg: ExperimentConfig, alg_index: int, budget_multiple: float, seed: int) -> RegretTrace:
    alg = cfg.algorithms[alg_index]
    inst = resolve_instance(cfg.instance, seed)
    budget = absolute_budget(cfg, budget_multiple, inst.schedule.max_cost)
    if budget < 1:
        trace = skipped_trace(alg.display, budget)
    else:
        env = inst.environment(budget)
        try:
            trace = run_algorithm(alg, env)
        except InapplicableEnvironment:
            trace = skipped_trace(alg.display, budget)
    trace.instance = inst.name
    trace.seed = seed
    return trace


@dataclass
class ExperimentResult:
    traces: list[RegretTrace]
    overlay: dict = field(default_factory=dict)  # (instance, budget) -> bound

    def violations(self) -> list[RegretTrace]:
        """Kometo traces whose regret exceeds the overlay bound."""
        bad = []
        for t in self.traces:
            bound = self.overlay.get((t.instance, t.budget))
            if bound is not None and t.status == "ok" and t.regret > bound:
                bad.append(t)
        return bad


def sort_key(t: RegretTrace):
    return (t.algorithm, t.instance, t.budget, t.seed)


def theorem3_overlay(inst: ResolvedInstance, budget: float) -> Optional[float]:
    if inst.tree is None:
        return None
    return theorem3_bound(BoundQuery.from_budget(inst.tree.profile, inst.tree.model, budget)).regret_bound


def run_experiment(cfg: ExperimentConfig, csv_path: Optional[Union[str, Path]] = None) -> ExperimentResult:
    """Run every (algorithm, budget, seed) cell.

    Rows are appended to the CSV as cells finish, so an interrupted sweep
    keeps its partial results; the file is rewritten sorted at the end.
    """
    csv_path = Path(csv_path or cfg.output.csv)
    jobs = [(a, b, s) for a in range(len(cfg.algorithms)) for b in cfg.budgets for s in cfg.seeds]
    # resolve once up front so config errors surface before any work
    resolve_instance(cfg.instance, cfg.seeds[0])
    traces: list[RegretTrace] = []
    try:
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        fh = open(csv_path, "w", newline="")
    except OSError as exc:
        raise OSError(f"{csv_path}: {exc.strerror}") from exc
    with fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        fh.flush()
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as pool:
                futures = [pool.submit(_run_cell, cfg, *job) for job in jobs]
                for fut in futures:
                    t = fut.result()
                    traces.append(t)
                    writer.writerow(_csv_row(t))
                    fh.flush()
        else:
            for job in jobs:
                t = _run_cell(cfg, *job)
                traces.append(t)
                writer.writerow(_csv_row(t))
                fh.flush()
    traces.sort(key=sort_key)
    emit_csv(traces, csv_path)
    overlay = {}
    if cfg.overlay == "theorem3":
        for seed in cfg.seeds:
            inst = resolve_instance(cfg.instance, seed)
            for b in cfg.budgets:
                budget = absolute_budget(cfg, b, inst.schedule.max_cost)
                if budget >= 1:
                    overlay[(inst.name, budget)] = theorem3_overlay(inst, budget)
    result = ExperimentResult(traces, overlay)
    if cfg.output.svg:
        overlay_series = _overlay_series(result)
        if svg_series(traces) or overlay_series:
            emit_svg(traces, cfg.output.svg, overlay=overlay_series)
        else:
            log.warning("%s: every run was skipped, no plot written", cfg.output.svg)
    return result


def _overlay_series(result: ExperimentResult) -> dict:
    if not result.overlay:
        return {}
    by_budget: dict = {}
    for (_, budget), bound in result.overlay.items():
        by_budget.setdefault(budget, []).append(bound)
    return {"upper bound": sorted((b, max(v)) for b, v in by_budget.items())}


# ---------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_row(t: RegretTrace) -> list[str]:
    r = t.row()
    return [_fmt(r[c]) for c in CSV_COLUMNS]


def emit_csv(traces: Iterable[RegretTrace], path: Union[str, Path]) -> None:
    """Write traces sorted by (algorithm, instance, budget, seed); floats use ``repr``."""
    traces = sorted(traces, key=sort_key)
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for t in traces:
                w.writerow(_csv_row(t))
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc


def parse_csv(path: Union[str, Path]) -> list[RegretTrace]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path}: header must be {','.join(CSV_COLUMNS)}")
    out = []
    for row in rows[1:]:
        rec = dict(zip(CSV_COLUMNS, row))
        regret = float(rec["regret"])
        out.append(RegretTrace(
            algorithm=rec["algorithm"], instance=rec["instance"], budget=float(rec["budget"]),
            seed=int(rec["seed"]), spent=float(rec["spent"]), regret=regret,
            wall_ms=float(rec["wall_ms"]), output=(), status="skipped" if math.isnan(regret) else "ok",
        ))
    return out


# ---------------------------------------------------------------------------
# SVG

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def svg_series(traces: Iterable[RegretTrace], floor: float = REGRET_FLOOR) -> dict[str, list[tuple[float, float]]]:
    """Mean regret per (algorithm, budget), clamped below at ``floor``.

    Skipped runs are ignored; an algorithm with no finite point is dropped.
    """
    groups: dict = {}
    for t in traces:
        if math.isnan(t.regret):
            continue
        groups.setdefault(t.algorithm, {}).setdefault(t.budget, []).append(t.regret)
    series = {}
    for alg in sorted(groups):
        pts = [(b, max(floor, sum(v) / len(v))) for b, v in sorted(groups[alg].items())]
        if pts:
            series[alg] = pts
    return series


def emit_svg(traces: Iterable[RegretTrace], path: Union[str, Path], overlay: Optional[dict] = None,
             floor: float = REGRET_FLOOR, width: int = 640, height: int = 420) -> None:
    """Log-log regret-vs-budget polylines, one per algorithm, plus optional dashed overlays."""
    series = svg_series(traces, floor)
    overlay = {k: [(b, max(floor, v)) for b, v in pts] for k, pts in (overlay or {}).items() if pts}
    pts = [p for s in list(series.values()) + list(overlay.values()) for p in s]
    if not pts:
        raise ValueError("nothing to plot: no finite regret values")
    left, right, top, bottom = 70, 150, 20, 50
    xs = [math.log10(b) for b, _ in pts]
    ys = [math.log10(r) for _, r in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = math.floor(min(ys)), math.ceil(max(ys))
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y1 = y0 + 1
    pw, ph = width - left - right, height - top - bottom
    X = lambda b: left + (math.log10(b) - x0) / (x1 - x0) * pw
    Y = lambda r: top + (y1 - math.log10(r)) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    step = max(1, (y1 - y0) // 10)
    for e in range(y0, y1 + 1, step):
        y = Y(10.0**e)
        out.append(f'<line x1="{left - 4}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="#444"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end">1e{e}</text>')
    for b in sorted({b for b, _ in pts}):
        x = X(b)
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 16}" text-anchor="middle">{b:g}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 10}" text-anchor="middle">budget</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.2f})">simple regret (floor {floor:g})</text>')

    def poly(name, data, color, dashed, row):
        coords = " ".join(f"{X(b):.2f},{Y(r):.2f}" for b, r in data)
        dash = ' stroke-dasharray="6 4"' if dashed else ""
        out.append(f'<polyline data-series="{_esc(name)}" fill="none" stroke="{color}" stroke-width="1.6"{dash} '
                   f'points="{coords}"/>')
        for b, r in data:
            out.append(f'<circle cx="{X(b):.2f}" cy="{Y(r):.2f}" r="2.2" fill="{color}"/>')
        ly = top + 14 + 16 * row
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="1.6"{dash}/>')
        out.append(f'<text class="legend" x="{left + pw + 34}" y="{ly}">{_esc(name)}</text>')

    row = 0
    for k, (name, data) in enumerate(series.items()):
        poly(name, data, _PALETTE[k % len(_PALETTE)], False, row)
        row += 1
    for name, data in overlay.items():
        poly(name, data, "#777", True, row)
        row += 1
    out.append("</svg>")
    path = Path(path)
    try:
        path.write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.model_dump(exclude_none=True), indent=2)
