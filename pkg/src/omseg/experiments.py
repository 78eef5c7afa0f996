"""Frame-level pipelines and parameter sweeps behind the CLI commands."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence, TypeVar

import numpy as np

from .errors import FeasibilityError, ValidationError
from .events import EventFrame, Geometry, GroundTruthMask, align_frames_to_masks
from .hardware import build_array_config, check_feasibility, simulate_frame
from .metrics import IouReport, format_table, mean_iou
from .oms import OmsConfig, OmsFrame, oms_compute

ENGINES = ("algo", "hw")
SWEEP_DIMENSIONS = ("stride", "kernel", "tau", "window")

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> list[R]:
    """Map over ``items`` with at most ``jobs`` threads; results keep input order."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def make_engine(
    config: OmsConfig,
    geometry: Geometry,
    engine: str = "algo",
    leak_per_step: float = 0.0,
    steps: int = 1,
) -> Callable[[EventFrame], OmsFrame]:
    if engine == "algo":
        return lambda frame: oms_compute(frame, config)
    if engine == "hw":
        hw = build_array_config(config, geometry, leak_per_step=leak_per_step)
        return lambda frame: simulate_frame(frame, hw, steps=steps)
    raise ValidationError(f"engine must be one of {ENGINES}, got {engine!r}")


@dataclass
class OmsRun:
    frames: list[OmsFrame]
    report: IouReport
    input_density: float
    spike_density: float


def run_oms(
    events: np.ndarray,
    masks: Sequence[GroundTruthMask],
    config: OmsConfig,
    geometry: Geometry,
    engine: str = "algo",
    jobs: int = 1,
    policy: str = "skip",
    leak_per_step: float = 0.0,
    steps: int = 1,
) -> OmsRun:
    pairs = align_frames_to_masks(events, masks, config.window_ms, geometry)
    compute = make_engine(config, geometry, engine, leak_per_step, steps)
    frames = ordered_map(lambda p: compute(p[0]), pairs, jobs)
    report = mean_iou(zip(frames, (m for _, m in pairs)), policy)
    input_density = float(np.mean([f.density for f, _ in pairs])) if pairs else math.nan
    spike_density = float(np.mean([f.density for f in frames])) if frames else math.nan
    return OmsRun(frames, report, input_density, spike_density)


def parse_kernel_value(text: str) -> tuple[tuple[int, int], str | None]:
    """Parse ``CxS`` into (center, surround).

    A pair written larger-first is taken as (surround, center) and reordered,
    with a note saying so.
    """
    try:
        a, b = (int(v) for v in text.lower().replace(",", "x").split("x"))
    except ValueError:
        raise ValidationError(f"kernel value must look like '4x8', got {text!r}") from None
    if a > b:
        return (b, a), f"{text}: read as center {b}x{b}, surround {a}x{a}"
    return (a, b), None


def parse_sweep_values(vary: str, values: Sequence[str]) -> list[Any]:
    if vary not in SWEEP_DIMENSIONS:
        raise ValidationError(f"--vary must be one of {SWEEP_DIMENSIONS}, got {vary!r}")
    if not values:
        raise ValidationError("sweep needs at least one value")
    try:
        if vary == "stride":
            return [int(v) for v in values]
        if vary in ("tau", "window"):
            return [float(v) for v in values]
    except ValueError as exc:
        raise ValidationError(f"bad {vary} value: {exc}") from None
    return list(values)


@dataclass
class SweepResult:
    vary: str
    rows: list[dict[str, Any]]
    notes: list[str] = field(default_factory=list)

    @property
    def by_size_class(self) -> bool:
        return self.vary == "kernel"

    def headers(self) -> list[str]:
        if self.by_size_class:
            return ["kernel size", "Large objects", "Small objects", "mIoU(%)", "frames", "spike density", "status"]
        return [self.vary.capitalize(), "mIoU(%)", "frames", "spike density", "status"]

    def table_rows(self) -> list[list[Any]]:
        out = []
        for r in self.rows:
            lead = [r["value"]]
            if self.by_size_class:
                lead += [r["large_miou_pct"], r["small_miou_pct"]]
            out.append(lead + [r["miou_pct"], r["frames"], r["spike_density"], r["status"]])
        return out

    def to_table(self, title: str | None = None) -> str:
        text = format_table(self.headers(), self.table_rows(), title)
        return text + "".join(f"note: {n}\n" for n in self.notes)

    def to_csv(self) -> str:
        buf = io.StringIO()
        keys = ["value"]
        if self.by_size_class:
            keys += ["large_miou_pct", "small_miou_pct"]
        keys += ["miou_pct", "frames", "spike_density", "input_density", "status"]
        writer = csv.DictWriter(buf, fieldnames=keys, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows)
        return buf.getvalue()


def _sweep_configs(base: OmsConfig, vary: str, values: Iterable[Any]) -> Iterable[tuple[str, Any, list[str]]]:
    """Yield (label, config-or-error, notes) per sweep value."""
    for v in values:
        notes: list[str] = []
        try:
            if vary == "stride":
                cfg = base.replace(stride=v)
                label = str(v)
            elif vary == "tau":
                cfg = base.replace(tau=v)
                label = f"{v:g}"
            elif vary == "window":
                cfg = base.replace(window_ms=v)
                label = f"{v:g} ms"
            else:
                (cen, surr), note = parse_kernel_value(v)
                if note:
                    notes.append(note)
                changes: dict[str, Any] = {"center_side": cen, "surround_side": surr}
                if base.stride == base.surround_side:
                    changes["stride"] = surr  # keep non-overlapping tiles
                elif base.stride > surr:
                    changes["stride"] = surr
                cfg = base.replace(**changes)
                label = f"{cen}x{cen} and {surr}x{surr}"
        except ValidationError as exc:
            yield str(v), exc, notes
            continue
        yield label, cfg, notes


def run_sweep(
    events: np.ndarray,
    masks: Sequence[GroundTruthMask],
    base: OmsConfig,
    geometry: Geometry,
    vary: str,
    values: Sequence[Any],
    engine: str = "algo",
    jobs: int = 1,
    policy: str = "skip",
) -> SweepResult:
    if vary not in SWEEP_DIMENSIONS:
        raise ValidationError(f"--vary must be one of {SWEEP_DIMENSIONS}, got {vary!r}")
    if not values:
        raise ValidationError("sweep needs at least one value")
    result = SweepResult(vary, [])
    if vary == "kernel":
        result.notes.append("kernel rows are (center, surround)")
    for label, cfg, notes in _sweep_configs(base, vary, values):
        result.notes.extend(notes)
        row: dict[str, Any] = {"value": label}
        if isinstance(cfg, Exception):
            row.update(_failed_row(str(cfg), result.by_size_class))
            result.rows.append(row)
            continue
        if engine == "hw":
            violations = check_feasibility(cfg, geometry)
            if violations:
                row.update(_failed_row("infeasible: " + "; ".join(violations), result.by_size_class))
                result.rows.append(row)
                continue
        try:
            run = run_oms(events, masks, cfg, geometry, engine, jobs, policy)
        except (ValidationError, FeasibilityError) as exc:
            row.update(_failed_row(str(exc), result.by_size_class))
            result.rows.append(row)
            continue
        rep = run.report
        row.update(
            miou_pct=_pct(rep.mean_iou),
            frames=rep.frames_evaluated,
            spike_density=run.spike_density,
            input_density=run.input_density,
            status="ok",
        )
        if result.by_size_class:
            row["large_miou_pct"] = _pct(rep.class_mean("large"))
            row["small_miou_pct"] = _pct(rep.class_mean("small"))
        row["config"] = cfg.to_dict()
        result.rows.append(row)
    return result


def _pct(x: float) -> float:
    return x * 100.0 if not math.isnan(x) else math.nan


def _failed_row(message: str, by_class: bool) -> dict[str, Any]:
    row: dict[str, Any] = {
        "miou_pct": math.nan,
        "frames": 0,
        "spike_density": math.nan,
        "input_density": math.nan,
        "status": message,
    }
    if by_class:
        row["large_miou_pct"] = math.nan
        row["small_miou_pct"] = math.nan
    row["config"] = None
    return row
