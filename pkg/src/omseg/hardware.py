"""Discrete-time behavioral model of the reconfigurable OMS compute array.

The array is partitioned into square, non-overlapping tiles, one per
surround kernel placement.  Each pixel is programmed as center (adds charge
to the tile's shared node P when its bipolar signal fires) or surround
(removes charge).  A variable-trip-point inverter turns the node level into
a spike.

Charge is a normalized scalar per tile.  The surround kernel of the
algorithm also covers the center block, so a center pixel's net weight is
``1/cen**2 - 1/surr**2`` and a surround pixel's is ``-1/surr**2``.  With
these weights one accumulation step reproduces ``mean(center) -
mean(surround)`` exactly.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import warnings
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

from .errors import FeasibilityError, ValidationError
from .events import EventFrame, Geometry
from .oms import TIE_GUARD, OmsConfig, OmsFrame

TRIP_SETTING_MIN = -10
TRIP_SETTING_MAX = 10
TRIP_FRACTION_LOW = 0.48
TRIP_FRACTION_HIGH = 0.90
UNIT_CELL = 2
PLAN_FORMAT = "omseg-programming-plan/1"


class PixelRole(enum.IntEnum):
    OFF = 0
    CENTER = 1
    SURROUND = 2


class TripQuantization(NamedTuple):
    setting: int
    error: float
    saturated: bool


def trip_fraction(setting: int) -> float:
    """Inverter trip point as a fraction of node P's swing.

    Negative settings enable pull-down devices, positive ones pull-up
    devices; the map is linear between the measured extremes.
    """
    if int(setting) != setting or not TRIP_SETTING_MIN <= setting <= TRIP_SETTING_MAX:
        raise ValidationError(
            f"trip setting must be an integer in [{TRIP_SETTING_MIN}, {TRIP_SETTING_MAX}], got {setting}"
        )
    t = (setting - TRIP_SETTING_MIN) / (TRIP_SETTING_MAX - TRIP_SETTING_MIN)
    # convex combination keeps both endpoints exact
    return (1.0 - t) * TRIP_FRACTION_LOW + t * TRIP_FRACTION_HIGH


def trip_points() -> list[float]:
    return [trip_fraction(k) for k in range(TRIP_SETTING_MIN, TRIP_SETTING_MAX + 1)]


def quantize_tau(tau: float) -> TripQuantization:
    """Nearest trip setting for ``tau``; ties go to the lower setting."""
    if not 0 < tau < 1:
        raise ValidationError(f"tau must lie in (0, 1), got {tau}")
    points = trip_points()
    saturated = tau < points[0] or tau > points[-1]
    errs = [abs(p - tau) for p in points]
    best = min(range(len(points)), key=lambda i: (errs[i], i))
    return TripQuantization(best + TRIP_SETTING_MIN, errs[best], saturated)


@dataclass(frozen=True)
class HwArrayConfig:
    width: int
    height: int
    roles: np.ndarray = field(repr=False)
    tile_side: int
    center_offset: int
    center_side: int
    alpha: float
    beta: float
    leak_per_step: float = 0.0
    trip_setting: int = 0
    source: OmsConfig | None = None

    def __post_init__(self) -> None:
        problems = []
        if self.roles.shape != (self.height, self.width):
            problems.append(f"roles grid {self.roles.shape} does not match {self.width}x{self.height}")
        if self.tile_side <= 0 or self.tile_side % UNIT_CELL:
            problems.append(f"tile_side {self.tile_side} is not a positive multiple of {UNIT_CELL}")
        if self.center_side <= 0 or self.center_side % UNIT_CELL:
            problems.append(f"center_side {self.center_side} is not a positive multiple of {UNIT_CELL}")
        if self.center_offset < 0 or self.center_offset + self.center_side > self.tile_side:
            problems.append("center block does not fit inside the tile")
        if self.tile_side > 0 and (self.width % self.tile_side or self.height % self.tile_side):
            problems.append(f"{self.width}x{self.height} is not a whole number of {self.tile_side}-pixel tiles")
        if not (self.alpha > 0 and self.beta > 0):
            problems.append("alpha and beta must be positive")
        if not 0 <= self.leak_per_step < 1:
            problems.append(f"leak_per_step must lie in [0, 1), got {self.leak_per_step}")
        if not TRIP_SETTING_MIN <= self.trip_setting <= TRIP_SETTING_MAX:
            problems.append(f"trip_setting {self.trip_setting} out of range")
        if problems:
            raise ValidationError("; ".join(problems))

    @property
    def tiles_shape(self) -> tuple[int, int]:
        return (self.height // self.tile_side, self.width // self.tile_side)

    @property
    def trip(self) -> float:
        return trip_fraction(self.trip_setting)

    def with_(self, **changes: Any) -> "HwArrayConfig":
        data = {k: getattr(self, k) for k in self.__dataclass_fields__}
        data.update(changes)
        return HwArrayConfig(**data)

    def equivalent_oms_config(self) -> OmsConfig:
        """The algorithm configuration this array computes in one step."""
        base = self.source or OmsConfig()
        return OmsConfig(
            center_side=self.center_side,
            surround_side=self.tile_side,
            stride=self.tile_side,
            tau=self.trip,
            window_ms=base.window_ms,
            kernel_kind="uniform",
            anchor="tile",
        )


def check_feasibility(oms: OmsConfig, geometry: Geometry) -> list[str]:
    """Every hardware constraint ``oms`` violates (empty when feasible)."""
    violations = []
    cen, surr = oms.center_side, oms.surround_side
    if oms.kernel_kind != "uniform":
        violations.append(f"kernel_kind must be 'uniform' (square filter), got {oms.kernel_kind!r}")
    if oms.stride != surr:
        violations.append(f"stride must equal surround_side ({surr}), got {oms.stride}")
    if cen % UNIT_CELL:
        violations.append(f"center_side {cen} is odd (regions are programmed in 2x2 unit cells)")
    if surr % UNIT_CELL:
        violations.append(f"surround_side {surr} is odd (regions are programmed in 2x2 unit cells)")
    if cen % UNIT_CELL == 0 and surr % UNIT_CELL == 0 and ((surr - cen) // 2) % UNIT_CELL:
        violations.append(
            f"centered {cen}x{cen} block sits at offset {(surr - cen) // 2} in an {surr}x{surr} tile, "
            "off the 2x2 unit-cell lattice"
        )
    if oms.stride == surr and oms.resolved_anchor != "tile":
        violations.append("anchor must be 'tile' (or 'auto') so kernels align with array tiles")
    if geometry.width % surr or geometry.height % surr:
        violations.append(
            f"sensor {geometry.width}x{geometry.height} does not divide into {surr}x{surr} tiles"
        )
    return violations


def _tile_roles(tile_side: int, center_offset: int, center_side: int) -> np.ndarray:
    tile = np.full((tile_side, tile_side), PixelRole.SURROUND, dtype=np.int8)
    sl = slice(center_offset, center_offset + center_side)
    tile[sl, sl] = PixelRole.CENTER
    return tile


def build_array_config(
    oms: OmsConfig, geometry: Geometry, leak_per_step: float = 0.0
) -> HwArrayConfig:
    violations = check_feasibility(oms, geometry)
    if violations:
        raise FeasibilityError(violations)
    cen, surr = oms.center_side, oms.surround_side
    offset = (surr - cen) // 2
    q = quantize_tau(oms.tau)
    if q.saturated:
        warnings.warn(
            f"tau={oms.tau} outside trip range [{TRIP_FRACTION_LOW}, {TRIP_FRACTION_HIGH}]; "
            f"clamped to setting {q.setting:+d} (error {q.error:.3f})",
            stacklevel=2,
        )
    tile = _tile_roles(surr, offset, cen)
    roles = np.tile(tile, (geometry.height // surr, geometry.width // surr))
    return HwArrayConfig(
        width=geometry.width,
        height=geometry.height,
        roles=roles,
        tile_side=surr,
        center_offset=offset,
        center_side=cen,
        alpha=1.0 / (cen * cen) - 1.0 / (surr * surr),
        beta=1.0 / (surr * surr),
        leak_per_step=leak_per_step,
        trip_setting=q.setting,
        source=oms,
    )


def _tile_sums(mask: np.ndarray, tile: int) -> np.ndarray:
    h, w = mask.shape
    return mask.reshape(h // tile, tile, w // tile, tile).sum(axis=(1, 3))


def simulate_frame(
    frame: EventFrame | np.ndarray,
    hw: HwArrayConfig,
    steps: int = 1,
    trace: list | None = None,
) -> OmsFrame:
    """Integrate one binary frame on every tile for ``steps`` steps.

    A tile spikes if its node level exceeds the trip point after any step.
    When ``trace`` is a list, ``(tile_id, step, v)`` rows are appended.
    """
    grid = frame.grid if isinstance(frame, EventFrame) else np.asarray(frame)
    if grid.shape != (hw.height, hw.width):
        raise ValidationError(f"frame {grid.shape} does not match array {(hw.height, hw.width)}")
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    active = grid.astype(bool)
    n_center = _tile_sums(active & (hw.roles == PixelRole.CENTER), hw.tile_side)
    n_surround = _tile_sums(active & (hw.roles == PixelRole.SURROUND), hw.tile_side)
    delta = hw.alpha * n_center - hw.beta * n_surround
    trip = hw.trip + TIE_GUARD
    v = np.zeros(n_center.shape)
    spikes = np.zeros(n_center.shape, dtype=bool)
    for step in range(1, steps + 1):
        v = np.clip(v + delta - hw.leak_per_step, 0.0, 1.0)
        spikes |= v > trip
        if trace is not None:
            trace.extend((tile_id, step, float(val)) for tile_id, val in enumerate(v.ravel()))
    t = frame.t_center_us if isinstance(frame, EventFrame) else None
    return OmsFrame(spikes, hw.equivalent_oms_config(), grid.shape, t)


def trace_to_csv(trace: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tile_id", "step", "v"])
    writer.writerows((tile, step, f"{v:.9f}") for tile, step, v in trace)
    return buf.getvalue()


# --- programming plan -------------------------------------------------------
# Each 2x2 unit cell carries four EN_C/S bits (0 = center, pixel tied to VDD;
# 1 = surround, tied to GND; null = pixel disabled), the east/south
# transmission-gate enables that merge it with neighbors into one tile, and
# an output enable set on the top-left cell of each tile.

_ROLE_TO_BIT = {PixelRole.CENTER: 0, PixelRole.SURROUND: 1, PixelRole.OFF: None}
_BIT_TO_ROLE = {0: PixelRole.CENTER, 1: PixelRole.SURROUND, None: PixelRole.OFF}


def programming_plan(hw: HwArrayConfig) -> dict[str, Any]:
    """Serializable NVM programming plan, unit cells in row-major order."""
    cells_y, cells_x = hw.height // UNIT_CELL, hw.width // UNIT_CELL
    per_tile = hw.tile_side // UNIT_CELL
    cells = []
    for cy in range(cells_y):
        for cx in range(cells_x):
            block = hw.roles[cy * 2 : cy * 2 + 2, cx * 2 : cx * 2 + 2].ravel()
            cells.append(
                {
                    "cell_id": cy * cells_x + cx,
                    "role_bits": [_ROLE_TO_BIT[PixelRole(int(r))] for r in block],
                    "gate_enables": {
                        "east": cx + 1 < cells_x and (cx + 1) % per_tile != 0,
                        "south": cy + 1 < cells_y and (cy + 1) % per_tile != 0,
                        "output": cx % per_tile == 0 and cy % per_tile == 0,
                    },
                }
            )
    return {
        "format": PLAN_FORMAT,
        "ordering": "row-major by unit cell",
        "width": hw.width,
        "height": hw.height,
        "unit_cell": UNIT_CELL,
        "alpha": hw.alpha,
        "beta": hw.beta,
        "leak_per_step": hw.leak_per_step,
        "trip_setting": hw.trip_setting,
        "cells": cells,
    }


def plan_from_json(text: str) -> dict[str, Any]:
    plan = json.loads(text)
    if plan.get("format") != PLAN_FORMAT:
        raise ValidationError(f"not a programming plan (format={plan.get('format')!r})")
    return plan


def _plan_tile_side(gates: np.ndarray, cells_y: int, cells_x: int) -> int:
    """Tile side in unit cells, recovered from the gate pattern."""
    east, south = gates[..., 0], gates[..., 1]
    run = 1
    while run < cells_x and east[0, run - 1]:
        run += 1
    if cells_x % run or cells_y % run:
        raise ValidationError(f"gate pattern implies {run}-cell tiles that do not divide the array")
    cy, cx = np.mgrid[0:cells_y, 0:cells_x]
    want_east = (cx + 1 < cells_x) & ((cx + 1) % run != 0)
    want_south = (cy + 1 < cells_y) & ((cy + 1) % run != 0)
    want_out = (cx % run == 0) & (cy % run == 0)
    if not (np.array_equal(east, want_east) and np.array_equal(south, want_south)
            and np.array_equal(gates[..., 2], want_out)):
        raise ValidationError("transmission gates do not form square non-overlapping tiles")
    return run


def plan_to_config(plan: dict[str, Any]) -> HwArrayConfig:
    """Rebuild the array configuration a programming plan encodes."""
    w, h = int(plan["width"]), int(plan["height"])
    cells_y, cells_x = h // UNIT_CELL, w // UNIT_CELL
    cells = sorted(plan["cells"], key=lambda c: c["cell_id"])
    if [c["cell_id"] for c in cells] != list(range(cells_y * cells_x)):
        raise ValidationError("plan must list every unit cell exactly once")
    roles = np.zeros((h, w), dtype=np.int8)
    gates = np.zeros((cells_y, cells_x, 3), dtype=bool)
    for c in cells:
        cy, cx = divmod(c["cell_id"], cells_x)
        bits = [_BIT_TO_ROLE[b] for b in c["role_bits"]]
        roles[cy * 2 : cy * 2 + 2, cx * 2 : cx * 2 + 2] = np.array(bits, dtype=np.int8).reshape(2, 2)
        g = c["gate_enables"]
        gates[cy, cx] = (g["east"], g["south"], g["output"])
    tile = _plan_tile_side(gates, cells_y, cells_x) * UNIT_CELL
    first = roles[:tile, :tile]
    if not np.array_equal(roles, np.tile(first, (h // tile, w // tile))):
        raise ValidationError("tiles are not programmed identically")
    ys, xs = np.nonzero(first == PixelRole.CENTER)
    if ys.size == 0:
        raise ValidationError("tile has no center pixels")
    offset, side = int(ys.min()), int(ys.max() - ys.min() + 1)
    if int(xs.min()) != offset or int(xs.max() - xs.min() + 1) != side:
        raise ValidationError("center region is not a square block on the tile diagonal")
    if not np.array_equal(first, _tile_roles(tile, offset, side)):
        raise ValidationError("center region is not a solid square surrounded by surround pixels")
    return HwArrayConfig(
        width=w,
        height=h,
        roles=roles,
        tile_side=tile,
        center_offset=offset,
        center_side=side,
        alpha=float(plan["alpha"]),
        beta=float(plan["beta"]),
        leak_per_step=float(plan["leak_per_step"]),
        trip_setting=int(plan["trip_setting"]),
    )


def verify_plan(plan: dict[str, Any], hw: HwArrayConfig) -> None:
    """Raise unless ``plan`` round-trips to exactly ``hw``'s array state."""
    back = plan_to_config(plan)
    mismatched = [
        name
        for name in ("width", "height", "tile_side", "center_offset", "center_side",
                     "alpha", "beta", "leak_per_step", "trip_setting")
        if getattr(back, name) != getattr(hw, name)
    ]
    if not np.array_equal(back.roles, hw.roles):
        mismatched.append("roles")
    if mismatched:
        raise ValidationError(f"programming plan does not round-trip: {', '.join(mismatched)}")
