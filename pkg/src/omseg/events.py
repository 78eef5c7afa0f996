"""DVS event streams and their accumulation into binary activation frames.

Events are held in a numpy structured array with fields ``t`` (microseconds),
``x``, ``y`` and ``p`` (polarity, -1 or +1).  Accumulation discards polarity:
a pixel is active when it fired at least once inside the window.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import BoundsError, EventParseError, ValidationError

EVENT_DTYPE = np.dtype([("t", "<i8"), ("x", "<i4"), ("y", "<i4"), ("p", "i1")])

# first-line timestamps below this, written with a decimal point, are seconds
_SECONDS_CUTOFF = 1e6


class Geometry(NamedTuple):
    width: int
    height: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def pixels(self) -> int:
        return self.width * self.height


class DvsEvent(NamedTuple):
    t: int
    x: int
    y: int
    polarity: int


@dataclass(frozen=True)
class EventFrame:
    grid: np.ndarray
    t_center_us: float
    window_ms: float

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @property
    def density(self) -> float:
        return float(self.grid.mean()) if self.grid.size else 0.0


@dataclass(frozen=True)
class GroundTruthMask:
    grid: np.ndarray
    t_capture_us: float

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]


def empty_events() -> np.ndarray:
    return np.zeros(0, dtype=EVENT_DTYPE)


def events_from_records(records: Iterable[DvsEvent | tuple]) -> np.ndarray:
    """Pack ``(t, x, y, polarity)`` tuples into a structured event array."""
    rows = [tuple(r) for r in records]
    if not rows:
        return empty_events()
    return np.array(rows, dtype=EVENT_DTYPE)


def as_records(events: np.ndarray) -> list[DvsEvent]:
    return [DvsEvent(int(e["t"]), int(e["x"]), int(e["y"]), int(e["p"])) for e in events]


def check_bounds(events: np.ndarray, geometry: Geometry) -> None:
    if events.size == 0:
        return
    bad = (
        (events["x"] < 0)
        | (events["x"] >= geometry.width)
        | (events["y"] < 0)
        | (events["y"] >= geometry.height)
    )
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise BoundsError(
            f"event {i} at (x={int(events['x'][i])}, y={int(events['y'][i])}) "
            f"outside {geometry.width}x{geometry.height} sensor"
        )


def _normalize_polarity(raw: float, lineno: int) -> int:
    if raw == 1:
        return 1
    if raw == 0 or raw == -1:
        return -1
    raise EventParseError(lineno, f"polarity must be one of 0, 1, -1, got {raw:g}")


def parse_event_stream(source: str | Iterable[str], geometry: Geometry) -> np.ndarray:
    """Parse ``t x y polarity`` lines into a time-sorted event array.

    ``source`` is either the full text or an iterable of lines.  Blank lines
    and ``#`` comments are skipped.  Timestamp units are decided once, from
    the first data line: a value with a decimal point below 1e6 means the
    whole stream is in seconds, anything else is integer microseconds.
    """
    lines = source.splitlines() if isinstance(source, str) else source
    seconds: bool | None = None
    rows: list[tuple[int, int, int, int]] = []
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        fields = text.split()
        if len(fields) != 4:
            raise EventParseError(lineno, f"expected 4 fields, got {len(fields)}")
        try:
            t_raw = float(fields[0])
            x_raw, y_raw, p_raw = (float(f) for f in fields[1:])
        except ValueError:
            raise EventParseError(lineno, f"non-numeric field in {text!r}") from None
        if seconds is None:
            seconds = "." in fields[0] and t_raw < _SECONDS_CUTOFF
        if not np.isfinite(t_raw) or t_raw < 0:
            raise EventParseError(lineno, f"timestamp must be non-negative, got {fields[0]}")
        if x_raw != int(x_raw) or y_raw != int(y_raw):
            raise EventParseError(lineno, "pixel coordinates must be integers")
        t_us = int(round(t_raw * 1e6)) if seconds else int(round(t_raw))
        x, y = int(x_raw), int(y_raw)
        if not (0 <= x < geometry.width and 0 <= y < geometry.height):
            raise BoundsError(
                f"line {lineno}: (x={x}, y={y}) outside {geometry.width}x{geometry.height} sensor"
            )
        rows.append((t_us, x, y, _normalize_polarity(p_raw, lineno)))
    events = events_from_records(rows)
    # stable sort keeps file order among equal timestamps
    return events[np.argsort(events["t"], kind="stable")]


def _is_sorted(t: np.ndarray) -> bool:
    return t.size < 2 or bool(np.all(t[1:] >= t[:-1]))


def _window_bounds(t_center_us: float, window_ms: float) -> tuple[float, float]:
    half = window_ms * 1000.0 / 2.0
    return t_center_us - half, t_center_us + half


def _frame_from_slice(events: np.ndarray, geometry: Geometry) -> np.ndarray:
    grid = np.zeros(geometry.shape, dtype=bool)
    if events.size:
        grid[events["y"], events["x"]] = True
    return grid


def accumulate_frame(
    events: np.ndarray, t_center_us: float, window_ms: float, geometry: Geometry
) -> EventFrame:
    """Collapse events in ``[t_center - T/2, t_center + T/2)`` into a binary frame."""
    if not window_ms > 0:
        raise ValidationError(f"window_ms must be positive, got {window_ms}")
    lo, hi = _window_bounds(t_center_us, window_ms)
    t = events["t"]
    if _is_sorted(t):
        sel = events[np.searchsorted(t, lo, side="left") : np.searchsorted(t, hi, side="left")]
    else:
        sel = events[(t >= lo) & (t < hi)]
    check_bounds(sel, geometry)
    return EventFrame(_frame_from_slice(sel, geometry), float(t_center_us), float(window_ms))


def align_frames_to_masks(
    events: np.ndarray,
    masks: Sequence[GroundTruthMask],
    window_ms: float,
    geometry: Geometry | None = None,
) -> list[tuple[EventFrame, GroundTruthMask]]:
    """Build one event frame per mask, centered on the mask capture time."""
    if not masks:
        return []
    times = [m.t_capture_us for m in masks]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValidationError("masks must be sorted by t_capture_us")
    if geometry is None:
        geometry = Geometry(masks[0].width, masks[0].height)
    for m in masks:
        if (m.width, m.height) != (geometry.width, geometry.height):
            raise ValidationError(
                f"mask at t={m.t_capture_us} is {m.width}x{m.height}, "
                f"expected {geometry.width}x{geometry.height}"
            )
    if not _is_sorted(events["t"]):
        events = events[np.argsort(events["t"], kind="stable")]
    return [(accumulate_frame(events, m.t_capture_us, window_ms, geometry), m) for m in masks]
