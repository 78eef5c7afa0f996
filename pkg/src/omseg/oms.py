"""Center/surround object-motion-sensitivity computation on binary frames.

Both kernels are normalized to sum to one, so each convolution is a
weighted mean of the binary input.  A spike is emitted where the center
mean exceeds the surround mean by more than ``tau``.  Pixels outside the
frame count as inactive (zero padding).

Kernel placement is controlled by ``OmsConfig.anchor``:

* ``"center"`` -- each kernel is centered on the sampled pixel.  Even sides
  have no middle cell, so the top-left cell sits at ``y - (side/2 - 1)``.
* ``"tile"`` -- the surround window's top-left cell is the sampled pixel and
  the center window sits inside it at the same relative position as above.
  With ``stride == surround_side`` the surround windows tile the frame,
  which is the geometry of the compute array in :mod:`omseg.hardware`.
* ``"auto"`` (default) -- ``"tile"`` when ``stride == surround_side``,
  ``"center"`` otherwise.

Output cell ``(r, c)`` always samples pixel ``(r * stride, c * stride)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Literal

import numpy as np

from .errors import ValidationError
from .events import EventFrame

KernelKind = Literal["gaussian", "uniform"]
Anchor = Literal["auto", "center", "tile"]
KERNEL_KINDS = ("gaussian", "uniform")
ANCHORS = ("auto", "center", "tile")
# "larger than tau" must exceed tau by more than float roundoff, so exact
# rational ties resolve the same way in every evaluation order
TIE_GUARD = 1e-12


@dataclass(frozen=True)
class Kernel:
    kind: str
    side: int
    weights: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class OmsConfig:
    """Tunable OMS parameters; defaults are the reference baseline."""

    center_side: int = 4
    surround_side: int = 8
    stride: int = 1
    tau: float = 0.96
    window_ms: float = 20.0
    kernel_kind: str = "gaussian"
    gaussian_sigma_ratio: float = 0.5
    anchor: str = "auto"

    def __post_init__(self) -> None:
        problems = []
        if not 1 <= self.center_side < self.surround_side:
            problems.append(
                f"need 1 <= center_side < surround_side, got {self.center_side}, {self.surround_side}"
            )
        if not 1 <= self.stride <= self.surround_side:
            problems.append(f"need 1 <= stride <= surround_side, got stride {self.stride}")
        if not 0 < self.tau < 1:
            problems.append(f"tau must lie in (0, 1), got {self.tau}")
        if not self.window_ms > 0:
            problems.append(f"window_ms must be positive, got {self.window_ms}")
        if self.kernel_kind not in KERNEL_KINDS:
            problems.append(f"kernel_kind must be one of {KERNEL_KINDS}, got {self.kernel_kind!r}")
        if not self.gaussian_sigma_ratio > 0:
            problems.append("gaussian_sigma_ratio must be positive")
        if self.anchor not in ANCHORS:
            problems.append(f"anchor must be one of {ANCHORS}, got {self.anchor!r}")
        if problems:
            raise ValidationError("; ".join(problems))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "OmsConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"unknown OmsConfig fields: {', '.join(unknown)}")
        return cls(**data)

    def replace(self, **changes: Any) -> "OmsConfig":
        return OmsConfig.from_dict({**self.to_dict(), **changes})

    @property
    def resolved_anchor(self) -> str:
        if self.anchor == "auto":
            return "tile" if self.stride == self.surround_side else "center"
        return self.anchor

    def kernel_offsets(self) -> tuple[int, int]:
        """Top-left offsets (center, surround) of each kernel from the sampled pixel."""
        center = -((self.center_side - 1) // 2)
        surround = -((self.surround_side - 1) // 2)
        if self.resolved_anchor == "tile":
            return center - surround, 0
        return center, surround


@dataclass(frozen=True)
class OmsFrame:
    grid: np.ndarray
    config: OmsConfig
    input_shape: tuple[int, int]
    t_center_us: float | None = None

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @property
    def density(self) -> float:
        return float(self.grid.mean()) if self.grid.size else 0.0

    def block_offset(self) -> int:
        """Start of the full-resolution block each output cell stands for."""
        s = self.config.stride
        surround_offset = self.config.kernel_offsets()[1]
        return surround_offset + (self.config.surround_side - s) // 2

    def upsample(self) -> np.ndarray:
        return upsample_to_input(self.grid, self.config.stride, self.input_shape, self.block_offset())


def make_kernel(kind: str, side: int, sigma_ratio: float = 0.5) -> Kernel:
    if side < 1:
        raise ValidationError(f"kernel side must be >= 1, got {side}")
    if kind == "uniform":
        weights = np.full((side, side), 1.0 / (side * side))
    elif kind == "gaussian":
        if not sigma_ratio > 0:
            raise ValidationError("sigma_ratio must be positive")
        sigma = sigma_ratio * side / 2.0
        d = np.arange(side) - (side - 1) / 2.0
        sq = d[:, None] ** 2 + d[None, :] ** 2
        weights = np.exp(-sq / (2.0 * sigma * sigma))
        weights /= weights.sum()
    else:
        raise ValidationError(f"unknown kernel kind {kind!r}")
    weights.setflags(write=False)
    return Kernel(kind, side, weights)


def output_shape(input_shape: tuple[int, int], stride: int) -> tuple[int, int]:
    h, w = input_shape
    return (-(-h // stride), -(-w // stride))


def _as_grid(frame: EventFrame | np.ndarray) -> np.ndarray:
    grid = frame.grid if isinstance(frame, EventFrame) else np.asarray(frame)
    if grid.ndim != 2:
        raise ValidationError(f"frame must be 2-D, got shape {grid.shape}")
    return grid


def convolve_mean(
    frame: EventFrame | np.ndarray,
    kernel: Kernel,
    stride: int = 1,
    offset: int | None = None,
) -> np.ndarray:
    """Weighted mean of the zero-padded input under ``kernel`` at each sampled pixel.

    ``offset`` is the kernel's top-left position relative to the sampled
    pixel along both axes; by default the kernel is centered.
    """
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")
    grid = _as_grid(frame).astype(np.float64)
    side = kernel.side
    if offset is None:
        offset = -((side - 1) // 2)
    h, w = grid.shape
    oh, ow = output_shape((h, w), stride)
    pad_lo = max(0, -offset)
    pad_hi_y = max(0, (oh - 1) * stride + offset + side - h)
    pad_hi_x = max(0, (ow - 1) * stride + offset + side - w)
    padded = np.pad(grid, ((pad_lo, pad_hi_y), (pad_lo, pad_hi_x)))
    base = pad_lo + offset
    span_y = (oh - 1) * stride + 1
    span_x = (ow - 1) * stride + 1
    out = np.zeros((oh, ow))
    for i in range(side):
        rows = padded[base + i : base + i + span_y : stride]
        for j in range(side):
            out += kernel.weights[i, j] * rows[:, base + j : base + j + span_x : stride]
    return out


def _check_frame(grid: np.ndarray, config: OmsConfig) -> None:
    if min(grid.shape) < config.surround_side:
        raise ValidationError(
            f"frame {grid.shape[1]}x{grid.shape[0]} smaller than "
            f"{config.surround_side}x{config.surround_side} surround kernel"
        )


def center_minus_surround(frame: EventFrame | np.ndarray, config: OmsConfig) -> np.ndarray:
    """Real-valued OMS response before thresholding."""
    grid = _as_grid(frame)
    _check_frame(grid, config)
    center_k = make_kernel(config.kernel_kind, config.center_side, config.gaussian_sigma_ratio)
    surround_k = make_kernel(config.kernel_kind, config.surround_side, config.gaussian_sigma_ratio)
    c_off, s_off = config.kernel_offsets()
    center = convolve_mean(grid, center_k, config.stride, c_off)
    surround = convolve_mean(grid, surround_k, config.stride, s_off)
    return center - surround


def oms_compute(frame: EventFrame | np.ndarray, config: OmsConfig) -> OmsFrame:
    grid = _as_grid(frame)
    spikes = center_minus_surround(grid, config) > config.tau + TIE_GUARD
    t = frame.t_center_us if isinstance(frame, EventFrame) else None
    return OmsFrame(spikes, config, grid.shape, t)


def oms_reference(frame: EventFrame | np.ndarray, config: OmsConfig) -> OmsFrame:
    """Naive per-cell OMS used as an oracle for :func:`oms_compute`.

    Shares nothing with the vectorized path: weights are recomputed in
    scalar arithmetic and each window is summed with ``math.fsum``.
    """
    grid = _as_grid(frame)
    _check_frame(grid, config)
    rows = grid.astype(bool).tolist()
    h, w = len(rows), len(rows[0])
    cen, surr, s = config.center_side, config.surround_side, config.stride

    def weights(side: int) -> list[list[float]]:
        if config.kernel_kind == "uniform":
            return [[1.0 / (side * side)] * side for _ in range(side)]
        sigma = config.gaussian_sigma_ratio * side / 2.0
        mid = (side - 1) / 2.0
        raw = [
            [math.exp(-((i - mid) ** 2 + (j - mid) ** 2) / (2.0 * sigma * sigma)) for j in range(side)]
            for i in range(side)
        ]
        total = math.fsum(v for row in raw for v in row)
        return [[v / total for v in row] for row in raw]

    wc, ws = weights(cen), weights(surr)
    tiled = config.anchor == "tile" or (config.anchor == "auto" and s == surr)
    if tiled:
        s_top = 0
        c_top = (surr - 1) // 2 - (cen - 1) // 2
    else:
        s_top = -((surr - 1) // 2)
        c_top = -((cen - 1) // 2)

    def window_mean(y0: int, x0: int, wk: list[list[float]]) -> float:
        terms = []
        for i, wrow in enumerate(wk):
            y = y0 + i
            if not 0 <= y < h:
                continue
            row = rows[y]
            for j, wv in enumerate(wrow):
                x = x0 + j
                if 0 <= x < w and row[x]:
                    terms.append(wv)
        return math.fsum(terms)

    oh, ow = -(-h // s), -(-w // s)
    out = np.zeros((oh, ow), dtype=bool)
    for r in range(oh):
        y = r * s
        for c in range(ow):
            x = c * s
            diff = window_mean(y + c_top, x + c_top, wc) - window_mean(y + s_top, x + s_top, ws)
            out[r, c] = diff > config.tau + TIE_GUARD
    t = frame.t_center_us if isinstance(frame, EventFrame) else None
    return OmsFrame(out, config, (h, w), t)


def upsample_to_input(
    grid: np.ndarray, stride: int, shape: tuple[int, int], offset: int = 0
) -> np.ndarray:
    """Nearest-neighbor block fill of a strided map back to ``shape``.

    Cell ``(r, c)`` covers pixels starting at ``r * stride + offset``; pixels
    outside every block take the nearest edge cell.
    """
    grid = np.asarray(grid)
    oh, ow = grid.shape
    rows = np.clip((np.arange(shape[0]) - offset) // stride, 0, oh - 1)
    cols = np.clip((np.arange(shape[1]) - offset) // stride, 0, ow - 1)
    return grid[np.ix_(rows, cols)]
