"""Synthetic DVS scenes with exact ground-truth motion masks.

The scene is a sparse random texture fixed in the world, seen by a camera
translating at ``ego_velocity``, plus rectangular objects moving at their
own world velocity.  In image space the background drifts at
``-ego_velocity`` and each object at ``velocity - ego_velocity``.

The scene is rendered at sub-steps short enough that nothing moves more
than one pixel per step.  A pixel whose rendered level changes between
steps has had a contrast edge cross it and fires events: on average
``event_rate_per_edge / speed`` of them (the edge dwells ``1 / speed``
seconds on the pixel), and always at least one.  Polarity follows the sign
of the level change.  Uniform background noise is added on top.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ValidationError
from .events import EVENT_DTYPE, Geometry, GroundTruthMask

RNG_ALGORITHM = "numpy.random.Generator(PCG64)"

# rendered intensity levels; background texture uses 1..3
_OBJECT_FILL = 5
_OBJECT_DOT = 7


@dataclass(frozen=True)
class ObjectSpec:
    size: tuple[int, int]
    start: tuple[float, float]
    velocity: tuple[float, float]

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ObjectSpec":
        return cls(tuple(d["size"]), tuple(d["start"]), tuple(d.get("velocity", (0.0, 0.0))))


@dataclass(frozen=True)
class SceneSpec:
    geometry: Geometry = Geometry(128, 128)
    duration_ms: float = 600.0
    bg_texture_density: float = 0.2
    ego_velocity: tuple[float, float] = (0.0, 0.0)
    objects: tuple[ObjectSpec, ...] = ()
    event_rate_per_edge: float = 200.0
    noise_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        problems = []
        if self.geometry.width < 1 or self.geometry.height < 1:
            problems.append("geometry must be at least 1x1")
        if not self.duration_ms > 0:
            problems.append("duration_ms must be positive")
        if not 0 <= self.bg_texture_density <= 1:
            problems.append("bg_texture_density must lie in [0, 1]")
        if self.event_rate_per_edge < 0 or self.noise_rate < 0:
            problems.append("rates must be non-negative")
        for i, ob in enumerate(self.objects):
            w, h = ob.size
            x, y = ob.start
            if w < 1 or h < 1:
                problems.append(f"object {i} has empty size {ob.size}")
            if not (0 <= x and 0 <= y and x + w <= self.geometry.width and y + h <= self.geometry.height):
                problems.append(f"object {i} starts outside the {self.geometry.width}x{self.geometry.height} frame")
        if problems:
            raise ValidationError("; ".join(problems))

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["geometry"] = {"width": self.geometry.width, "height": self.geometry.height}
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SceneSpec":
        d = dict(d)
        geo = d.pop("geometry", {"width": 128, "height": 128})
        if isinstance(geo, dict):
            geo = Geometry(int(geo["width"]), int(geo["height"]))
        else:
            geo = Geometry(*geo)
        objects = tuple(ObjectSpec.from_dict(o) for o in d.pop("objects", []))
        if "ego_velocity" in d:
            d["ego_velocity"] = tuple(d["ego_velocity"])
        try:
            return cls(geometry=geo, objects=objects, **d)
        except TypeError as exc:
            raise ValidationError(f"bad scene spec: {exc}") from None

    @classmethod
    def from_json(cls, path: str | Path) -> "SceneSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class _Layer:
    texture: np.ndarray
    start: np.ndarray
    velocity: np.ndarray  # image-space px/s
    speed: float = field(init=False)

    def __post_init__(self) -> None:
        self.speed = float(np.abs(self.velocity).max())

    def origin(self, t_s: float) -> tuple[int, int]:
        x, y = np.floor(self.start + self.velocity * t_s + 0.5).astype(int)
        return int(x), int(y)


def _paste(canvas: np.ndarray, owner: np.ndarray, tex: np.ndarray, x0: int, y0: int, tag: int) -> None:
    h, w = canvas.shape
    th, tw = tex.shape
    ys, ye = max(0, y0), min(h, y0 + th)
    xs, xe = max(0, x0), min(w, x0 + tw)
    if ys >= ye or xs >= xe:
        return
    canvas[ys:ye, xs:xe] = tex[ys - y0 : ye - y0, xs - x0 : xe - x0]
    owner[ys:ye, xs:xe] = tag


def object_footprint(spec: SceneSpec, t_s: float) -> np.ndarray:
    """Union of the (clipped) object rectangles at time ``t_s``."""
    mask = np.zeros(spec.geometry.shape, dtype=bool)
    ego = np.asarray(spec.ego_velocity, dtype=float)
    for ob in spec.objects:
        w, h = ob.size
        vel = np.asarray(ob.velocity, dtype=float) - ego
        x0, y0 = np.floor(np.asarray(ob.start, dtype=float) + vel * t_s + 0.5).astype(int)
        mask[max(0, y0) : max(0, y0 + h), max(0, x0) : max(0, x0 + w)] = True
    return mask


def mask_times_us(spec: SceneSpec, mask_rate_hz: float) -> list[int]:
    if not mask_rate_hz > 0:
        raise ValidationError(f"mask_rate_hz must be positive, got {mask_rate_hz}")
    n = int(math.floor(spec.duration_ms / 1000.0 * mask_rate_hz + 1e-9)) + 1
    return [int(round(j / mask_rate_hz * 1e6)) for j in range(n)]


def gen_scene(spec: SceneSpec, mask_rate_hz: float = 40.0) -> tuple[np.ndarray, list[GroundTruthMask]]:
    """Render ``spec`` into a sorted event array and masks at ``mask_rate_hz``."""
    rng = np.random.default_rng(spec.seed)
    geo = spec.geometry
    h, w = geo.shape
    duration_s = spec.duration_ms / 1000.0
    ego = np.asarray(spec.ego_velocity, dtype=float)
    times = mask_times_us(spec, mask_rate_hz)

    # background canvas wide enough for the whole ego trajectory
    pad = int(math.ceil(np.abs(ego).max() * duration_s)) + 2
    bg_levels = rng.integers(1, 4, size=(h + 2 * pad, w + 2 * pad))
    bg_tex = np.where(rng.random(bg_levels.shape) < spec.bg_texture_density, bg_levels, 0)
    background = _Layer(bg_tex, np.array([-pad, -pad], dtype=float), -ego)

    layers = []
    for ob in spec.objects:
        ow, oh = ob.size
        tex = np.full((oh, ow), _OBJECT_FILL)
        tex[rng.random((oh, ow)) < spec.bg_texture_density] = _OBJECT_DOT
        layers.append(_Layer(tex, np.asarray(ob.start, dtype=float), np.asarray(ob.velocity, float) - ego))

    speeds = [background.speed] + [lay.speed for lay in layers]
    max_speed = max(speeds)
    dt_s = min(1e-3, 1.0 / max_speed) if max_speed > 0 else 1e-3
    dt_us = max(1, int(dt_s * 1e6))
    n_steps = int(math.ceil(duration_s * 1e6 / dt_us))
    speed_of = np.asarray(speeds)

    def render(t_s: float) -> tuple[np.ndarray, np.ndarray]:
        canvas = np.zeros((h, w), dtype=np.int8)
        owner = np.zeros((h, w), dtype=np.int8)
        x0, y0 = background.origin(t_s)
        _paste(canvas, owner, background.texture, x0, y0, 0)
        for tag, lay in enumerate(layers, start=1):
            x0, y0 = lay.origin(t_s)
            _paste(canvas, owner, lay.texture, x0, y0, tag)
        return canvas, owner

    chunks = []
    prev, prev_owner = render(0.0)
    for k in range(1, n_steps + 1):
        t_prev_us = (k - 1) * dt_us
        cur, owner = render(k * dt_us / 1e6)
        changed = np.flatnonzero(cur != prev)
        if changed.size and spec.event_rate_per_edge > 0:
            speed = np.maximum(speed_of[owner.ravel()[changed]], speed_of[prev_owner.ravel()[changed]])
            mean = np.where(speed > 0, spec.event_rate_per_edge / np.maximum(speed, 1e-12), 1.0)
            counts = 1 + rng.poisson(np.maximum(mean - 1.0, 0.0))
            pix = np.repeat(changed, counts)
            sign = np.sign(cur.ravel()[changed].astype(int) - prev.ravel()[changed].astype(int))
            chunk = np.empty(pix.size, dtype=EVENT_DTYPE)
            chunk["t"] = t_prev_us + rng.integers(1, dt_us + 1, size=pix.size)
            chunk["y"], chunk["x"] = np.divmod(pix, w)
            chunk["p"] = np.repeat(sign, counts)
            chunks.append(chunk)
        prev, prev_owner = cur, owner

    if spec.noise_rate > 0:
        total_us = n_steps * dt_us
        n_noise = rng.poisson(spec.noise_rate * geo.pixels * duration_s)
        noise = np.empty(n_noise, dtype=EVENT_DTYPE)
        noise["t"] = rng.integers(0, total_us, size=n_noise)
        noise["x"] = rng.integers(0, w, size=n_noise)
        noise["y"] = rng.integers(0, h, size=n_noise)
        noise["p"] = rng.choice(np.array([-1, 1], dtype=np.int8), size=n_noise)
        chunks.append(noise)

    events = np.concatenate(chunks) if chunks else np.zeros(0, dtype=EVENT_DTYPE)
    events = events[np.argsort(events["t"], kind="stable")]
    masks = [GroundTruthMask(object_footprint(spec, t / 1e6), float(t)) for t in times]
    return events, masks
