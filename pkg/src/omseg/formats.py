"""On-disk formats: event text files, PBM/PGM bitmaps and JSON manifests.

* Events: one ``t x y polarity`` line per event, ``#`` comments allowed.
  Written with integer microsecond timestamps and polarity in {-1, 1}.
* Masks and OMS frames: netpbm bitmaps.  ``P1``/``P4`` (PBM) and
  ``P2``/``P5`` (PGM) are read; ``P1`` is written.  Any nonzero pixel is
  active (for PBM, 1 means active).
* Mask manifest: a JSON list of ``{"path", "t_capture_us"}`` entries, paths
  relative to the manifest's directory.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .events import Geometry, GroundTruthMask, parse_event_stream
from .oms import OmsFrame


def write_events(path: str | Path, events: np.ndarray) -> None:
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        fh.write("# t_us x y polarity\n")
        for t, x, y, p in zip(events["t"].tolist(), events["x"].tolist(),
                              events["y"].tolist(), events["p"].tolist()):
            fh.write(f"{t} {x} {y} {p}\n")


def read_events(path: str | Path, geometry: Geometry) -> np.ndarray:
    with Path(path).open() as fh:
        return parse_event_stream(fh, geometry)


# --- netpbm ----------------------------------------------------------------

def _tokens(data: bytes, start: int, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out, i, n = [], start, len(data)
    while len(out) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        if j == i:
            raise ValidationError("truncated netpbm header")
        out.append(data[i:j])
        i = j
    return out, i


def decode_netpbm(data: bytes) -> np.ndarray:
    """Decode a PBM or PGM image into a boolean activity grid."""
    magic = data[:2]
    if magic not in (b"P1", b"P2", b"P4", b"P5"):
        raise ValidationError(f"unsupported image format {magic!r}")
    try:
        return _decode_netpbm(data, magic)
    except ValueError as exc:  # bad header numbers, short raster, non-ascii text
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed netpbm image: {exc}") from None


def _decode_netpbm(data: bytes, magic: bytes) -> np.ndarray:
    ntok = 2 if magic in (b"P1", b"P4") else 3
    header, pos = _tokens(data, 2, ntok)
    w, h = int(header[0]), int(header[1])
    if magic == b"P1":
        body = "".join(
            line.split("#", 1)[0] for line in data[pos:].decode("ascii").splitlines()
        )
        digits = [c for c in body if c in "01"]
        if len(digits) < w * h:
            raise ValidationError("P1 bitmap has too few pixels")
        return np.array([c == "1" for c in digits[: w * h]], dtype=bool).reshape(h, w)
    if magic == b"P4":
        row_bytes = (w + 7) // 8
        raw = np.frombuffer(data, dtype=np.uint8, count=row_bytes * h, offset=pos + 1)
        return np.unpackbits(raw.reshape(h, row_bytes), axis=1)[:, :w].astype(bool)
    maxval = int(header[2])
    if magic == b"P2":
        body = " ".join(line.split("#", 1)[0] for line in data[pos:].decode("ascii").splitlines())
        values = np.array(body.split()[: w * h], dtype=np.int64)
        if values.size < w * h:
            raise ValidationError("P2 image has too few pixels")
        return values.reshape(h, w) != 0
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    raw = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos + 1)
    return raw.reshape(h, w) != 0


def read_bitmap(path: str | Path) -> np.ndarray:
    return decode_netpbm(Path(path).read_bytes())


def encode_pbm(grid: np.ndarray) -> bytes:
    grid = np.asarray(grid, dtype=bool)
    h, w = grid.shape
    rows = "\n".join(" ".join("1" if v else "0" for v in row) for row in grid.tolist())
    return f"P1\n{w} {h}\n{rows}\n".encode("ascii")


def write_bitmap(path: str | Path, grid: np.ndarray) -> None:
    Path(path).write_bytes(encode_pbm(grid))


# --- masks ------------------------------------------------------------------

def write_masks(out_dir: str | Path, masks: Sequence[GroundTruthMask], stem: str = "mask") -> Path:
    """Write masks as ``P1`` bitmaps plus ``masks.json``; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, m in enumerate(masks):
        name = f"{stem}_{i:05d}.pbm"
        write_bitmap(out_dir / name, m.grid)
        entries.append({"path": name, "t_capture_us": int(round(m.t_capture_us))})
    manifest = out_dir / "masks.json"
    manifest.write_text(json.dumps(entries, indent=1) + "\n")
    return manifest


def read_masks(manifest_path: str | Path) -> list[GroundTruthMask]:
    manifest_path = Path(manifest_path)
    entries = json.loads(manifest_path.read_text())
    if isinstance(entries, dict):
        entries = entries.get("masks", [])
    masks = []
    for e in entries:
        try:
            rel, t = e["path"], float(e["t_capture_us"])
        except (KeyError, TypeError):
            raise ValidationError(f"{manifest_path}: entries need 'path' and 't_capture_us'") from None
        masks.append(GroundTruthMask(read_bitmap(manifest_path.parent / rel), t))
    return masks


def mask_geometry(masks: Sequence[GroundTruthMask]) -> Geometry:
    if not masks:
        raise ValidationError("mask manifest is empty; cannot infer sensor geometry")
    shapes = {m.grid.shape for m in masks}
    if len(shapes) != 1:
        raise ValidationError(f"masks have inconsistent shapes {sorted(shapes)}")
    h, w = shapes.pop()
    return Geometry(w, h)


# --- OMS frames ---------------------------------------------------------------

def write_oms_frames(out_dir: str | Path, frames: Sequence[OmsFrame], extra: dict | None = None) -> Path:
    """Dump spike maps as ``P1`` bitmaps with an ``oms_frames.json`` sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, f in enumerate(frames):
        name = f"oms_{i:05d}.pbm"
        write_bitmap(out_dir / name, f.grid)
        entries.append({"path": name, "t_center_us": f.t_center_us, "spikes": int(f.grid.sum())})
    sidecar = {
        "config": frames[0].config.to_dict() if frames else None,
        "input_shape": list(frames[0].input_shape) if frames else None,
        "frames": entries,
        **(extra or {}),
    }
    path = out_dir / "oms_frames.json"
    path.write_text(json.dumps(sidecar, indent=1) + "\n")
    return path


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


# --- EV-IMO style import ---------------------------------------------------------

def read_mask_image(path: str | Path) -> np.ndarray:
    """Read a mask from netpbm or (with Pillow installed) PNG and friends."""
    path = Path(path)
    head = path.read_bytes()[:2]
    if head in (b"P1", b"P2", b"P4", b"P5"):
        return read_bitmap(path)
    try:
        from PIL import Image
    except ImportError:  # pragma: no cover - depends on environment
        raise ValidationError(f"{path}: reading non-netpbm masks requires Pillow") from None
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim == 3:
        arr = arr.max(axis=2)
    return arr != 0


def read_mask_index(path: str | Path) -> list[tuple[float, Path]]:
    """Parse ``t_seconds relative/path`` lines (``#`` comments allowed)."""
    path = Path(path)
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split(None, 1)
        if len(parts) != 2:
            raise ValidationError(f"{path}:{lineno}: expected 't_seconds path'")
        try:
            t = float(parts[0])
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: bad timestamp {parts[0]!r}") from None
        out.append((t, path.parent / parts[1].strip()))
    return sorted(out, key=lambda item: item[0])


def import_evimo(
    events_txt: str | Path, mask_index: str | Path, out_dir: str | Path
) -> tuple[Path, Path, Geometry]:
    """Convert EV-IMO-style text events and mask images to native files."""
    entries = read_mask_index(mask_index)
    masks = [GroundTruthMask(read_mask_image(p), round(t * 1e6)) for t, p in entries]
    geometry = mask_geometry(masks)
    events = read_events(events_txt, geometry)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    events_path = out_dir / "events.txt"
    write_events(events_path, events)
    manifest = write_masks(out_dir / "masks", masks)
    return events_path, manifest, geometry


def describe_files(paths: Iterable[str | Path]) -> dict[str, str]:
    return {str(p): sha256_file(p) for p in paths if Path(p).is_file()}
