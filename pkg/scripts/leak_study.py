"""Node-level traces of one 8x8 tile for growing surround activity and leak.

Prints the per-step level ``v`` of a tile with all 16 center pixels active
and 0, 8, 16, ... active surround pixels, then the spike count of the whole
frame as leak grows.  ``--csv`` writes the raw ``(tile_id, step, v)`` trace.
"""

import argparse
from pathlib import Path

import numpy as np

from omseg.events import Geometry
from omseg.hardware import PixelRole, build_array_config, simulate_frame, trace_to_csv
from omseg.metrics import format_table
from omseg.oms import OmsConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=8)
    ap.add_argument("--leak", type=float, default=0.05)
    ap.add_argument("--csv", type=Path)
    args = ap.parse_args()

    surround_counts = list(range(0, 49, 8))
    cfg = OmsConfig(center_side=4, surround_side=8, stride=8, kernel_kind="uniform", tau=0.69)
    geo = Geometry(8 * len(surround_counts), 8)
    hw = build_array_config(cfg, geo, leak_per_step=args.leak)
    tile_roles = hw.roles[:8, :8]
    surround_idx = np.flatnonzero(tile_roles == PixelRole.SURROUND)
    grid = np.zeros(geo.shape, bool)
    for t, ns in enumerate(surround_counts):
        tile = tile_roles == PixelRole.CENTER
        tile.flat[surround_idx[:ns]] = True
        grid[:, 8 * t : 8 * t + 8] = tile

    trace: list = []
    out = simulate_frame(grid, hw, steps=args.steps, trace=trace)
    v = np.array([val for _, _, val in trace]).reshape(args.steps, -1)
    rows = [[ns] + v[:, t].tolist() + [str(bool(out.grid[0, t]))] for t, ns in enumerate(surround_counts)]
    headers = ["surround active"] + [f"v{s + 1}" for s in range(args.steps)] + ["spike"]
    print(format_table(headers, rows, f"node level per step, leak {args.leak}, trip {hw.trip:.3f}"))

    rng = np.random.default_rng(0)
    frames = [rng.random((64, 64)) < rng.uniform(0.05, 0.5) for _ in range(50)]
    big = build_array_config(cfg.replace(tau=0.48), Geometry(64, 64))
    leak_rows = []
    for leak in np.linspace(0.0, 0.45, 10):
        n = sum(int(simulate_frame(f, big.with_(leak_per_step=float(leak)), steps=3).grid.sum()) for f in frames)
        leak_rows.append([float(leak), n])
    print(format_table(["leak per step", "spikes"], leak_rows, "spike count vs leak (3 steps)"))

    if args.csv:
        args.csv.write_text(trace_to_csv(trace))


if __name__ == "__main__":
    main()
