"""Stride, kernel-size and tau sweeps printed as aligned mIoU tables.

By default a synthetic scene (textured background under ego-motion plus one
moving 40x40 object) is generated.  Pass ``--data DIR`` with a directory
written by ``omseg evimo import`` to sweep real recordings instead.

    python scripts/reproduce_tables.py --out results/
"""

import argparse
from pathlib import Path

from omseg.events import Geometry
from omseg.experiments import run_sweep
from omseg.formats import mask_geometry, read_events, read_masks
from omseg.oms import OmsConfig
from omseg.synth import ObjectSpec, SceneSpec, gen_scene

SCENE = SceneSpec(
    geometry=Geometry(128, 128),
    duration_ms=600.0,
    bg_texture_density=0.2,
    ego_velocity=(60.0, 20.0),
    objects=(ObjectSpec((40, 40), (20.0, 44.0), (100.0, 20.0)),),
    seed=11,
)


def load(data: str | None):
    if data is None:
        events, masks = gen_scene(SCENE, 40.0)
        return events, masks, SCENE.geometry
    root = Path(data)
    masks = read_masks(root / "masks" / "masks.json")
    geo = mask_geometry(masks)
    return read_events(root / "events.txt", geo), masks, geo


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", help="native event/mask directory; default is the synthetic scene")
    ap.add_argument("--kernel", default="gaussian", choices=["gaussian", "uniform"])
    ap.add_argument("--out", type=Path, help="write sweep tables and CSVs here")
    ap.add_argument("--jobs", type=int, default=4)
    args = ap.parse_args()

    events, masks, geo = load(args.data)
    base = OmsConfig(kernel_kind=args.kernel)
    sweeps = {
        "stride": (base, [1, 2, 4, 6, 8]),
        "kernel": (base.replace(tau=0.9), ["3x6", "4x8", "5x10", "12x6"]),
        "tau": (base, [0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 0.96]),
    }
    for vary, (cfg, values) in sweeps.items():
        result = run_sweep(events, masks, cfg, geo, vary, values, jobs=args.jobs)
        table = result.to_table(f"{vary} sweep, {args.kernel} kernels")
        print(table)
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / f"{vary}.txt").write_text(table)
            (args.out / f"{vary}.csv").write_text(result.to_csv())


if __name__ == "__main__":
    main()
