"""Why uniform 4x4/8x8 kernels at tau 0.7 segment almost nothing at stride 1.

A spike needs ``mean(center) - mean(surround) > tau``.  With the center's
16 pixels inside the 64-pixel surround, and ``a`` center plus ``b`` ring
pixels active, the difference is ``a/16 - (a + b)/64``.  This script lists
the (a, b) pairs that spike for several tau values, then measures mIoU on
the synthetic object scene across tau and stride.
"""

import argparse

from omseg.events import Geometry
from omseg.experiments import run_oms
from omseg.metrics import format_table
from omseg.oms import OmsConfig
from omseg.synth import ObjectSpec, SceneSpec, gen_scene


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--taus", type=float, nargs="+", default=[0.1, 0.3, 0.5, 0.7])
    args = ap.parse_args()

    rows = []
    for tau in args.taus:
        pairs = [(a, b) for a in range(17) for b in range(49) if a / 16 - (a + b) / 64 > tau]
        min_a = min((a for a, _ in pairs), default=None)
        max_b = max((b for _, b in pairs), default=None)
        rows.append([tau, len(pairs), min_a, max_b])
    print(format_table(["tau", "spiking (a, b) pairs", "min center active", "max ring active"], rows,
                       "count combinations that spike"))

    spec = SceneSpec(
        geometry=Geometry(128, 128), duration_ms=600.0, bg_texture_density=0.2,
        ego_velocity=(60.0, 20.0), objects=(ObjectSpec((40, 40), (20.0, 44.0), (100.0, 20.0)),), seed=11,
    )
    events, masks = gen_scene(spec, 40.0)
    rows = []
    for tau in args.taus:
        for stride in (1, 8):
            cfg = OmsConfig(stride=stride, tau=tau, kernel_kind="uniform")
            run = run_oms(events, masks, cfg, spec.geometry, jobs=4)
            rows.append([tau, stride, run.report.mean_iou * 100, run.spike_density * 100])
    print(format_table(["tau", "stride", "mIoU(%)", "spike density(%)"], rows, "synthetic object scene"))


if __name__ == "__main__":
    main()
