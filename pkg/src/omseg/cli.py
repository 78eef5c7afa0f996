"""``omseg`` command line: synthesis, OMS runs, sweeps, programming plans.

Exit codes: 0 success, 2 validation or feasibility error, 3 I/O error.
Every command writes ``manifest.json`` next to its outputs; it records the
argv, the resolved parameters and SHA-256 digests of inputs and outputs.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .errors import FeasibilityError, ValidationError
from .events import Geometry
from .experiments import ENGINES, SWEEP_DIMENSIONS, parse_sweep_values, run_oms, run_sweep
from .formats import (
    describe_files,
    import_evimo,
    mask_geometry,
    read_bitmap,
    read_events,
    read_masks,
    write_events,
    write_masks,
    write_oms_frames,
)
from .hardware import build_array_config, programming_plan, verify_plan
from .metrics import POLICIES, format_table, mean_iou
from .oms import OmsConfig, OmsFrame
from .synth import RNG_ALGORITHM, SceneSpec, gen_scene

log = logging.getLogger("omseg")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 2, 3


def load_config(path: str | None) -> OmsConfig:
    if path is None:
        return OmsConfig()
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    return OmsConfig.from_dict(data)


def write_manifest(out_dir: Path, command: str, argv: Sequence[str], params: dict[str, Any],
                   inputs: Sequence[str | Path], outputs: Sequence[str | Path]) -> Path:
    manifest = {
        "command": command,
        "argv": list(argv),
        "parameters": params,
        "inputs": describe_files(inputs),
        "outputs": describe_files(outputs),
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, default=str) + "\n")
    return path


def _load_inputs(args) -> tuple[Any, list, Geometry]:
    masks = read_masks(args.masks)
    geometry = mask_geometry(masks)
    events = read_events(args.events, geometry)
    return events, masks, geometry


def cmd_synth(args, argv) -> int:
    spec_path = Path(args.config)
    if not spec_path.is_file():
        raise FileNotFoundError(f"scene spec not found: {spec_path}")
    spec = SceneSpec.from_json(spec_path)
    if args.seed is not None:
        spec = SceneSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    events, masks = gen_scene(spec, args.mask_rate)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    events_path = out / "events.txt"
    write_events(events_path, events)
    manifest = write_masks(out / "masks", masks)
    outputs = [events_path, manifest, *sorted((out / "masks").glob("*.pbm"))]
    params = {"scene": spec.to_dict(), "mask_rate_hz": args.mask_rate, "rng": RNG_ALGORITHM}
    write_manifest(out, "synth", argv, params, [spec_path], outputs)
    log.info("wrote %d events and %d masks to %s", len(events), len(masks), out)
    return EXIT_OK


def cmd_oms(args, argv) -> int:
    config = load_config(args.config)
    events, masks, geometry = _load_inputs(args)
    run = run_oms(events, masks, config, geometry, args.engine, args.jobs, args.policy,
                  args.leak, args.steps)
    out = Path(args.out)
    sidecar = write_oms_frames(out / "frames", run.frames, {"engine": args.engine})
    report = run.report.to_dict() | {
        "engine": args.engine,
        "input_density": run.input_density,
        "spike_density": run.spike_density,
    }
    (out / "report.json").write_text(json.dumps(report, indent=1) + "\n")
    miou = f"{run.report.mean_iou * 100:.2f}" if run.report.defined else "undefined"
    table = format_table(["frames", "mIoU(%)", "input density", "spike density"],
                         [[run.report.frames_evaluated, miou, run.input_density, run.spike_density]])
    (out / "report.txt").write_text(table)
    sys.stdout.write(table)
    outputs = [sidecar, out / "report.json", out / "report.txt", *sorted((out / "frames").glob("*.pbm"))]
    params = {"config": config.to_dict(), "engine": args.engine, "policy": args.policy,
              "leak_per_step": args.leak, "steps": args.steps}
    write_manifest(out, "oms", argv, params, _input_files(args), outputs)
    return EXIT_OK


def _input_files(args) -> list[Path]:
    files = [Path(args.events), Path(args.masks)]
    if getattr(args, "config", None):
        files.append(Path(args.config))
    return files


def cmd_sweep(args, argv) -> int:
    values = parse_sweep_values(args.vary, args.values)
    config = load_config(args.config)
    events, masks, geometry = _load_inputs(args)
    result = run_sweep(events, masks, config, geometry, args.vary, values, args.engine,
                       args.jobs, args.policy)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    title = f"{args.vary} sweep ({args.engine} engine)"
    (out / "sweep.txt").write_text(result.to_table(title))
    (out / "sweep.csv").write_text(result.to_csv())
    (out / "sweep.json").write_text(
        json.dumps({"vary": args.vary, "rows": result.rows, "notes": result.notes}, indent=1) + "\n"
    )
    sys.stdout.write(result.to_table(title))
    params = {"base_config": config.to_dict(), "vary": args.vary, "values": values,
              "engine": args.engine, "policy": args.policy}
    write_manifest(out, "sweep", argv, params, _input_files(args),
                   [out / "sweep.txt", out / "sweep.csv", out / "sweep.json"])
    return EXIT_OK


def cmd_hwplan(args, argv) -> int:
    config = load_config(args.config)
    if args.masks:
        geometry = mask_geometry(read_masks(args.masks))
    elif args.width and args.height:
        geometry = Geometry(args.width, args.height)
    else:
        raise ValidationError("hwplan needs --masks or both --width and --height")
    hw = build_array_config(config, geometry, leak_per_step=args.leak)
    plan = programming_plan(hw)
    verify_plan(plan, hw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "plan.json").write_text(json.dumps(plan, indent=1) + "\n")
    inputs = [args.config] if args.config else []
    write_manifest(out, "hwplan", argv, {"config": config.to_dict(), "geometry": geometry._asdict()},
                   inputs, [out / "plan.json"])
    log.info("programming plan for %d unit cells written to %s", len(plan["cells"]), out)
    return EXIT_OK


def cmd_eval(args, argv) -> int:
    sidecar_path = Path(args.pred)
    sidecar = json.loads(sidecar_path.read_text())
    config = OmsConfig.from_dict(sidecar["config"])
    shape = tuple(sidecar["input_shape"])
    frames = [
        OmsFrame(read_bitmap(sidecar_path.parent / e["path"]), config, shape, e.get("t_center_us"))
        for e in sidecar["frames"]
    ]
    masks = read_masks(args.masks)
    if len(frames) != len(masks):
        raise ValidationError(f"{len(frames)} predicted frames but {len(masks)} masks")
    report = mean_iou(zip(frames, masks), args.policy)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval.json").write_text(report.to_json() + "\n")
    miou = f"{report.mean_iou * 100:.2f}" if report.defined else "undefined"
    table = format_table(["frames", "skipped", "mIoU(%)"], [[report.frames_evaluated, report.skipped, miou]])
    (out / "eval.txt").write_text(table)
    sys.stdout.write(table)
    write_manifest(out, "eval", argv, {"policy": args.policy}, [sidecar_path, Path(args.masks)],
                   [out / "eval.json", out / "eval.txt"])
    return EXIT_OK


def cmd_evimo_import(args, argv) -> int:
    events_path, manifest, geometry = import_evimo(args.events, args.mask_index, args.out)
    out = Path(args.out)
    write_manifest(out, "evimo import", argv, {"geometry": geometry._asdict()},
                   [args.events, args.mask_index], [events_path, manifest])
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--events", required=True, help="event text file")
    p.add_argument("--masks", required=True, help="mask manifest (masks.json)")
    p.add_argument("--config", help="OmsConfig JSON; omitted fields take the default values")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--engine", choices=ENGINES, default="algo")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for per-frame work")
    p.add_argument("--policy", choices=POLICIES, default="skip",
                   help="IoU handling of frames where prediction and mask are both empty")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omseg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"omseg {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("--config", required=True, help="SceneSpec JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="override the spec's seed")
    p.add_argument("--mask-rate", type=float, default=40.0, help="mask rate in Hz")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("oms", help="compute OMS frames and score them")
    _add_common(p)
    p.add_argument("--leak", type=float, default=0.0, help="hw engine: leak per step")
    p.add_argument("--steps", type=int, default=1, help="hw engine: accumulation steps")
    p.set_defaults(func=cmd_oms)

    p = sub.add_parser("sweep", help="vary one parameter and tabulate mIoU")
    _add_common(p)
    p.add_argument("--vary", choices=SWEEP_DIMENSIONS, required=True)
    p.add_argument("values", nargs="*", help="values, e.g. 1 2 4 8 or 3x6 4x8")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("hwplan", help="emit the compute-array programming plan")
    p.add_argument("--config")
    p.add_argument("--masks", help="take the sensor geometry from a mask manifest")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--leak", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hwplan)

    p = sub.add_parser("eval", help="score saved OMS frames against masks")
    p.add_argument("--pred", required=True, help="oms_frames.json written by 'oms'")
    p.add_argument("--masks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--policy", choices=POLICIES, default="skip")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("evimo", help="EV-IMO helpers")
    evimo = p.add_subparsers(dest="evimo_command", required=True)
    q = evimo.add_parser("import", help="convert EV-IMO-style text events and mask images")
    q.add_argument("--events", required=True, help="events.txt with 't x y p' lines")
    q.add_argument("--mask-index", required=True, help="lines of 't_seconds mask_path'")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_evimo_import)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args, argv)
    except FeasibilityError as exc:
        print(f"omseg: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValidationError as exc:
        print(f"omseg: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except json.JSONDecodeError as exc:
        print(f"omseg: malformed JSON: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"omseg: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
