import json
import shlex

import numpy as np
import pytest

from omseg.cli import main
from omseg.events import Geometry
from omseg.formats import encode_pbm, read_bitmap
from omseg.synth import ObjectSpec, SceneSpec

SCENE = SceneSpec(
    geometry=Geometry(32, 32),
    duration_ms=100.0,
    bg_texture_density=0.2,
    ego_velocity=(40.0, 0.0),
    objects=(ObjectSpec((10, 10), (8.0, 10.0), (120.0, 40.0)),),
    seed=5,
)
FEASIBLE = {"center_side": 4, "surround_side": 8, "stride": 8, "kernel_kind": "uniform", "tau": 0.48}


def _write(path, data):
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture
def scene_dir(tmp_path):
    spec = _write(tmp_path / "scene.json", SCENE.to_dict())
    out = tmp_path / "scene"
    assert main(["synth", "--config", spec, "--out", str(out)]) == 0
    return out


def _io(scene_dir):
    return ["--events", str(scene_dir / "events.txt"), "--masks", str(scene_dir / "masks" / "masks.json")]


def test_synth_writes_outputs_and_manifest(scene_dir):
    manifest = json.loads((scene_dir / "manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["parameters"]["rng"] == "numpy.random.Generator(PCG64)"
    assert manifest["tool_version"]
    assert str(scene_dir / "events.txt") in manifest["outputs"]
    assert len(json.loads((scene_dir / "masks" / "masks.json").read_text())) == 5


def test_synth_is_byte_identical(tmp_path, scene_dir):
    spec = _write(tmp_path / "again.json", SCENE.to_dict())
    out = tmp_path / "again"
    assert main(["synth", "--config", spec, "--out", str(out)]) == 0
    for rel in ["events.txt", "masks/masks.json", "masks/mask_00003.pbm"]:
        assert (out / rel).read_bytes() == (scene_dir / rel).read_bytes()


def test_seed_override_changes_output(tmp_path, scene_dir):
    spec = _write(tmp_path / "again.json", SCENE.to_dict())
    out = tmp_path / "seeded"
    assert main(["synth", "--config", spec, "--out", str(out), "--seed", "99"]) == 0
    assert (out / "events.txt").read_bytes() != (scene_dir / "events.txt").read_bytes()


def test_missing_spec_is_io_error(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["synth", "--config", str(missing), "--out", str(tmp_path / "o")]) == 3
    assert str(missing) in capsys.readouterr().err


def test_invalid_spec_is_validation_error(tmp_path):
    spec = _write(tmp_path / "bad.json", {**SCENE.to_dict(), "duration_ms": -1})
    assert main(["synth", "--config", spec, "--out", str(tmp_path / "o")]) == 2
    (tmp_path / "broken.json").write_text("{")
    assert main(["synth", "--config", str(tmp_path / "broken.json"), "--out", str(tmp_path / "o")]) == 2


def test_oms_defaults(tmp_path, scene_dir):
    out = tmp_path / "oms"
    assert main(["oms", *_io(scene_dir), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["engine"] == "algo" and report["empty_frame_policy"] == "skip"
    sidecar = json.loads((out / "frames" / "oms_frames.json").read_text())
    assert sidecar["config"]["tau"] == 0.96 and len(sidecar["frames"]) == 5
    assert (out / "manifest.json").exists()


def test_hw_engine_rejects_stride_one(tmp_path, scene_dir, capsys):
    cfg = _write(tmp_path / "cfg.json", {**FEASIBLE, "stride": 1})
    code = main(["oms", *_io(scene_dir), "--config", cfg, "--engine", "hw", "--out", str(tmp_path / "o")])
    assert code == 2
    assert "stride must equal surround_side" in capsys.readouterr().err


@pytest.fixture
def blob_dir(tmp_path):
    """Hand-built 32x32 stream: sparse noise plus dense 4x4 blobs that spike."""
    rng = np.random.default_rng(0)
    lines, masks = [], []
    out = tmp_path / "blobs"
    (out / "masks").mkdir(parents=True)
    for k in range(4):
        t = 10_000 + 25_000 * k
        grid = rng.random((32, 32)) < 0.05
        ty, tx = divmod(k, 4)
        grid[8 * ty + 2 : 8 * ty + 6, 8 * tx + 2 : 8 * tx + 6] = True
        ys, xs = np.nonzero(grid)
        lines += [f"{t} {x} {y} 1" for y, x in zip(ys, xs)]
        mask = np.zeros((32, 32), bool)
        mask[8 * ty : 8 * ty + 8, 8 * tx : 8 * tx + 8] = True
        (out / "masks" / f"m{k}.pbm").write_bytes(encode_pbm(mask))
        masks.append({"path": f"m{k}.pbm", "t_capture_us": t})
    (out / "events.txt").write_text("\n".join(lines) + "\n")
    _write(out / "masks" / "masks.json", masks)
    return out


def test_algo_and_hw_engines_agree(tmp_path, scene_dir, blob_dir):
    cfg = _write(tmp_path / "cfg.json", FEASIBLE)
    for src in (scene_dir, blob_dir):
        maps = {}
        for engine in ("algo", "hw"):
            out = tmp_path / src.name / engine
            assert main(["oms", *_io(src), "--config", cfg, "--engine", engine, "--jobs", "3",
                         "--out", str(out)]) == 0
            frames = sorted((out / "frames").glob("*.pbm"))
            maps[engine] = [read_bitmap(p) for p in frames]
        assert maps["algo"] and len(maps["algo"]) == len(maps["hw"])
        assert all(np.array_equal(a, b) for a, b in zip(maps["algo"], maps["hw"]))
    assert [int(m.sum()) for m in maps["algo"]] == [1, 1, 1, 1]
    report = json.loads((tmp_path / "blobs" / "algo" / "report.json").read_text())
    assert report["per_frame"] == [1.0, 1.0, 1.0, 1.0]


def test_unknown_config_field(tmp_path, scene_dir, capsys):
    cfg = _write(tmp_path / "cfg.json", {"thresh": 0.5})
    assert main(["oms", *_io(scene_dir), "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "thresh" in capsys.readouterr().err


def test_eval_matches_oms_report(tmp_path, scene_dir):
    cfg = _write(tmp_path / "cfg.json", FEASIBLE)
    out = tmp_path / "oms"
    assert main(["oms", *_io(scene_dir), "--config", cfg, "--out", str(out), "--policy", "count_as_one"]) == 0
    ev = tmp_path / "eval"
    assert main(["eval", "--pred", str(out / "frames" / "oms_frames.json"),
                 "--masks", str(scene_dir / "masks" / "masks.json"), "--out", str(ev),
                 "--policy", "count_as_one"]) == 0
    a = json.loads((out / "report.json").read_text())
    b = json.loads((ev / "eval.json").read_text())
    assert a["per_frame"] == b["per_frame"]


def test_sweep_needs_values(tmp_path, scene_dir, capsys):
    assert main(["sweep", *_io(scene_dir), "--vary", "stride", "--out", str(tmp_path / "s")]) == 2
    assert "at least one value" in capsys.readouterr().err


def test_stride_sweep_table(tmp_path, scene_dir):
    out = tmp_path / "s"
    assert main(["sweep", *_io(scene_dir), "--vary", "stride", "--out", str(out), "1", "2", "4", "6", "8"]) == 0
    lines = (out / "sweep.txt").read_text().splitlines()
    assert lines[1].split()[:2] == ["Stride", "mIoU(%)"]
    assert [ln.split()[0] for ln in lines[3:8]] == ["1", "2", "4", "6", "8"]
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0] == "value,miou_pct,frames,spike_density,input_density,status" and len(rows) == 6


def test_kernel_sweep_reports_size_classes(tmp_path, scene_dir):
    cfg = _write(tmp_path / "cfg.json", {"tau": 0.9})
    out = tmp_path / "k"
    assert main(["sweep", *_io(scene_dir), "--config", cfg, "--vary", "kernel", "--out", str(out),
                 "3x6", "4x8", "5x10", "12x6"]) == 0
    text = (out / "sweep.txt").read_text()
    assert "Large objects" in text and "Small objects" in text
    assert "6x6 and 12x12" in text
    assert "12x6: read as center 6x6, surround 12x12" in text
    assert len((out / "sweep.csv").read_text().splitlines()) == 5


def test_infeasible_sweep_rows_are_not_fatal(tmp_path, scene_dir):
    cfg = _write(tmp_path / "cfg.json", FEASIBLE)
    out = tmp_path / "k"
    assert main(["sweep", *_io(scene_dir), "--config", cfg, "--engine", "hw", "--vary", "kernel",
                 "--out", str(out), "3x6", "4x8"]) == 0
    rows = json.loads((out / "sweep.json").read_text())["rows"]
    assert rows[0]["status"].startswith("infeasible") and rows[1]["status"] == "ok"


def test_manifest_argv_reproduces_outputs(tmp_path, scene_dir):
    cfg = _write(tmp_path / "cfg.json", FEASIBLE)
    out = tmp_path / "first"
    assert main(["oms", *_io(scene_dir), "--config", cfg, "--out", str(out)]) == 0
    argv = json.loads((out / "manifest.json").read_text())["argv"]
    rerun = tmp_path / "second"
    argv = shlex.split(shlex.join(argv).replace(str(out), str(rerun)))
    assert main(argv) == 0
    for rel in ["report.json", "frames/oms_frames.json", "frames/oms_00002.pbm"]:
        assert (out / rel).read_bytes() == (rerun / rel).read_bytes()


def test_hwplan(tmp_path):
    cfg = _write(tmp_path / "cfg.json", FEASIBLE)
    out = tmp_path / "plan"
    assert main(["hwplan", "--config", cfg, "--width", "16", "--height", "16", "--out", str(out)]) == 0
    plan = json.loads((out / "plan.json").read_text())
    assert len(plan["cells"]) == 64 and plan["trip_setting"] == -10
    assert main(["hwplan", "--config", cfg, "--out", str(out)]) == 2
    bad = _write(tmp_path / "bad.json", {**FEASIBLE, "kernel_kind": "gaussian"})
    assert main(["hwplan", "--config", bad, "--width", "16", "--height", "16", "--out", str(out)]) == 2


def test_evimo_import(tmp_path):
    (tmp_path / "events.txt").write_text("0.001 0 0 1\n0.002 1 1 -1\n")
    (tmp_path / "m.pbm").write_bytes(b"P1 2 2 1 0 0 1")
    (tmp_path / "index.txt").write_text("0.0015 m.pbm\n")
    out = tmp_path / "native"
    assert main(["evimo", "import", "--events", str(tmp_path / "events.txt"),
                 "--mask-index", str(tmp_path / "index.txt"), "--out", str(out)]) == 0
    assert (out / "events.txt").read_text().splitlines()[1:] == ["1000 0 0 1", "2000 1 1 -1"]
    assert json.loads((out / "manifest.json").read_text())["command"] == "evimo import"
