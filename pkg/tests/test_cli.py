import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import small_scene, tree_hash
from seasynth.cli import run
from seasynth.render import load_mask, load_rgb, save_png


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def write_config(path, n=3, out="data"):
    scene = {"camera": {"width": 20, "height": 20, "altitude": [60, 90]},
             "optics": {"turbidity": [0, 0.2]},
             "objects_of_interest": [{"pose": {"preset": "breaching", "yaw": [-3, 3]}}]}
    path.write_text(json.dumps({"sample_count": n, "master_seed": 1, "output_dir": out, "scene": scene}))
    return path


@pytest.mark.parametrize("argv", [["--help"], ["render", "--help"], ["gen", "--help"], ["augment", "--help"],
                                  ["eval", "--help"], ["sheet", "--help"]])
def test_help_exits_zero(argv, capsys):
    assert run(argv) == 0
    assert "usage" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [[], ["bogus"], ["gen"], ["gen", "--config", "c.json", "--frobnicate"],
                                  ["eval", "--pairs", "p.jsonl", "--tau", "1.5"],
                                  ["sheet", "--manifest", "m", "--rows", "0", "--cols", "1", "--out", "x.png"],
                                  ["render", "--scene", "s.json", "--seed", "abc", "--out", "d"]])
def test_usage_errors_exit_one(argv, capsys):
    assert run(argv) == 1
    assert "usage" in capsys.readouterr().err


def test_missing_config_exits_two_and_names_it():
    code, _, err = call("gen", "--config", "missing.json")
    assert code == 2 and "missing.json" in err


def test_bad_environment_worker_count(tmp_path, monkeypatch):
    monkeypatch.setenv("SEASYNTH_WORKERS", "zero")
    cfg = write_config(tmp_path / "c.json")
    code, _, err = call("gen", "--config", str(cfg))
    assert code == 1 and "SEASYNTH_WORKERS" in err


def test_render_writes_image_mask_and_metadata(tmp_path):
    (tmp_path / "scene.json").write_text(small_scene().to_json())
    code, out, _ = call("render", "--scene", str(tmp_path / "scene.json"), "--seed", "4", "--out", str(tmp_path / "r"))
    assert code == 0
    assert sorted(os.listdir(tmp_path / "r")) == ["image.png", "mask.png", "render.json"]
    meta = json.loads((tmp_path / "r" / "render.json").read_text())
    assert meta["seed"] == 4
    assert load_rgb(tmp_path / "r" / "image.png").shape == (48, 48, 3)
    code, _, _ = call("render", "--scene", str(tmp_path / "scene.json"), "--seed", "4", "--out", str(tmp_path / "r2"),
                      "--workers", "4")
    assert tree_hash(tmp_path / "r") == tree_hash(tmp_path / "r2")


def test_render_invalid_scene_exits_two(tmp_path):
    (tmp_path / "scene.json").write_text(json.dumps({"camera": {"altitude": 0.2}}))
    code, _, err = call("render", "--scene", str(tmp_path / "scene.json"), "--out", str(tmp_path / "r"))
    assert code == 2 and "altitude" in err


def test_gen_env_workers_and_out_override(tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "c.json")
    code, _, _ = call("gen", "--config", str(cfg))
    assert code == 0 and len(os.listdir(tmp_path / "data")) == 7
    monkeypatch.setenv("SEASYNTH_WORKERS", "3")
    code, _, _ = call("gen", "--config", str(cfg), "--out", str(tmp_path / "other"))
    assert code == 0
    code, _, _ = call("gen", "--config", str(cfg), "--out", str(tmp_path / "other8"), "--workers", "8")
    assert tree_hash(tmp_path / "data") == tree_hash(tmp_path / "other") == tree_hash(tmp_path / "other8")


def test_gen_failure_names_index(tmp_path):
    scene = {"camera": {"width": 8, "height": 8, "altitude": [1, 30]},
             "objects_of_interest": [{"source": "box", "params": {"size": [2, 2, 12]}}]}
    (tmp_path / "c.json").write_text(json.dumps({"sample_count": 40, "master_seed": 2, "scene": scene}))
    code, _, err = call("gen", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o"), "--workers", "1")
    assert code == 2 and "sample 8" in err


def test_augment_and_sheet(tmp_path):
    cfg = write_config(tmp_path / "c.json", n=4)
    assert call("gen", "--config", str(cfg), "--workers", "1")[0] == 0
    (tmp_path / "aug.json").write_text(json.dumps({"rotation_range": 90, "horizontal_flip": True}))
    manifest = str(tmp_path / "data" / "manifest.jsonl")
    code, _, _ = call("augment", "--manifest", manifest, "--spec", str(tmp_path / "aug.json"), "--seed", "3",
                      "--out", str(tmp_path / "aug"))
    assert code == 0 and len(os.listdir(tmp_path / "aug")) == 9
    for name in sorted(os.listdir(tmp_path / "aug")):
        if name.startswith("mask_"):
            assert set(np.unique(load_mask(tmp_path / "aug" / name)).tolist()) <= {0, 255}
    code, out, _ = call("sheet", "--manifest", manifest, "--rows", "2", "--cols", "2", "--out", str(tmp_path / "s.png"))
    assert code == 0
    assert load_rgb(tmp_path / "s.png").shape == (46, 46, 3)
    code, _, err = call("sheet", "--manifest", manifest, "--rows", "3", "--cols", "2", "--out", str(tmp_path / "t.png"))
    assert code == 2 and not (tmp_path / "t.png").exists()


def test_augment_bad_spec_exits_two(tmp_path):
    cfg = write_config(tmp_path / "c.json", n=1)
    call("gen", "--config", str(cfg), "--workers", "1")
    (tmp_path / "aug.json").write_text(json.dumps({"rotation_range": -5}))
    code, _, err = call("augment", "--manifest", str(tmp_path / "data" / "manifest.jsonl"),
                        "--spec", str(tmp_path / "aug.json"), "--out", str(tmp_path / "aug"))
    assert code == 2 and "rotation_range" in err


def make_pairs(tmp_path, ks=(90, 55, 52, 40)):
    lines = []
    for j, k in enumerate(ks):
        truth = np.zeros((10, 100), np.uint8)
        truth[0] = 255
        pred = np.zeros_like(truth)
        pred[0, :k] = 255
        save_png(pred, tmp_path / f"p{j}.png")
        save_png(truth, tmp_path / f"t{j}.png")
        lines.append(json.dumps({"prediction": f"p{j}.png", "truth": f"t{j}.png", "id": f"s{j}"}))
    (tmp_path / "pairs.jsonl").write_text("\n".join(lines) + "\n")
    return tmp_path / "pairs.jsonl"


def test_eval_reports_detection_rates(tmp_path):
    pairs = make_pairs(tmp_path)
    code, out, _ = call("eval", "--pairs", str(pairs), "--tau", "0.5", "--tau", "0.6", "--out", str(tmp_path / "r.json"))
    assert code == 0
    assert out.splitlines()[2].split() == ["pairs", "0.750", "0.250", "4"]
    report = json.loads((tmp_path / "r.json").read_text())
    dr = {e["tau"]: e["dr"] for e in report["thresholds"]}
    assert dr == {0.5: 0.75, 0.6: 0.25}


def test_eval_default_taus(tmp_path):
    pairs = make_pairs(tmp_path)
    code, out, _ = call("eval", "--pairs", str(pairs))
    assert code == 0 and "DR_50" in out and "DR_60" in out


def test_eval_all_negative_exits_two(tmp_path):
    save_png(np.zeros((4, 4), np.uint8), tmp_path / "z.png")
    (tmp_path / "pairs.jsonl").write_text(json.dumps({"prediction": "z.png", "truth": "z.png"}) + "\n")
    code, _, err = call("eval", "--pairs", str(tmp_path / "pairs.jsonl"))
    assert code == 2 and "no positive ground truth" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "seasynth", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "render" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "seasynth", "nope"], capture_output=True, text=True)
    assert proc.returncode == 1
