import json
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from gradmix.cli import run
from gradmix.dataset import build_inventory, load_manifest, load_sample


def tree(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert run(["synth", "--out", str(root), "--n-samples", "3", "--height", "128", "--width", "128",
                "--class-mix", "1:8,2:8,3:2", "--seed", "5"]) == 0
    return root


def test_synth_prints_census(tmp_path, capsys):
    assert run(["synth", "--out", str(tmp_path), "--n-samples", "2", "--height", "96", "--width", "96",
                "--class-mix", "1:5,3:1"]) == 0
    assert json.loads(capsys.readouterr().out) == {"1": 10, "3": 2}


def test_stats(data, tmp_path, capsys):
    assert run(["stats", "--manifest", str(data / "manifest.json"), "--json", str(tmp_path / "t.json")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split()[0] == "split" and lines[0].split()[-1] == "total"
    assert lines[1].split()[-1] == "54"
    assert json.loads((tmp_path / "t.json").read_text())["rows"]["train"]["total"] == 54


def test_augment_and_restat(data, tmp_path, capsys):
    out = tmp_path / "out"
    assert run(["augment", "--manifest", str(data / "manifest.json"), "--out", str(out), "--seed", "3"]) == 0
    text = capsys.readouterr().out
    assert "(seed 3)" in text and text.splitlines()[0].startswith("split")
    merged = load_manifest(out / "manifest.json")
    assert len(merged.entries) == 6
    assert run(["stats", "--manifest", str(out / "manifest.json")]) == 0
    rows = {line.split()[0]: line.split() for line in capsys.readouterr().out.splitlines()[1:]}
    assert rows["combined"][-1] == "108"


def test_augment_workers_identical(data, tmp_path):
    args = ["augment", "--manifest", str(data / "manifest.json"), "--seed", "42"]
    assert run(args + ["--out", str(tmp_path / "a"), "--workers", "1"]) == 0
    assert run(args + ["--out", str(tmp_path / "b"), "--workers", "3"]) == 0
    assert tree(tmp_path / "a") == tree(tmp_path / "b")


def test_config_file_and_override(data, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 8, "norm_mode": "sum"}))
    out = tmp_path / "o"
    assert run(["augment", "--manifest", str(data / "manifest.json"), "--out", str(out),
                "--config", str(cfg), "--seed", "9"]) == 0
    rec = json.loads((out / "provenance.jsonl").read_text().splitlines()[0])
    assert rec["seed"] == 9 and rec["norm_mode"] == "sum"


def test_unknown_config_field(data, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sigma": 1}))
    code = run(["augment", "--manifest", str(data / "manifest.json"), "--out", str(tmp_path / "o"), "--config", str(cfg)])
    assert code == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "unknown config fields" in err[0]


def test_cutmix_warns_about_norm(data, tmp_path, caplog):
    assert run(["augment", "--manifest", str(data / "manifest.json"), "--out", str(tmp_path / "o"),
                "--mode", "cutmix", "--norm", "sum"]) == 0
    assert "ignored in cutmix" in caplog.text


@pytest.mark.parametrize("bad", [["--major-fraction", "1.5"], ["--intra-prob", "-0.1"], ["--inpaint-radius", "0"]])
def test_bad_values_exit_nonzero(data, tmp_path, capsys, bad):
    assert run(["augment", "--manifest", str(data / "manifest.json"), "--out", str(tmp_path / "o")] + bad) == 1
    assert capsys.readouterr().err.startswith("gradmix augment: error:")


def test_missing_manifest(tmp_path, capsys):
    assert run(["stats", "--manifest", str(tmp_path / "none.json")]) == 1
    assert "not found" in capsys.readouterr().err


def test_argparse_errors_exit_two():
    with pytest.raises(SystemExit) as info:
        run(["augment", "--mode", "mixup"])
    assert info.value.code == 2


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        run(["augment", "--help"])
    text = capsys.readouterr().out
    for default in ("default: 0.8", "default: 0.6", "default: 0.5", "default: max", "default: 5", "default: 10"):
        assert default in text


def test_inspect_writes_artifacts(data, tmp_path, capsys):
    manifest = load_manifest(data / "manifest.json")
    target = load_sample(manifest.entries[0], manifest)
    inv = build_inventory(target)
    major = next(r for r in inv if r.class_id == 1)
    rare = next(r for r in inv if r.class_id == 3)
    out = tmp_path / "pair"
    code = run(["inspect", "--manifest", str(data / "manifest.json"), "--target", "s000", "--major", str(major.id),
                "--source", "s000", "--rare", str(rare.id), "--out", str(out)])
    assert code == 0
    summary = json.loads((out / "pair.json").read_text())
    assert capsys.readouterr().out.startswith(summary["outcome"])
    assert summary["outcome"] == "applied"
    for name in ("before", "after", "mask", "partition", "background", "arrival_time"):
        assert (out / f"{name}.png").exists()
    mask = np.asarray(Image.open(out / "mask.png"))
    assert mask.max() == 65535 and mask.min() == 0


def test_inspect_unknown_instance(data, tmp_path, capsys):
    code = run(["inspect", "--manifest", str(data / "manifest.json"), "--target", "s000", "--major", "999",
                "--source", "s001", "--rare", "1", "--out", str(tmp_path)])
    assert code == 1 and "not found" in capsys.readouterr().err


def test_console_entry_point(data):
    proc = subprocess.run([sys.executable, "-m", "gradmix.cli", "stats", "--manifest", str(data / "manifest.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "total" in proc.stdout
