import json
import shutil
from pathlib import Path

import pytest

from nsa_forge.cli import main
from nsa_forge.config import shipped_config_path

EVAL = Path(__file__).parent / "fixtures" / "eval"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["synthesize", "--config", "bottle"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_synthesize_writes_dataset(capsys, fixture_images, tmp_path):
    out = tmp_path / "out"
    code, stdout, _ = run(
        capsys, "synthesize", "--config", "bottle", "--input", str(fixture_images), "--output", str(out),
        "--count", "3", "--seed", "7", "--preprocess", "none", "--workers", "1",
    )
    assert code == 0
    assert json.loads(stdout)["written"] == 3
    assert (out / "000002_logistic.png").exists() and (out / "manifest.jsonl").exists()


def test_synthesize_exhaustion_exit_three(capsys, fixture_images, tmp_path):
    cfg = tmp_path / "strict.ini"
    cfg.write_text(
        "[task]\nname = strict\nn_max = 1\n[patch]\nw_min = 0.7\nw_max = 0.8\nh_min = 0.7\nh_max = 0.8\n"
        "[background]\nb = 200\nt_brightness = 60\nt_object = 0.99\nt_overlap = 0.99\n"
    )
    code, _, _ = run(
        capsys, "synthesize", "--config", str(cfg), "--input", str(fixture_images), "--output", str(tmp_path / "o"),
        "--count", "1", "--preprocess", "none",
    )
    assert code == 3


def test_synthesize_missing_input_exit_two(capsys, tmp_path):
    code, _, err = run(
        capsys, "synthesize", "--config", "bottle", "--input", str(tmp_path / "nothing"),
        "--output", str(tmp_path / "o"), "--count", "1",
    )
    assert code == 2 and "not a directory" in err


def test_workers_env_var(capsys, monkeypatch, fixture_images, tmp_path):
    monkeypatch.setenv("NSA_FORGE_WORKERS", "many")
    code, _, _ = run(
        capsys, "synthesize", "--config", "bottle", "--input", str(fixture_images), "--output", str(tmp_path / "o"),
        "--count", "1", "--preprocess", "none",
    )
    assert code == 1
    monkeypatch.setenv("NSA_FORGE_WORKERS", "2")
    code, _, _ = run(
        capsys, "synthesize", "--config", "bottle", "--input", str(fixture_images), "--output", str(tmp_path / "o"),
        "--count", "2", "--preprocess", "none",
    )
    assert code == 0


@pytest.mark.parametrize("mode", ["nsa-continuous", "cutpaste", "pii"])
def test_blend(capsys, fixture_images, tmp_path, mode):
    code, stdout, _ = run(
        capsys, "blend", "--config", "bottle", "--source", str(fixture_images / "a.png"),
        "--destination", str(fixture_images / "b.png"), "--output", str(tmp_path), "--mode", mode,
        "--preprocess", "none", "--seed", "3",
    )
    assert code == 0
    files = json.loads(stdout)["files"]
    assert all((tmp_path / f).exists() for f in files.values())


def test_eval_json_and_figure(capsys, tmp_path):
    fig = tmp_path / "curves.png"
    code, stdout, err = run(
        capsys, "eval", "--predictions", str(EVAL / "pred"), "--truth", str(EVAL / "truth"), "--figure", str(fig)
    )
    assert code == 0
    report = json.loads(stdout)
    expected = json.loads((EVAL / "expected.json").read_text())
    assert report["pixel_auroc"] == pytest.approx(expected["pixel_auroc"], abs=1e-12)
    assert report["au_pro"] == pytest.approx(expected["au_pro"], abs=1e-9)
    assert "au_pro@0.3" in err
    assert fig.stat().st_size > 0


def test_eval_output_file(capsys, tmp_path):
    code, _, _ = run(
        capsys, "eval", "--predictions", str(EVAL / "pred"), "--truth", str(EVAL / "truth"),
        "--output", str(tmp_path / "r.json"), "--connectivity", "4", "--fpr-limit", "0.2",
    )
    assert code == 0
    assert json.loads((tmp_path / "r.json").read_text())["fpr_limit"] == 0.2


def test_eval_unmatched_stems_exit_two(capsys, tmp_path):
    shutil.copytree(EVAL / "pred", tmp_path / "pred")
    (tmp_path / "pred" / "s1.png").rename(tmp_path / "pred" / "q1.png")
    code, _, err = run(capsys, "eval", "--predictions", str(tmp_path / "pred"), "--truth", str(EVAL / "truth"))
    assert code == 2 and "unmatched" in err


def test_eval_single_class_exit_two(capsys, tmp_path):
    for sub in ("pred", "truth"):
        (tmp_path / sub).mkdir()
        shutil.copy(EVAL / sub / "s0.png", tmp_path / sub / "s0.png")
    code, _, _ = run(capsys, "eval", "--predictions", str(tmp_path / "pred"), "--truth", str(tmp_path / "truth"))
    assert code == 2


def test_config_check(capsys, tmp_path):
    code, stdout, _ = run(capsys, "config", "check", str(shipped_config_path("screw")), str(shipped_config_path("cable")))
    assert code == 0 and "n_max=4" in stdout and "constraints=off" in stdout
    bad = tmp_path / "bad.ini"
    bad.write_text("[patch]\nw_min = 0.5\nw_max = 0.2\n")
    code, _, err = run(capsys, "config", "check", str(bad))
    assert code == 2 and "bad.ini:" in err


def test_demo(capsys, fixture_images, tmp_path):
    code, stdout, _ = run(
        capsys, "demo", "--config", "bottle", "--source", str(fixture_images / "a.png"),
        "--destination", str(fixture_images / "b.png"), "--output", str(tmp_path), "--preprocess", "none",
        "--trials", "2",
    )
    assert code == 0
    stats = json.loads(stdout)
    assert (tmp_path / "demo_grid.png").stat().st_size > 0
    assert (tmp_path / "demo_stats.json").exists()
    assert all(stats["exterior_identical"].values())
