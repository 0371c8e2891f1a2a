import json
import subprocess
import sys

import pytest

from conftest import mini_dataset, solid_frame, write_dataset, write_frames
from mosekit.cli import main


@pytest.fixture
def dataset(tmp_path):
    videos = mini_dataset(tmp_path)
    return write_dataset(tmp_path / "gt", videos), write_dataset(tmp_path / "pred", videos)


def test_evaluate_writes_reports(tmp_path, dataset):
    gt, pred = dataset
    rc = main(["evaluate", "--gt", str(gt), "--pred", str(pred),
               "--out-json", str(tmp_path / "r.json"), "--out-csv", str(tmp_path / "r.csv")])
    assert rc == 0
    assert (tmp_path / "r.csv").read_text().splitlines()[-1] == "dataset," + ",".join(["100.00"] * 7)
    assert json.loads((tmp_path / "r.json").read_text())["dataset"]["JF_dot"] == 1.0


def test_evaluate_stdout(dataset, capsys):
    gt, pred = dataset
    assert main(["evaluate", "--gt", str(gt), "--pred", str(pred)]) == 0
    assert capsys.readouterr().out.startswith("name,JF_dot,J,F_dot,JFd,JFr,F,JF\n")


def test_config_file_and_override(tmp_path, dataset):
    gt, pred = dataset
    cfg = tmp_path / "eval.cfg"
    cfg.write_text(f"gt = {gt}\npred = {pred}\nalpha = 0.2\nstrict = yes\nout-csv = {tmp_path / 'a.csv'}\n")
    assert main(["evaluate", "--config", str(cfg)]) == 0
    assert (tmp_path / "a.csv").exists()
    assert main(["evaluate", "--config", str(cfg), "--out-csv", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "b.csv").exists()


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["evaluate", "--config", str(cfg)]) == 1
    assert "colour" in capsys.readouterr().err


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--alpha", "abc"])
    assert exc.value.code == 1
    assert main(["evaluate"]) == 1
    assert main(["gate", "--frames", "x", "--threshold", "0.3", "--anchor-mode", "previous", "--bins", "8,8,8"]) == 2


def test_data_errors_exit_2(tmp_path, dataset):
    gt, _ = dataset
    (tmp_path / "emptypred").mkdir()
    (tmp_path / "emptypred" / "zulu").mkdir()
    assert main(["evaluate", "--gt", str(gt), "--pred", str(tmp_path / "emptypred")]) == 2


def test_gate_and_simulate(tmp_path):
    frames = [solid_frame((255, 0, 0))] * 3 + [solid_frame((0, 0, 255))] * 3
    d = write_frames(tmp_path, "v", frames)
    trace_path = tmp_path / "trace.json"
    assert main(["gate", "--frames", str(d), "--threshold", "0.35", "--out", str(trace_path)]) == 0
    doc = json.loads(trace_path.read_text())
    assert [f["active"] for f in doc["frames"]] == [False, False, False, True, False, False]
    assert set(doc["frames"][0]) == {"t", "distance", "active", "anchor"}

    mem_path = tmp_path / "mem.jsonl"
    assert main(["simulate", "--frames", "6", "--nl", "3", "--nc", "2", "--gate", str(trace_path),
                 "--out", str(mem_path)]) == 0
    lines = [json.loads(l) for l in mem_path.read_text().splitlines()]
    assert len(lines) == 6
    assert lines[3]["concept"] == [1, 4]
    assert lines[5]["grounding"] == [1, 4, 5]

    assert main(["simulate", "--frames", "5", "--gate", str(trace_path)]) == 1


def test_attention_demo(tmp_path):
    out = tmp_path / "demo.json"
    assert main(["attention-demo", "--c", "8", "--hw", "4", "--nl", "22", "--seed", "7", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["nl"] == 22
    assert max(d["max_row_sum_error"] for d in doc["row_sums"]) < 1e-6


def test_ablate_cli(tmp_path, dataset):
    gt, pred = dataset
    out = tmp_path / "abl.csv"
    assert main(["ablate", "--gt", str(gt), "--pred", str(pred), "--grid-threshold", "0,0.35,0.5,0.7,1",
                 "--out-csv", str(out)]) == 0
    labels = [l.split(",")[0] for l in out.read_text().splitlines()[1:]]
    assert labels == ["0 (all w/ C)", "0.35", "0.5", "0.7", "1 (w/o C)"]
    assert main(["ablate", "--gt", str(gt), "--pred", str(pred), "--out-csv", str(tmp_path / "none.csv")]) == 1
    assert not (tmp_path / "none.csv").exists()


def test_console_module_runs():
    proc = subprocess.run([sys.executable, "-m", "mosekit.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "mosekit" in proc.stdout
