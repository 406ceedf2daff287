import csv
import hashlib
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from khronos_mf.cli import main, read_config_file
from khronos_mf.errors import ConfigurationError
from khronos_mf.geometry import naca4

FAST = ["--lf-epochs", "20", "--delta-epochs", "20"]


def run(argv, capsys):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def tree_digest(path):
    h = hashlib.sha256()
    for f in sorted(p for p in path.rglob("*") if p.is_file()):
        h.update(f.name.encode())
        h.update(f.read_bytes())
    return h.hexdigest()


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "ds"
    assert main(["synth", "--n-cases", "40", "--seed", "1", "--out", str(out)]) == 0
    return out


def test_synth_writes_cases_and_is_byte_identical(tmp_path, capsys):
    out = tmp_path / "a"
    digests = []
    for _ in range(2):
        code, _, _ = run(["synth", "--n-cases", "12", "--bias", "none", "--out", out], capsys)
        assert code == 0
        digests.append(tree_digest(out))
        files = sorted(p.name for p in out.iterdir())
        shutil.rmtree(out)
    assert digests[0] == digests[1]
    assert sum(name.startswith("case_") for name in files) == 12


def test_synth_manifest_marks_hf(tmp_path, capsys):
    run(["synth", "--n-cases", "5", "--bias", "none", "--out", tmp_path], capsys)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert all(case["hf"] for case in manifest["cases"])


def test_synth_zero_cases_is_config_error(tmp_path, capsys):
    code, _, err = run(["synth", "--n-cases", "0", "--out", tmp_path / "x"], capsys)
    assert code == 2
    assert json.loads(err)["error"] == "ConfigurationError"


def test_fit_geom(tmp_path, capsys):
    src = tmp_path / "naca.csv"
    src.write_text("x,y\n" + "".join(f"{float(x)!r},{float(y)!r}\n" for x, y in naca4("0012")))
    code, out, _ = run(["fit-geom", src, "--out", tmp_path / "g1"], capsys)
    assert code == 0
    assert float(out.split("RMSE:")[1]) <= 0.0073
    code, out, _ = run(["fit-geom", tmp_path / "g1" / "reconstruction.csv",
                        "--out", tmp_path / "g2"], capsys)
    assert code == 0 and float(out.split("RMSE:")[1]) <= 1e-9
    assert (tmp_path / "g1" / "curve.json").exists()


def test_fit_geom_errors(tmp_path, capsys):
    tiny = tmp_path / "tiny.csv"
    tiny.write_text("x,y\n1,0\n0,0\n1,0.1\n")
    assert run(["fit-geom", tiny, "--out", tmp_path / "o"], capsys)[0] == 2
    broken = tmp_path / "broken.csv"
    broken.write_text("x,y\n1,0\n0,abc\n")
    code, _, err = run(["fit-geom", broken, "--out", tmp_path / "o"], capsys)
    assert code == 3 and "line 3" in json.loads(err)["message"]


def test_train_case1_single_checkpoint(tmp_path, dataset, capsys, caplog):
    out = tmp_path / "run1"
    code, _, _ = run(["train", "--data", dataset, "--case", "1", "--delta-r", "4",
                      *FAST, "--out", out], capsys)
    assert code == 0
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["checkpoints"] == ["lf_model.json"]
    assert not (out / "delta_model.json").exists()
    assert "delta options are ignored" in caplog.text


def test_train_case3_and_determinism(tmp_path, dataset, capsys):
    before = tree_digest(dataset)
    losses = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run(["train", "--data", dataset, "--case", "3", *FAST, "--out", out], capsys)[0] == 0
        assert json.loads((out / "run_manifest.json").read_text())["checkpoints"] == [
            "lf_model.json", "delta_model.json"]
        losses.append((out / "delta_history.csv").read_text())
    assert losses[0] == losses[1]
    assert tree_digest(dataset) == before


def test_train_mlp_with_config_file(tmp_path, dataset, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small MLP\nmodel = mlp\ncase = 2\nlf-hidden = 8,8\n"
                   "delta_hidden = 8\nlf_epochs = 10\ndelta-epochs = 10\n")
    out = tmp_path / "mlp"
    assert run(["train", "--config", cfg, "--data", dataset, "--out", out], capsys)[0] == 0
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["options"]["model"] == "mlp" and manifest["hf_ratio"] == 0.1
    assert json.loads((out / "lf_model.json").read_text())["widths"] == [18, 8, 8, 81]


def test_config_file_errors(tmp_path, dataset, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nonsense_key = 1\n")
    assert run(["train", "--config", cfg, "--data", dataset, "--out", tmp_path / "o"],
               capsys)[0] == 2
    cfg.write_text("model = gnn\n")
    assert run(["train", "--config", cfg, "--data", dataset, "--out", tmp_path / "o"],
               capsys)[0] == 2
    cfg.write_text("just words\n")
    with pytest.raises(ConfigurationError):
        read_config_file(cfg)


def test_predict_and_eval(tmp_path, dataset, capsys):
    ckpt = tmp_path / "ckpt"
    assert run(["train", "--data", dataset, "--case", "2", *FAST, "--out", ckpt], capsys)[0] == 0
    assert run(["predict", "--data", dataset, "--checkpoints", ckpt,
                "--out", tmp_path / "pred"], capsys)[0] == 0
    rows = list(csv.DictReader(open(tmp_path / "pred" / "predictions.csv")))
    assert len(rows) == 40 * 81

    code, _, _ = run(["eval", "--data", dataset, "--checkpoints", ckpt, "--K", "5",
                      "--out", tmp_path / "ev"], capsys)
    assert code == 0
    records = list(csv.DictReader(open(tmp_path / "ev" / "eval_records.csv")))
    assert len(records) == 5
    summary = json.loads((tmp_path / "ev" / "eval_summary.json").read_text())
    mean = np.mean([float(r["r2"]) for r in records])
    assert summary["models"]["khronos"]["r2"] == pytest.approx(mean, rel=1e-12)
    assert sum(summary["models"]["khronos"]["bins"]) == 40


def test_eval_station_mismatch(tmp_path, dataset, capsys):
    ckpt = tmp_path / "ckpt"
    assert run(["train", "--data", dataset, "--case", "1", "--lf-epochs", "5",
                "--out", ckpt], capsys)[0] == 0
    other = tmp_path / "ds41"
    assert run(["synth", "--n-cases", "20", "--n-stations", "41", "--out", other], capsys)[0] == 0
    assert run(["eval", "--data", other, "--checkpoints", ckpt, "--out", tmp_path / "e"],
               capsys)[0] == 3
    assert run(["predict", "--data", other, "--checkpoints", ckpt, "--out", tmp_path / "p"],
               capsys)[0] == 3


def test_missing_dataset_is_data_error(tmp_path, capsys):
    code, _, err = run(["train", "--data", tmp_path / "nope", "--out", tmp_path / "o"], capsys)
    assert code == 3 and json.loads(err)["exit_code"] == 3


def test_benchmark_sweep_curve(tmp_path, dataset, capsys):
    out = tmp_path / "bm"
    code, _, _ = run(["benchmark", "--data", dataset, "--models", "khronos",
                      "--ranks", "1,2,4,8", "--out", out], capsys)
    assert code == 0
    rows = list(csv.DictReader(open(out / "sweep_curve.csv")))
    params = [int(r["param_count"]) for r in rows]
    assert len(rows) == 4 and params == sorted(set(params))
    again = tmp_path / "bm2"
    run(["benchmark", "--data", dataset, "--models", "khronos", "--ranks", "1,2,4,8",
         "--out", again], capsys)
    assert [r["error"] for r in csv.DictReader(open(again / "sweep_curve.csv"))] == [
        r["error"] for r in rows]


def test_benchmark_budget_curve(tmp_path, dataset, capsys):
    out = tmp_path / "bm"
    code, _, _ = run(["benchmark", "--data", dataset, "--budgets", "0.2,0.4,0.6",
                      "--out", out], capsys)
    assert code == 0
    rows = list(csv.DictReader(open(out / "budget_curve.csv")))
    assert [r["model"] for r in rows] == ["khronos"] * 3 + ["mlp"] * 3
    assert run(["benchmark", "--data", dataset, "--models", "pinn", "--budgets", "1",
                "--out", out], capsys)[0] == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "khronos_mf", "synth", "--n-cases", "-3",
                           "--out", str(tmp_path / "x")], capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr.strip().splitlines()[-1])["exit_code"] == 2
