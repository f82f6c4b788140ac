import csv
import io
import json
import math
import shutil
import subprocess

import numpy as np
import pytest

from robgeo import Sphere, tuning
from robgeo.cli import _parse_sigma, main, read_regression_csv
from robgeo.shapes import save_shapes, synthetic_shapes
from robgeo.simulate import default_truth


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_tune(capsys):
    code, out, _ = run(capsys, "tune", "--dim", "3")
    assert code == 0
    d = json.loads(out)
    assert d["schema_version"] == 1
    assert d["c_tukey"] == pytest.approx(5.49025, abs=1e-4)
    assert d["xi"] == pytest.approx(tuning.xi(3))


def test_tune_unreachable_target(capsys):
    code, _, err = run(capsys, "tune", "--dim", "12", "--estimator", "huber")
    assert code == 2 and "error" in err


def test_sample_is_seeded(capsys, tmp_path):
    out1 = tmp_path / "a.csv"
    assert main(["--seed", "4", "sample", "--manifold", "sphere", "--dim", "2",
                 "--sigma", "pi/8", "--n-samples", "50", "--out", str(out1)]) == 0
    code, text, _ = run(capsys, "sample", "--manifold", "sphere", "--dim", "2",
                        "--sigma", "pi/8", "--n-samples", "50", "--seed", "4")
    assert code == 0 and out1.read_text() == text
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["schema_version", "y1", "y2", "y3"] and len(rows) == 51
    y = np.array(rows[1:], dtype=float)[:, 1:]
    assert Sphere(2).check_point(y)


def test_parse_sigma():
    assert _parse_sigma("pi/8") == math.pi / 8
    assert _parse_sigma("pi*2") == 2 * math.pi
    assert _parse_sigma("pi") == math.pi
    assert _parse_sigma("0.25") == 0.25


def write_regression(path, M, x, y, header=True):
    with open(path, "w") as fh:
        if header:
            fh.write(f"# manifold={M.name} dim={M.n}\n")
        fh.write(",".join([f"x{j + 1}" for j in range(x.shape[1])]
                          + [f"y{j + 1}" for j in range(y.shape[1])]) + "\n")
        for xi, yi in zip(x, y):
            fh.write(",".join(repr(float(v)) for v in [*xi, *yi]) + "\n")


def test_fit(capsys, tmp_path, rng):
    M = Sphere(2)
    truth = default_truth(M)
    x = rng.uniform(-0.5, 0.5, (20, 1))
    path = tmp_path / "data.csv"
    write_regression(path, M, x, truth.predict(x))
    code, out, _ = run(capsys, "fit", "--data", str(path), "--loss", "tukey")
    assert code == 0
    d = json.loads(out)
    assert d["loss"] == "tukey" and d["schema_version"] == 1
    p = np.array(d["model"]["p"])
    assert M.dist(p, truth.predict(np.array(d["model"]["x_mean"]))) < 1e-6
    assert "trace" in d and d["cutoff"] is not None


def test_fit_manifold_on_command_line(capsys, tmp_path, rng):
    M = Sphere(2)
    y = M.random_point(rng, size=6)
    path = tmp_path / "data.csv"
    write_regression(path, M, np.zeros((6, 0)), y, header=False)
    assert run(capsys, "fit", "--data", str(path))[0] == 2
    code, out, _ = run(capsys, "fit", "--data", str(path), "--manifold", "sphere", "--dim", "2")
    assert code == 0 and json.loads(out)["model"]["V"] == []


def test_read_shape_responses(tmp_path):
    path = tmp_path / "k.csv"
    path.write_text("# manifold=kendall dim=3\nx1,y1,y2,y3,y4,y5,y6\n"
                    "0.5,0,0,1,0,0,1\n-0.5,0,0,2,0,0,1\n")
    M, x, y = read_regression_csv(path)
    assert M.k == 3 and y.dtype == complex and M.check_point(y)


@pytest.mark.parametrize("text", [
    "x1,y1,y2,y3\n1,0,0\n",
    "y1,x1,y2,y3\n1,0,0,1\n",
    "x1,y1,y2\n1,0,1\n",
    "x1,y1,y2,y3\n1,a,0,1\n",
])
def test_fit_bad_files(capsys, tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text("# manifold=sphere dim=2\n" + text)
    code, _, err = run(capsys, "fit", "--data", str(path))
    assert code == 2 and err.startswith("robgeo: error:")


def test_missing_file(capsys, tmp_path):
    assert run(capsys, "fit", "--data", str(tmp_path / "nope.csv"))[0] == 2


def test_simulate_mse_config(capsys, tmp_path):
    cfg = tmp_path / "spec.json"
    cfg.write_text(json.dumps({"manifold": "hyperbolic", "dim": 2, "noise": {"kind": "N"},
                               "sample_sizes": [8], "trials": 2, "losses": ["l2", "l1"]}))
    code, out, _ = run(capsys, "simulate", "mse", "--config", str(cfg))
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][:5] == ["schema_version", "manifold", "noise", "loss", "N"]
    assert [r[3] for r in rows[1:]] == ["l2", "l1"]
    # The same run again is byte-identical.
    assert run(capsys, "simulate", "mse", "--config", str(cfg))[1] == out


def test_simulate_efficiency(capsys):
    code, out, _ = run(capsys, "--seed", "1", "simulate", "efficiency", "--sigmas", "pi/16",
                       "--n", "16", "--trials", "6")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][-3:] == ["ratio_l1", "ratio_huber", "ratio_tukey"]
    assert len(rows) == 2


def test_shapes_fit(capsys, tmp_path):
    path = tmp_path / "shapes.csv"
    save_shapes(synthetic_shapes(n_subjects=20, k=6, seed=3), path)
    out = tmp_path / "report.json"
    code, _, _ = run(capsys, "shapes", "fit", "--data", str(path), "--tamper-indices", "1,4",
                     "--losses", "l2,tukey", "--out", str(out))
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["tamper_indices"] == [1, 4] and rep["source"] == str(path)
    assert len(rep["comparisons"]) == 4


def test_shapes_bad_index(capsys, tmp_path):
    path = tmp_path / "shapes.csv"
    save_shapes(synthetic_shapes(n_subjects=10, k=5), path)
    code, _, err = run(capsys, "shapes", "fit", "--data", str(path), "--tamper-indices", "99")
    assert code == 2 and "tamper" in err


@pytest.mark.skipif(shutil.which("robgeo") is None, reason="console script not installed")
def test_console_script():
    out = subprocess.run(["robgeo", "tune", "--dim", "1"], capture_output=True, text=True,
                         check=True)
    assert json.loads(out.stdout)["c_huber"] == pytest.approx(1.345, abs=1e-4)
