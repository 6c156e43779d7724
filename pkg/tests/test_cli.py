import json

import pytest

from persistest.cli import main
from persistest.io import write_clouds, write_diagrams
from persistest.cech import PersistenceDiagram
from persistest.procgen import ProcessSpec, generate_process

FAST = ["--replications", "2000", "--steps", "200", "--nu-grid", "50", "--threads", "1"]


def run(argv, out):
    code = main([*argv, "--out", str(out)])
    report = out / "report.json"
    return code, (json.loads(report.read_text()) if report.exists() else None)


@pytest.fixture
def clouds_file(tmp_path):
    f = tmp_path / "x.csv"
    write_clouds(generate_process(ProcessSpec(points_per_cloud=8, seed=1), 8), f)
    return f


@pytest.fixture
def other_clouds_file(tmp_path):
    f = tmp_path / "y.csv"
    write_clouds(generate_process(ProcessSpec(points_per_cloud=8, noise_scale=0.1, seed=2), 8), f)
    return f


def test_distance_example(tmp_path, capsys):
    d = tmp_path / "d.csv"
    write_diagrams([PersistenceDiagram([(0, 2)], 1), PersistenceDiagram([(0, 4)], 1)], d)
    code, rep = run(["distance", "--input", str(d), "--r", "1"], tmp_path / "o")
    assert code == 0
    assert rep["results"]["distance"] == 2.0
    assert "W_1 = 2" in capsys.readouterr().out
    assert (tmp_path / "o" / "distances.csv").exists()


def test_identical_inputs_do_not_reject(tmp_path, clouds_file):
    code, rep = run(["test", "--input", str(clouds_file), "--input", str(clouds_file),
                     "--delta", "0.01", *FAST], tmp_path / "o")
    assert code == 0
    assert rep["results"]["reject"] is False
    assert rep["results"]["D_hat"] == 0.0
    assert rep["nu"]["checksum"] == rep["results"]["diagnostics"]["nu_checksum"]
    assert (tmp_path / "o" / "difference_surface.csv").exists()
    assert (tmp_path / "o" / "difference_surface.png").exists()


def test_test_command_is_deterministic(tmp_path, clouds_file, other_clouds_file):
    args = ["test", "--variant", "frechet", "--input", str(clouds_file), "--input", str(other_clouds_file), *FAST]
    run(args, tmp_path / "a")
    run([*args[:-2], "--threads", "3", "--cache-dir", str(tmp_path / "cache")], tmp_path / "b")
    for name in ("report.json", "difference_path.csv", "difference_path.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_quantiles_are_byte_identical(tmp_path):
    args = ["quantiles", "--variant", "frechet", "--seed", "3", *FAST]
    run(args, tmp_path / "a")
    run(args, tmp_path / "b")
    for name in ("quantile_table.json", "report.json", "limit_draws.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    table = json.loads((tmp_path / "a" / "quantile_table.json").read_text())
    assert table["alphas"] == [0.1, 0.05, 0.01]
    assert table["seed"] == 3


def test_saved_table_feeds_the_test(tmp_path, clouds_file, other_clouds_file):
    run(["quantiles", "--variant", "inco", *FAST], tmp_path / "q")
    table = tmp_path / "q" / "quantile_table.json"
    code, rep = run(["test", "--input", str(clouds_file), "--input", str(other_clouds_file),
                     "--quantile-table", str(table), *FAST], tmp_path / "t")
    assert code == 0
    assert rep["results"]["diagnostics"]["quantile"]["source"] == "table"
    code, _ = run(["test", "--input", str(clouds_file), "--input", str(other_clouds_file),
                   "--quantile-table", str(table), "--replications", "2000", "--steps", "200",
                   "--nu-grid", "40"], tmp_path / "t2")
    assert code == 3


def test_pipeline_commands(tmp_path, clouds_file):
    code, rep = run(["persistence", "--input", str(clouds_file)], tmp_path / "p")
    assert code == 0
    assert rep["results"]["samples"][0]["n_diagrams"] == 8
    diagrams = tmp_path / "p" / "diagrams_0.csv"
    code, rep = run(["frechet", "--input", str(diagrams)], tmp_path / "f")
    assert code == 0 and rep["results"]["converged"]
    assert (tmp_path / "f" / "mean.csv").exists()
    code, rep = run(["incovar", "--input", str(diagrams), "--nu-grid", "20", "--no-plots"], tmp_path / "i")
    assert code == 0 and rep["results"]["inco_variance"] >= 0
    assert not (tmp_path / "i" / "partial_sums.png").exists()


def test_simulate_and_power(tmp_path):
    code, rep = run(["simulate", "--kind", "ma", "--ma-order", "2", "--points", "6", "--length", "5"], tmp_path / "s")
    assert code == 0
    cd = rep["results"]["coupling_distance"]
    assert cd[0] > 0 and cd[-1] == 0.0
    code, rep = run(["power", "--effects", "0,0.2", "--reps", "2", "--points", "6", "--length", "6",
                     "--dim", "0", *FAST], tmp_path / "w")
    assert code == 0
    assert len(rep["results"]["rates"]) == 2
    assert (tmp_path / "w" / "power.png").exists()


def test_exit_codes(tmp_path, clouds_file, capsys):
    assert run(["test", "--input", str(tmp_path / "nope.csv"), "--input", str(clouds_file)], tmp_path / "o")[0] == 2
    assert run(["test", "--input", str(clouds_file)], tmp_path / "o")[0] == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("t,point_id,x1\n1,0,0.1\n1,1\n")
    assert run(["persistence", "--input", str(bad)], tmp_path / "o")[0] == 2
    # a numeric failure: alpha outside (0, 1)
    assert run(["test", "--input", str(clouds_file), "--input", str(clouds_file), "--alpha", "2"],
               tmp_path / "o")[0] == 3
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["distance", "--r", "0.5"])
    assert exc.value.code == 2
