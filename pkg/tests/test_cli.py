import json
import io

import numpy as np
import pytest

from fklab.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_NUMERICAL,
    EXIT_OK,
    main,
    parse_potential,
    write_path_csv,
)
from fklab.paths import CadlagPath


def run_cli(args):
    return main(args)


# -- potential parsing ---------------------------------------------------------


def test_parse_potential_named():
    assert parse_potential("harmonic").is_harmonic
    v = parse_potential("abs")
    assert v.evaluate_radius(3.0) == pytest.approx(3.0)
    assert parse_potential("zero").evaluate(np.array([2.0])) == 0.0
    assert parse_potential("1.5").evaluate(np.array([9.0])) == pytest.approx(1.5)


def test_parse_potential_polynomial():
    v = parse_potential("0.5*x^2")
    assert v.is_harmonic
    v2 = parse_potential("x^4 - 0.25*x^2 + 1")
    assert v2.evaluate(np.array([2.0])) == pytest.approx(16.0 - 1.0 + 1.0)
    v3 = parse_potential("2*q")
    assert v3.evaluate(np.array([3.0])) == pytest.approx(6.0)


def test_parse_potential_rejects_garbage():
    from fklab.cli import ConfigError

    with pytest.raises(ConfigError):
        parse_potential("sin(x)")
    with pytest.raises(ConfigError):
        parse_potential("x^")


# -- spectrum -------------------------------------------------------------------


def test_spectrum_command(tmp_path):
    out = tmp_path / "spec.csv"
    rc = run_cli(["spectrum", "--N", "21", "--V", "0.5*x^2", "--count", "5",
                  "--output", str(out)])
    assert rc == EXIT_OK
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "n,eigenvalue"
    assert len(lines) == 6
    first = float(lines[1].split(",")[1])
    assert abs(first - 0.5) < 1e-3
    manifest = json.loads((tmp_path / "spec.csv.manifest.json").read_text())
    assert manifest["command"] == "spectrum"
    assert manifest["parameters"]["N"] == 21
    assert "seed" in manifest and "version" in manifest


def test_spectrum_stochastic_variant(capsys):
    rc = run_cli(["spectrum", "--N", "9", "--hamiltonian", "stochastic",
                  "--V", "zero", "--count", "3"])
    assert rc == EXIT_OK
    rows = capsys.readouterr().out.strip().splitlines()[1:]
    assert float(rows[0].split(",")[1]) == pytest.approx(0.0, abs=1e-12)


# -- config file handling ----------------------------------------------------------


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"N": 9, "V": "harmonic", "count": 2, "seed": 5}))
    rc = run_cli(["spectrum", "--config", str(cfg), "--count", "3"])
    assert rc == EXIT_OK
    rows = capsys.readouterr().out.strip().splitlines()
    assert len(rows) == 4  # header + 3 (flag overrides file)


def test_config_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"N": 9, "bogus": 1}))
    assert run_cli(["spectrum", "--config", str(cfg)]) == EXIT_CONFIG


def test_missing_required_flag():
    assert run_cli(["spectrum"]) == EXIT_CONFIG


def test_invalid_values_exit_config():
    assert run_cli(["spectrum", "--N", "8"]) == EXIT_CONFIG
    assert run_cli(["fk-kernel", "--N", "9", "--T", "-1"]) == EXIT_CONFIG
    assert run_cli(["padic-density", "--p", "4"]) == EXIT_CONFIG
    assert run_cli(["padic-fk", "--p", "2", "--x", "wat"]) == EXIT_CONFIG


def test_numerical_failure_exit_code():
    # k >= b makes the moment check raise during computation
    rc = run_cli(["padic-checks", "--p", "2", "--b", "1", "--k", "2"])
    assert rc == EXIT_NUMERICAL


def test_io_failure_exit_code(tmp_path):
    rc = run_cli(["spectrum", "--N", "9", "--output",
                  str(tmp_path / "no_such_dir" / "x.csv")])
    assert rc == EXIT_IO


# -- reproducibility -----------------------------------------------------------------


def test_fk_kernel_byte_identical_reruns(tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    args = ["fk-kernel", "--N", "9", "--V", "x^2", "--T", "0.5",
            "--samples", "2000", "--seed", "42"]
    assert run_cli(args + ["--output", str(out1)]) == EXIT_OK
    assert run_cli(args + ["--output", str(out2)]) == EXIT_OK
    assert out1.read_bytes() == out2.read_bytes()
    out3 = tmp_path / "c.csv"
    assert run_cli(["fk-kernel", "--N", "9", "--V", "x^2", "--T", "0.5",
                    "--samples", "2000", "--seed", "43",
                    "--output", str(out3)]) == EXIT_OK
    assert out1.read_bytes() != out3.read_bytes()


def test_weak_convergence_command(tmp_path):
    out = tmp_path / "wk.csv"
    rc = run_cli(["weak-convergence", "--N", "9,21", "--t", "1",
                  "--samples", "20000", "--seed", "3", "--output", str(out)])
    assert rc == EXIT_OK
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "N,epsilon,kolmogorov_gap"
    gaps = [float(l.split(",")[2]) for l in lines[1:]]
    assert gaps[1] < gaps[0]


def test_trace_table_command(tmp_path):
    out = tmp_path / "tt.csv"
    rc = run_cli(["trace-table", "--N", "9,21", "--t", "1", "--V", "harmonic",
                  "--samples", "500", "--marginal-samples", "4000",
                  "--seed", "11", "--output", str(out)])
    assert rc == EXIT_OK
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "N,epsilon,exact_trace,mc_trace,mc_stderr,trace_norm_gap,marginal_gap"
    assert len(lines) == 3
    row = lines[1].split(",")
    mc, err, exact = float(row[3]), float(row[4]), float(row[2])
    assert abs(mc - exact) <= 4.0 * err


def test_padic_density_command(tmp_path):
    out = tmp_path / "pd.csv"
    rc = run_cli(["padic-density", "--p", "2", "--b", "2", "--t", "1",
                  "--m=-10..10", "--output", str(out)])
    assert rc == EXIT_OK
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "m,f,sphere_volume,probability"
    assert len(lines) == 22
    for line in lines[1:]:
        assert float(line.split(",")[1]) > 0.0


def test_padic_fk_command(tmp_path):
    out = tmp_path / "pfk.csv"
    rc = run_cli(["padic-fk", "--p", "2", "--b", "2", "--T", "1", "--V", "abs",
                  "--J", "4", "--samples", "300", "--seed", "9",
                  "--output", str(out)])
    assert rc == EXIT_OK
    lines = out.read_text().strip().splitlines()
    header = lines[0].split(",")
    row = lines[1].split(",")
    mean = float(row[header.index("mean")])
    assert 0.0 < mean < 1.0


def test_padic_checks_command(capsys):
    rc = run_cli(["padic-checks", "--p", "2", "--b", "1", "--t", "1",
                  "--s", "0.5", "--k", "0.5", "--points", "8", "--seed", "4"])
    assert rc == EXIT_OK
    outlines = capsys.readouterr().out.strip().splitlines()
    assert outlines[0] == "check,value,requirement,passed"
    assert all(line.endswith("true") for line in outlines[1:])


def test_fk_trace_command(capsys):
    rc = run_cli(["fk-trace", "--N", "9", "--V", "harmonic", "--t", "1",
                  "--samples", "400", "--seed", "21"])
    assert rc == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    header = lines[0].split(",")
    row = lines[1].split(",")
    mc = float(row[header.index("mc_trace")])
    err = float(row[header.index("mc_stderr")])
    exact = float(row[header.index("exact_trace")])
    assert abs(mc - exact) <= 4.0 * err


# -- path export ---------------------------------------------------------------------


def test_write_path_csv():
    p = CadlagPath(1.0, [0.25, 0.75], [(0, 0), (1, 0), (1, -1)])
    buf = io.StringIO()
    write_path_csv(p, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "time,state_0,state_1"
    assert len(lines) == 4
    assert lines[1].startswith("0,")
    assert lines[2].split(",")[0] == "0.25"


def test_float_format_is_full_precision(tmp_path):
    out = tmp_path / "s.csv"
    run_cli(["spectrum", "--N", "9", "--count", "1", "--output", str(out)])
    val = out.read_text().strip().splitlines()[1].split(",")[1]
    assert float(val) == float("%.17g" % float(val))
    assert len(val.split(".")[-1]) > 10  # full precision, not rounded display


def test_threads_flag_does_not_change_results(tmp_path, monkeypatch):
    out1 = tmp_path / "t1.csv"
    out2 = tmp_path / "t8.csv"
    args = ["fk-kernel", "--N", "9", "--V", "x^2", "--T", "0.5",
            "--samples", "1000", "--seed", "6"]
    assert run_cli(args + ["--threads", "1", "--output", str(out1)]) == EXIT_OK
    assert run_cli(args + ["--threads", "8", "--output", str(out2)]) == EXIT_OK
    assert out1.read_bytes() == out2.read_bytes()
    monkeypatch.setenv("FKLAB_THREADS", "4")
    out3 = tmp_path / "tenv.csv"
    assert run_cli(args + ["--output", str(out3)]) == EXIT_OK
    assert out1.read_bytes() == out3.read_bytes()
    manifest = json.loads((tmp_path / "tenv.csv.manifest.json").read_text())
    assert manifest["threads"] == 4
    monkeypatch.setenv("FKLAB_THREADS", "zero")
    assert run_cli(args) == EXIT_CONFIG
