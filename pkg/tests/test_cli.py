import csv
import io
import json
import math
import subprocess
import sys

import pytest

from chiralcp import cli, exact
from chiralcp.exact import Distinct, EnsembleParams


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_eval_inverse_cp(capsys):
    code, out, _ = run(capsys, "eval", "inverse-cp", "--n", "2", "--l", "0",
                       "--omegas", "0.5,1.5", "--y", "-1")
    assert code == 0
    rows = rows_of(out)
    assert len(rows) == 1
    ref = exact.inverse_cp(EnsembleParams(2, 0, Distinct((0.5, 1.5))), -1.0).value
    assert float(rows[0]["value_re"]) == pytest.approx(ref.real, rel=1e-14)
    assert out.startswith("# generated ")


def test_eval_kernel_n1(capsys):
    code, out, _ = run(capsys, "eval", "kernel", "--n", "1", "--l", "0", "--omegas", "1e-12",
                       "--x", "0.3", "--y", "0.7")
    assert code == 0
    assert float(rows_of(out)[0]["value_re"]) == pytest.approx(math.exp(-0.7), rel=1e-9)


def test_eval_other_kinds(capsys):
    for argv in (["cp", "--n", "2", "--l", "1", "--z", "1.0", "--zarg", "2,-1+1j"],
                 ["ratio", "--l", "0", "--omegas", "0.5,1.5", "--v", "-1", "--zarg", "-2"],
                 ["d", "--n", "3", "--l", "1", "--z-sq", "0.5", "--p", "0.1,1"],
                 ["g", "--n", "3", "--l", "1", "--z-sq", "1", "--tau", "0.4"]):
        code, out, err = run(capsys, "eval", *argv, "--no-timestamp")
        assert code == 0, err
        assert rows_of(out)


def test_missing_flag(capsys):
    code, _, err = run(capsys, "eval", "inverse-cp", "--n", "2", "--l", "0", "--omegas", "0.5,1.5")
    assert code == 2
    assert "--y" in err


@pytest.mark.parametrize("argv", [
    ["eval", "inverse-cp", "--l", "0", "--omegas", "0.5,1.5", "--z", "1", "--y", "-1"],
    ["eval", "inverse-cp", "--l", "0", "--omegas", "0.5,1.5", "--y", "1"],
    ["eval", "inverse-cp", "--l", "0", "--omegas", "0.5,1.5", "--y", "-1", "--format", "xml"],
    ["eval", "nonsense"],
    ["asymptotics", "kernel", "--l", "0", "--r", "1.2", "--n-list", "10,20"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err


def test_r_requirement_message(capsys):
    code, _, err = run(capsys, "asymptotics", "kernel", "--l", "0", "--r", "1.2", "--n-list", "10,20")
    assert code == 2 and "R < 1" in err


def test_numeric_failure_exit_code(capsys, monkeypatch):
    from chiralcp.errors import ConvergenceError

    def boom(*a, **k):
        raise ConvergenceError("did not converge")

    monkeypatch.setattr(exact, "inverse_cp", boom)
    code, _, err = run(capsys, "eval", "inverse-cp", "--l", "0", "--omegas", "0.5", "--y", "-1")
    assert code == 3 and "converge" in err


def test_asymptotics_sweep(capsys):
    code, out, err = run(capsys, "asymptotics", "inverse-cp", "--l", "0", "--r", "0.5", "--xi", "1",
                         "--n-list", "20,40,80")
    assert code == 0
    errs = [float(r["rel_err"]) for r in rows_of(out)]
    assert len(errs) == 3 and errs[0] > errs[1] > errs[2]


def test_require_decreasing(capsys):
    # xi = 4 cp sweep is not monotone at these N
    code, _, err = run(capsys, "asymptotics", "cp", "--l", "0", "--r", "0.5", "--xi", "4",
                       "--n-list", "20,40,80", "--require-decreasing")
    assert code == 4 and "not strictly decreasing" in err


def test_sample_deterministic(capsys, tmp_path):
    argv = ["sample", "--n", "2", "--l", "1", "--z", "1.0", "--count", "1000", "--seed", "1",
            "--no-timestamp"]
    code, first, _ = run(capsys, *argv)
    assert code == 0
    rows = rows_of(first)
    assert len(rows) == 1000
    assert list(rows[0]) == ["draw", "x1", "x2", "log_weight"]
    _, second, _ = run(capsys, *argv)
    assert first == second


def test_outputs_reproducible_and_sidecar(capsys, tmp_path):
    out1, out2, out3 = (tmp_path / f"o{k}.csv" for k in range(3))
    base = ["eval", "cp", "--n", "3", "--l", "1", "--omegas", "0.2,1,2.5", "--zarg", "1.5,-2",
            "--no-timestamp"]
    assert cli.main(base + ["--out", str(out1)]) == 0
    assert cli.main(base + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    sidecar = tmp_path / "o0.csv.config"
    assert "command=eval" in sidecar.read_text()
    # rerunning from the resolved config reproduces the output
    assert cli.main(["eval", "cp", "--config", str(sidecar), "--out", str(out3)]) == 0
    assert out3.read_bytes() == out1.read_bytes()


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nn=2\nl=0\nomegas=0.5,1.5\ny=-1\nno-timestamp=true\n")
    code, a, _ = run(capsys, "eval", "inverse-cp", "--config", str(cfg))
    assert code == 0
    code, b, _ = run(capsys, "eval", "inverse-cp", "--config", str(cfg), "--y", "-2")
    assert float(rows_of(b)[0]["y_re"]) == -2.0 and a != b
    bad = tmp_path / "bad.cfg"
    bad.write_text("command=sample\n")
    code, _, err = run(capsys, "eval", "inverse-cp", "--config", str(bad))
    assert code == 2
    bad.write_text("bogus=1\n")
    assert run(capsys, "eval", "inverse-cp", "--config", str(bad))[0] == 2


def test_json_round_trip(capsys):
    code, out, _ = run(capsys, "eval", "ratio", "--l", "1", "--omegas", "0.5,1.5", "--v", "-1,2",
                       "--zarg", "-2+0.5j", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["columns"] == cli.EVAL_COLUMNS["ratio"] + cli.VALUE_COLUMNS
    assert len(doc["rows"]) == 2
    p = EnsembleParams(2, 1, Distinct((0.5, 1.5)))
    for row in doc["rows"]:
        ref = exact.ratio_cp(p, complex(row["v_re"], row["v_im"]), -2 + 0.5j).value
        assert complex(row["value_re"], row["value_im"]) == pytest.approx(ref, rel=1e-13)
    assert json.loads(json.dumps(doc)) == doc


def test_csv_round_trip_is_lossless(capsys):
    _, out, _ = run(capsys, "eval", "inverse-cp", "--l", "0", "--omegas", "0.5,1.5", "--y", "-1")
    ref = exact.inverse_cp(EnsembleParams(2, 0, Distinct((0.5, 1.5))), -1.0).value
    assert float(rows_of(out)[0]["value_re"]) == ref.real


def _help_columns(text):
    cols = {}
    block = text.split("output columns:")[1]
    for line in block.splitlines():
        parts = line.split(None, 2) if line.startswith("  eval") else line.split(None, 1)
        if line.startswith("  eval"):
            cols[parts[0] + " " + parts[1]] = [c.strip() for c in parts[2].split(",")]
        elif parts and parts[0] in ("verify", "asymptotics"):
            cols[parts[0]] = [c.strip() for c in parts[1].split(",")]
    return cols


def test_help_lists_emitted_columns(capsys):
    assert cli.main(["--help"]) == 0
    text = capsys.readouterr().out
    cols = _help_columns(text)
    for kind in cli.EVAL_KINDS:
        assert cols[f"eval {kind}"] == cli.EVAL_COLUMNS[kind] + cli.VALUE_COLUMNS
    assert cols["verify"] == cli.VERIFY_COLUMNS
    assert cols["asymptotics"] == cli.SWEEP_COLUMNS
    _, out, _ = run(capsys, "asymptotics", "g", "--l", "1", "--r", "0.5", "--w", "0.7", "--a", "2",
                    "--n-list", "10,30")
    assert list(rows_of(out)[0]) == cli.SWEEP_COLUMNS


def test_verify_identities(capsys, tmp_path):
    out = tmp_path / "ids.json"
    code, _, err = run(capsys, "verify", "identities", "--format", "json", "--out", str(out))
    assert code == 0 and "PASS" in err
    doc = json.loads(out.read_text())
    suites = {r["suite"] for r in doc["rows"]}
    assert suites == {"connection-l0", "connection-l1", "bessel-identity"}
    assert all(r["passed"] for r in doc["rows"])


def test_verify_mc_deterministic(capsys):
    argv = ["verify", "mc", "--samples", "20000", "--seed", "7", "--no-timestamp"]
    code, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b
    assert code in (0, 4)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "chiralcp", "eval", "cp", "--n", "1", "--l", "0",
                          "--z-sq", "0", "--zarg", "5", "--no-timestamp"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert float(rows_of(res.stdout)[0]["value_re"]) == pytest.approx(4.0)
