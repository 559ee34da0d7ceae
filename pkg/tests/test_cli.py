import csv
import io
import json
import subprocess
import sys
from fractions import Fraction

import pytest

from specjac.cli import main, parse_grid, parse_poly
from specjac.errors import ConfigError

DELTA1 = ["--lambda", "4.5", "--mu", "2", "--kernel", "power", "--delta", "1"]
ZERO = ["--lambda", "3", "--mu", "1.5", "--kernel", "zero"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_validate(capsys):
    code, out, _ = run(capsys, "validate", *DELTA1)
    assert code == 0
    fields = dict(line.split("=", 1) for line in out.splitlines())
    assert fields["hbar"] == "1"
    assert fields["theta"] == "0"
    assert fields["Delta"] == "2.5"
    assert fields["small_mu"] == "False"


def test_moments_zero_kernel(capsys):
    code, out, _ = run(capsys, "moments", *ZERO, "--N", "5")
    assert code == 0
    got = [float(r["moment"]) for r in rows(out)]
    want, acc = [], Fraction(1)
    for n in range(6):
        want.append(float(acc))
        acc *= Fraction(3, 2) + n
        acc /= 3 + n
    assert got == pytest.approx(want, rel=1e-15)


def test_json_output(capsys):
    code, out, _ = run(capsys, "moments", *ZERO, "--N", "2", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert [d["n"] for d in data] == [0, 1, 2]
    assert data[1]["moment"] == 0.5


def test_density_and_basis(capsys):
    code, out, _ = run(capsys, "density", *ZERO, "--x", "0.25,0.5")
    assert code == 0
    vals = [float(r["density"]) for r in rows(out)]
    # Beta(1.5, 1.5) density
    assert vals[1] == pytest.approx(8 / 3.141592653589793 * 0.5, rel=1e-12)
    code, out, _ = run(capsys, "basis", *DELTA1, "--N", "2")
    assert code == 0
    assert {"n", "k", "coefficient"} <= set(rows(out)[0])


def test_semigroup_and_coeigen(capsys):
    code, out, _ = run(capsys, "semigroup", *DELTA1, "--f", "1", "--t", "0.5", "--x", "0.2,0.7")
    assert code == 0
    assert [float(r["value"]) for r in rows(out)] == pytest.approx([1.0, 1.0], abs=1e-12)
    code, out, _ = run(capsys, "coeigen", *DELTA1, "--n", "1", "--x", "0.1:0.9:5")
    assert code == 0
    assert len(rows(out)) == 5


def test_decay_report(capsys):
    code, out, _ = run(capsys, "decay", *DELTA1, "--m", "3.5")
    assert code == 0
    fields = dict(line.split("=", 1) for line in out.splitlines())
    assert float(fields["prefactor"]) == pytest.approx(12.25)
    assert float(fields["variance_rate"]) == 9


def test_verify_exit_codes(capsys):
    code, out, _ = run(capsys, "verify", *DELTA1, "--N", "8")
    assert code == 0
    assert all(r["status"] == "pass" for r in rows(out))


def test_unknown_kernel(capsys):
    code, _, err = run(capsys, "validate", "--lambda", "3", "--mu", "1", "--kernel", "bogus")
    assert code == 2
    assert err.startswith("error: ConfigError")


def test_bad_model_exit_two(capsys):
    code, _, err = run(capsys, "validate", "--lambda", "3", "--mu", "5", "--kernel", "zero")
    assert code == 2
    assert "error:" in err


def test_numerical_failure_exit_three(capsys):
    code, _, err = run(capsys, "density", "--lambda", "4.5", "--mu", "3", "--kernel", "power", "--delta", "1",
                       "--x", "0.5")
    assert code == 3
    assert err.startswith("error: SlowConvergence")


def test_config_file_sections(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[model]\nlambda = 3\nmu = 1.5\nkernel = zero\n[run]\nN = 3\n")
    code, out, _ = run(capsys, "moments", "--config", str(cfg))
    assert code == 0 and len(rows(out)) == 4
    # flags override the file
    code, out, _ = run(capsys, "moments", "--config", str(cfg), "--N", "1")
    assert len(rows(out)) == 2


def test_flat_config(tmp_path, capsys):
    cfg = tmp_path / "flat.cfg"
    cfg.write_text("model.lambda = 3\nmodel.mu = 1.5\nmodel.kernel = zero\nrun.N = 2\noutput.format = json\n")
    code, out, _ = run(capsys, "moments", "--config", str(cfg))
    assert code == 0 and len(json.loads(out)) == 3


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[model]\nlambda = 3\nmu = 1.5\nkernel = zero\ncolour = red\n")
    code, _, err = run(capsys, "validate", "--config", str(cfg))
    assert code == 2 and "colour" in err
    cfg.write_text("[model]\nlambda = 3\nmu = 1.5\nkernel = zero\n[run]\npaths = 10\n")
    code, _, _ = run(capsys, "moments", "--config", str(cfg))
    assert code == 2
    code, _, _ = run(capsys, "validate", "--config", str(tmp_path / "missing.ini"))
    assert code == 2


def test_tabulated_kernel(tmp_path, capsys):
    table = tmp_path / "kernel.csv"
    table.write_text("# r,h\n1.5,1.0\n2,0.5\n4,0.1\n")
    args = ["--lambda", "6", "--mu", "3", "--kernel", "tabulated", "--table", str(table)]
    code, _, err = run(capsys, "validate", *args)
    assert code == 2 and "tail_exponent" in err
    code, out, _ = run(capsys, "moments", *args, "--tail-exponent", "2", "--N", "2")
    assert code == 0
    vals = [float(r["moment"]) for r in rows(out)]
    assert vals[0] == 1 and 0 < vals[2] < vals[1] < 1


def test_out_file(tmp_path, capsys):
    target = tmp_path / "m.csv"
    code, out, _ = run(capsys, "moments", *ZERO, "--N", "2", "--out", str(target))
    assert code == 0 and out.strip() == f"wrote {target}"
    assert target.read_text().splitlines()[0] == "n,moment"


def test_simulate_is_byte_identical(tmp_path):
    cmd = [sys.executable, "-m", "specjac.cli", "simulate", *DELTA1, "--paths", "2000", "--dt", "0.01",
           "--T", "1", "--seed", "3", "--k", "2"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b
    assert a.decode().splitlines()[0] == "k,estimate,stderr,target"


def test_parsers(phi_delta1):
    assert parse_grid("0:1:3") == pytest.approx([0, 0.5, 1])
    assert parse_grid("0.1, 0.2") == pytest.approx([0.1, 0.2])
    with pytest.raises(ConfigError):
        parse_grid("0:1")
    assert parse_poly("1,2", phi_delta1).coeffs == (1, 2)
    assert parse_poly("P1", phi_delta1).degree == 1
    with pytest.raises(ConfigError):
        parse_poly("x^2", phi_delta1)
