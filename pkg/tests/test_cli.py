import csv
import hashlib
import json
import subprocess
import sys

import pytest

from lrdvervaat.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_writes_outputs(tmp_path, capsys):
    out = tmp_path / "path.csv"
    code, stdout, _ = run(["simulate", "--beta", "0.7", "--n", "256", "--seed", "3", "--out", str(out)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "i,x" and len(lines) == 257
    summary = json.loads((tmp_path / "path.csv.summary.json").read_text())
    assert summary["n"] == 256 and summary["model"]["truncation_m"] == 16 * 256
    man = json.loads((tmp_path / "path.csv.manifest.json").read_text())
    assert man["exit_code"] == 0
    digest = hashlib.sha256(out.read_bytes()).hexdigest()
    assert digest in json.dumps(man)
    # same seed, same bytes
    out2 = tmp_path / "again.csv"
    run(["simulate", "--beta", "0.7", "--n", "256", "--seed", "3", "--out", str(out2)], capsys)
    assert out2.read_bytes() == out.read_bytes()


def test_simulate_missing_beta(tmp_path, capsys):
    code, _, err = run(["simulate", "--n", "16", "--out", str(tmp_path / "x.csv")], capsys)
    assert code == 2 and "beta" in err


def test_simulate_bad_beta(tmp_path, capsys):
    code, _, err = run(["simulate", "--beta", "0.4", "--n", "16", "--out", str(tmp_path / "x.csv")], capsys)
    assert code == 3 and "beta outside" in err


def test_unknown_subcommand(capsys):
    code, _, err = run(["frobnicate"], capsys)
    assert code == 2 and "invalid choice" in err


def test_config_file_and_flag_precedence(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text("[lrd_model]\nbeta = 0.7\nn = 32\nseed = 1\n")
    out = tmp_path / "p.csv"
    code, _, _ = run(["simulate", "--config", str(ini), "--n", "64", "--out", str(out)], capsys)
    assert code == 0
    assert len(out.read_text().splitlines()) == 65


@pytest.mark.parametrize("body,needle", [
    ("[lrd_model]\nbeta = abc\n", "lrd_model.beta"),
    ("[lrd_model]\nbeta = 0.7\nbogus = 1\n", ":3:"),
    ("[nowhere]\nx = 1\n", "nowhere"),
])
def test_bad_config(tmp_path, capsys, body, needle):
    ini = tmp_path / "bad.ini"
    ini.write_text(body)
    code, _, err = run(["simulate", "--config", str(ini), "--n", "16", "--out", str(tmp_path / "x.csv")], capsys)
    assert code == 2 and needle in err


def test_verify_outputs(tmp_path, capsys):
    code, stdout, _ = run(["verify", "--theorem", "thm13", "--beta", "0.7", "--n-list", "64,256",
                           "--R", "20", "--threads", "1", "--out-dir", str(tmp_path)], capsys)
    assert code in (0, 1)
    v = json.loads((tmp_path / "thm13_verdict.json").read_text())
    assert json.loads(stdout)["passed"] == v["passed"] and v["theorem"] == "thm13"
    assert (code == 0) == v["passed"]
    with open(tmp_path / "thm13_raw.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 20 * 5 and {r["statistic"] for r in rows} == {"V"}
    for name in ("thm13_manifest.json", "thm13_residual_vs_n.csv", "thm13_ecdf_vs_limit.csv"):
        assert (tmp_path / name).exists()
    man = json.loads((tmp_path / "thm13_manifest.json").read_text())
    assert man["master_seed"] == 12345 and man["exit_code"] == code


def test_verify_out_of_hypothesis(tmp_path, capsys):
    code, _, _ = run(["verify", "--theorem", "thm14", "--beta", "0.8", "--n-list", "64,256",
                      "--R", "5", "--out-dir", str(tmp_path)], capsys)
    assert code == 4
    v = json.loads((tmp_path / "thm14_verdict.json").read_text())
    assert v["out_of_hypothesis"] and not (tmp_path / "thm14_raw.csv").exists()
    code, _, _ = run(["verify", "--theorem", "thm14", "--beta", "0.8", "--n-list", "64,256",
                      "--R", "5", "--threads", "1", "--force", "--out-dir", str(tmp_path)], capsys)
    assert code == 4 and (tmp_path / "thm14_raw.csv").exists()


def test_verify_missing_theorem(tmp_path, capsys):
    code, _, err = run(["verify", "--beta", "0.7", "--out-dir", str(tmp_path)], capsys)
    assert code == 2 and "theorem" in err


def test_check_conditions(capsys):
    code, stdout, _ = run(["check-conditions", "--family", "pareto", "--alpha", "4", "--delta", "1"], capsys)
    assert code == 0
    reps = json.loads(stdout)["reports"]
    assert [r["condition"] for r in reps] == ["A", "B", "C"]
    assert all(r["verdict"] == "bounded" for r in reps)
    code, stdout, _ = run(["check-conditions", "--condition", "B", "--mu", "0"], capsys)
    assert json.loads(stdout)["reports"][0]["verdict"] == "unbounded-trend"


def test_constants(capsys):
    code, stdout, _ = run(["constants", "--beta", "0.7", "--n", "65536"], capsys)
    assert code == 0
    d = json.loads(stdout)
    s = d["scaling"]
    assert s["sigma_n1_exact"] / s["sigma_n1_asym"] == pytest.approx(1.0, abs=0.05)
    assert d["vervaat_error_prefactor"] == pytest.approx(3.0070, abs=1e-4)


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "lrdvervaat.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
