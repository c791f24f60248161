import csv
import json
import subprocess
import sys

import pytest

from subfrac import __version__
from subfrac.cli import main
from subfrac.experiments import ConfigError, config_hash, load_config


def run(tmp_path, *args):
    return main(["run", *args, "--out", str(tmp_path / "out"), "--deterministic"])


def test_config_file_and_overrides(tmp_path):
    cfg_file = tmp_path / "exp.cfg"
    cfg_file.write_text("# comment\nexperiment = eigen\ngroup = abelian:1\ns = 0.25\nR = 0.5, 1\n")
    cfg = load_config(cfg_file, {"p": 1.5})
    assert cfg.p == 1.5 and cfg.R == [0.5, 1.0] and cfg.norm == "euclidean"
    assert load_config(cfg_file).p == 2.0


def test_hash_ignores_output_location():
    a = load_config(None, {"experiment": "eigen", "out": "x"})
    b = load_config(None, {"experiment": "eigen", "out": "y", "deterministic": True})
    c = load_config(None, {"experiment": "eigen", "seed": 1})
    assert config_hash(a) == config_hash(b) != config_hash(c)


@pytest.mark.parametrize("over,msg", [
    ({"experiment": "nope"}, "unknown experiment"),
    ({"experiment": "eigen", "s": 0.7, "p": 2.0}, "Q > sp"),
    ({"experiment": "hardy-mu", "gamma": "0.2,0.9"}, "gamma"),
    ({"experiment": "lyapunov", "theta": "1.5"}, "theta"),
    ({"experiment": "eigen", "group": "heisenberg1", "norm": "euclidean"}, "euclidean"),
    ({"experiment": "eigen", "colour": "red"}, "unknown config keys"),
    ({"experiment": "eigen", "n": "12,12"}, "n must be"),
])
def test_config_rejections(over, msg):
    with pytest.raises(ConfigError, match=msg):
        load_config(None, over)


def test_rejection_writes_nothing(tmp_path, capsys):
    code = run(tmp_path, "hardy-mu", "--gamma", "5")
    err = capsys.readouterr().err
    assert code == 2 and not (tmp_path / "out").exists()
    assert err.count("\n") == 1 and "gamma" in err


def test_argparse_errors_exit_2(capsys):
    assert main(["run", "bogus"]) == 2
    assert main([]) == 2


def test_run_writes_outputs(tmp_path):
    assert run(tmp_path, "eigen", "--count", "2") == 0
    out = tmp_path / "out"
    rows = list(csv.DictReader((out / "results.csv").open()))
    assert rows and all(r["version"] == __version__ for r in rows)
    assert len({r["config_hash"] for r in rows}) == 1
    ledger = [json.loads(x) for x in (out / "ledger.jsonl").read_text().splitlines()]
    assert len(ledger) == len(rows)
    summary = (out / "summary.txt").read_text()
    assert "elapsed" not in summary and "slope" in summary


def test_external_ledger_appends(tmp_path):
    ledger = tmp_path / "shared.jsonl"
    for _ in range(2):
        assert main(["run", "picone", "--count", "1", "--out", str(tmp_path / "o"),
                     "--ledger", str(ledger)]) == 0
    assert len(ledger.read_text().splitlines()) == 2


def test_determinism(tmp_path):
    for d in ("a", "b"):
        assert main(["run", "levelset", "--count", "3", "--deterministic",
                     "--out", str(tmp_path / d)]) == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_report(tmp_path):
    ledger = tmp_path / "l.jsonl"
    main(["run", "eigen", "--out", str(tmp_path / "o"), "--ledger", str(ledger)])
    main(["run", "hardy-mu", "--count", "3", "--out", str(tmp_path / "o"), "--ledger", str(ledger)])
    assert main(["report", "--ledger", str(ledger), "--out", str(tmp_path / "r")]) == 0
    slopes = list(csv.DictReader((tmp_path / "r" / "lambda_slopes.csv").open()))
    assert float(slopes[0]["slope"]) == pytest.approx(-0.5, abs=1e-6)
    mu = list(csv.DictReader((tmp_path / "r" / "mu_curve.csv").open()))
    assert len(mu) == 3
    text = (tmp_path / "r" / "report.txt").read_text()
    assert "abelian:1 / euclidean" in text


def test_report_empty_ledger(tmp_path):
    (tmp_path / "e.jsonl").write_text("")
    assert main(["report", "--ledger", str(tmp_path / "e.jsonl"), "--out", str(tmp_path / "r")]) == 0
    for name in ("pass_matrix.csv", "margins.csv", "mu_curve.csv", "lambda_vs_R.csv",
                 "sobolev_ratios.csv"):
        assert len((tmp_path / "r" / name).read_text().splitlines()) == 1


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "subfrac.cli", "--version"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and __version__ in out.stdout
