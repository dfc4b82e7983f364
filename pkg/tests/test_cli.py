import csv
import io
import json
import subprocess
import sys

import pytest

from deanon.cli import UsageError, main, parse_and_validate
from deanon.experiments import CSV_COLUMNS


def run_cli(*argv):
    return subprocess.run([sys.executable, "-m", "deanon", *argv], capture_output=True, text=True)


def test_parse_happy_path():
    args = parse_and_validate("run --strategy map --users 1024 --groups 4096 --edge-prob 0.5 "
                              "--trials 1000 --seed 7".split())
    (cfg,) = args.configs
    assert (cfg.strategy, cfg.m, cfg.n, cfg.p, cfg.trials, cfg.master_seed) == ("map", 1024, 4096, 0.5, 1000, 7)
    assert cfg.n_prime is None


def test_parse_edge_prob_out_of_range():
    with pytest.raises(UsageError, match=r"edge-prob must be in \[0,1\]"):
        parse_and_validate("run --strategy gis --users 10 --edge-prob 1.5".split())


def test_parse_nprime_above_groups():
    with pytest.raises(UsageError, match="nprime"):
        parse_and_validate("run --strategy gis --users 100 --nprime 5000 --groups 4096".split())


@pytest.mark.parametrize("argv", [
    "run --users 10",                                  # missing --strategy
    "run --strategy gis --users 10 --bogus 1",         # unknown flag
    "run --strategy nope --users 10",
    "run --strategy gis --users 0",
    "run --strategy gis --users 10 --trials abc",
    "run --strategy tss --users 10 --epsilon -1",
    "sweep --strategy gis --users 10 --f1 0.2,3",
])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv.split()) == 1
    assert capsys.readouterr().err


def test_sweep_cross_product():
    args = parse_and_validate("sweep --strategy gis,map --users 16 --users 32 --trials 5".split())
    assert [(c.strategy, c.m) for c in args.configs] == [("gis", 16), ("gis", 32), ("map", 16), ("map", 32)]


def test_run_csv_output(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(f"run --strategy gis --users 64 --groups 40 --nprime 8 --trials 50 --out {out}".split()) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# deanon ")
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1
    assert rows[0]["strategy"] == "gis" and rows[0]["nprime"] == "8"
    assert rows[0]["runtime_s"] == ""


def test_timing_flag_fills_runtime(tmp_path):
    out = tmp_path / "r.csv"
    assert main(f"run --strategy exhaustive --users 8 --trials 5 --timing --out {out}".split()) == 0
    row = next(csv.DictReader(io.StringIO("\n".join(out.read_text().splitlines()[1:]))))
    assert float(row["runtime_s"]) >= 0


def test_json_output(tmp_path):
    out = tmp_path / "r.json"
    assert main(f"sweep --strategy exhaustive,map --users 32 --nprime 4 --groups 8 --trials 20 "
                f"--format json --out {out}".split()) == 0
    data = json.loads(out.read_text())
    assert len(data) == 2
    assert list(data[0]) == list(CSV_COLUMNS)
    assert data[1]["nprime"] == 4


def test_byte_identical_reruns(tmp_path):
    argv = "sweep --strategy gis,map,tss --users 256 --e1 0.1 --f1 0.05 --trials 40 --seed 11"
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(argv.split() + ["--out", str(a)]) == 0
    assert main(argv.split() + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_partial_failure_footer(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code = main(f"sweep --strategy tss,exhaustive --users 4 --trials 10 --out {out}".split())
    assert code == 2
    text = out.read_text()
    assert "exhaustive" in text
    footer = text.splitlines()[-1]
    assert footer.startswith("# failed_cells:") and "tss" in footer
    assert "failed" in capsys.readouterr().err


def test_unwritable_destination(tmp_path):
    target = tmp_path / "missing" / "r.csv"
    assert main(f"run --strategy exhaustive --users 8 --trials 5 --out {target}".split()) == 2


def test_oracle_subcommand(capsys):
    assert main("oracle --strategy gis --users 2 --groups 1 --nprime 1".split()) == 0
    header, values = capsys.readouterr().out.splitlines()
    row = dict(zip(header.split(","), values.split(",")))
    assert float(row["exact_mean_q"]) == pytest.approx(2.375)


def test_oracle_requires_groups():
    assert main("oracle --strategy gis --users 2".split()) == 1


def test_oracle_too_large():
    assert main("oracle --strategy gis --users 9 --groups 3 --nprime 1".split()) == 2


def test_selftest_small(capsys):
    from deanon.cli import selftest
    out = io.StringIO()
    assert selftest(trials=3000, seed=1, out=out)
    assert out.getvalue().splitlines()[-1].endswith("checks passed")


def test_module_entry_point():
    proc = run_cli("run", "--strategy", "exhaustive", "--users", "4", "--trials", "3")
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1].split(",") == list(CSV_COLUMNS)
    proc = run_cli("run", "--strategy", "exhaustive")
    assert proc.returncode == 1
