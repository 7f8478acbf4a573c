from pathlib import Path

import pytest

from zrpsim.cli import main

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def test_missing_config_exits_2(tmp_path, capsys):
    rc = main(["oracle", "--config", str(tmp_path / "absent.ini")])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_bad_config_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[environment]\nwhat = 1\n")
    rc = main(["stationarity", "--config", str(p), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_oracle_passes_and_prints_summary(tmp_path, capsys):
    rc = main(["oracle", "--config", str(CONFIG_DIR / "oracle.ini"),
               "--out", str(tmp_path / "o")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "oracle: PASS" in out
    assert (tmp_path / "o" / "summary.txt").exists()
    assert (tmp_path / "o" / "oracle.csv").exists()


def test_failing_check_exits_1(tmp_path, capsys):
    # a couple run far too short to shed its discrepancies
    p = tmp_path / "couple.ini"
    p.write_text("""
[environment]
c = 0.2
beta = 1.0
dims = 32
seed = 452
[dynamics]
alpha = 0.2
t_end = 2
sample_every = 1
dynamics_seed = 4
[experiment]
seed = 3
replicas = 3
n_probes = 3
""")
    rc = main(["couple", "--config", str(p), "--out", str(tmp_path / "o")])
    assert rc == 1
    assert "FAIL" in (tmp_path / "o" / "summary.txt").read_text()


def test_lemma2_alias_runs_recurrence(tmp_path):
    p = tmp_path / "r.ini"
    p.write_text("""
[environment]
c = 0.2
beta = 1.0
dims = 16
seed = 8
[dynamics]
alpha = 0.25
t_end = 150
dynamics_seed = 6
[experiment]
seed = 6
replicas = 3
""")
    rc = main(["lemma2", "--config", str(p), "--out", str(tmp_path / "o")])
    assert rc in (0, 1)
    text = (tmp_path / "o" / "summary.txt").read_text()
    assert text.startswith("experiment: recurrence")


def test_seed_override_reproducible(tmp_path):
    base = CONFIG_DIR / "oracle.ini"
    for name, seed in (("a", "1"), ("b", "2"), ("c", "1")):
        rc = main(["oracle", "--config", str(base), "--seed", seed,
                   "--out", str(tmp_path / name)])
        assert rc == 0
    a = (tmp_path / "a" / "oracle.csv").read_bytes()
    c = (tmp_path / "c" / "oracle.csv").read_bytes()
    assert a == c
