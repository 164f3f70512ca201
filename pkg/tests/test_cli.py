import csv
import hashlib
import json
import subprocess
import sys

import pytest

from dampedns import cli, suites
from dampedns.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USER, main

SMALL = """
dt = 2e-3
t_end = {t_end}
seed = 3

[grid]
modes = [8, 8, 8]

[damping]
kind = "{kind}"
alpha = 1.0
{beta}

[ic]
kind = "taylor_green"
perturbation = 0.1

[checks]
dz = true
decay = true
energy_rel_tolerance = 1e-4
dz_rel_tolerance = 1e-4

[output]
checkpoint_every = {every}
{extra}
"""


def config(tmp_path, name="c.toml", t_end=0.02, kind="log", beta="", every=5, extra=""):
    p = tmp_path / name
    p.write_text(SMALL.format(t_end=t_end, kind=kind, beta=beta, every=every, extra=extra))
    return str(p)


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_run_zero_horizon(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", config(tmp_path, t_end=0.0), "--out", str(out)]) == EXIT_OK
    lines = (out / "ledger.csv").read_text().splitlines()
    assert len(lines) == 2  # header + one row


def test_run_outputs_and_manifest(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", config(tmp_path), "--out", str(out)]) == EXIT_OK
    man = _manifest(out)
    assert man["status"] == "ok" and man["seed"] == 3
    assert set(man["checks"].values()) == {"pass"}
    assert {"ledger.csv", "report.txt", "checkpoint_00000005.bin", "checkpoint_00000010.bin"} <= set(man["files"])
    for name, digest in man["files"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    assert man["start_time"] <= man["end_time"]


def test_rerun_identical_bytes(tmp_path):
    cfg = config(tmp_path)
    main(["run", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["run", "--config", cfg, "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "ledger.csv").read_bytes() == (tmp_path / "b" / "ledger.csv").read_bytes()


def test_seed_override_changes_ic(tmp_path):
    cfg = config(tmp_path)
    main(["run", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "4"])
    assert (tmp_path / "a" / "ledger.csv").read_bytes() != (tmp_path / "b" / "ledger.csv").read_bytes()
    assert _manifest(tmp_path / "b")["seed"] == 4


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[grid]\nmodes = [8]\nspeed = 3\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_USER
    assert "grid.speed" in capsys.readouterr().err
    bad.write_text("[grid\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_USER
    assert "line 1" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == EXIT_USER
    assert main(["frobnicate"]) == EXIT_USER
    assert main(["run"]) == EXIT_USER


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning", "ignore:invalid value:RuntimeWarning")
def test_blow_up_exit_3(tmp_path, capsys):
    p = tmp_path / "boom.toml"
    p.write_text('dt = 1.0\nt_end = 5.0\ncheck_cfl = false\n[grid]\nmodes = [8]\n'
                 '[damping]\nkind = "power"\nalpha = 1.0\nbeta = 5.0\n'
                 '[ic]\nkind = "random_div_free"\nenergy_target = 1e150\n')
    out = tmp_path / "o"
    assert main(["run", "--config", str(p), "--out", str(out)]) == EXIT_NUMERIC
    assert "blow-up at step" in capsys.readouterr().err
    man = _manifest(out)
    assert man["status"] == "blow-up" and "error" in man


def test_failed_check_exit_3(tmp_path):
    config(tmp_path)
    p = tmp_path / "strict.toml"
    p.write_text((tmp_path / "c.toml").read_text().replace("energy_rel_tolerance = 1e-4", "energy_tolerance = 1e-30"))
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_NUMERIC
    assert _manifest(tmp_path / "o")["status"] == "check failed"


# verify


def test_verify_unknown_suite():
    assert main(["verify", "--suite", "nope"]) == EXIT_USER


def test_verify_oracle_table(capsys):
    assert main(["verify", "--suite", "oracle"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "nonlinear_vs_convolution" in out and "forward_vs_naive_dft" in out


def test_verify_monotonicity_prints_min(monkeypatch, capsys):
    monkeypatch.setitem(suites.SUITES, "monotonicity", lambda seed=0: suites.monotonicity_suite(trials=1000, seed=seed))
    assert main(["verify", "--suite", "monotonicity"]) == EXIT_OK
    assert "min inner product" in capsys.readouterr().out


def test_verify_all_worst_first(monkeypatch, capsys):
    def fake(seed=0):
        return [suites.SuiteCheck("fake", "good", 1e-20, 1.0, True),
                suites.SuiteCheck("fake", "tight", 0.9, 1.0, True),
                suites.SuiteCheck("fake", "bad", 2.0, 1.0, False)]

    monkeypatch.setattr(suites, "SUITES", {"fake": fake, "fake2": lambda seed=0: []})
    assert main(["verify", "--suite", "all"]) == EXIT_NUMERIC
    names = [line.split()[1] for line in capsys.readouterr().out.splitlines()[1:]]
    assert names == ["bad", "tight", "good"]


# resume


def test_resume_bitwise(tmp_path):
    cfg = config(tmp_path)
    full = tmp_path / "full"
    main(["run", "--config", cfg, "--out", str(full)])
    # fresh directory holding only the mid-run checkpoint
    part = tmp_path / "part"
    part.mkdir()
    (part / "checkpoint_00000005.bin").write_bytes((full / "checkpoint_00000005.bin").read_bytes())
    assert main(["resume", str(part / "checkpoint_00000005.bin"), "--config", cfg]) == EXIT_OK
    assert (part / "checkpoint_00000010.bin").read_bytes() == (full / "checkpoint_00000010.bin").read_bytes()
    # resuming inside the original directory reproduces the whole ledger
    again = tmp_path / "again"
    again.mkdir()
    for f in full.iterdir():
        (again / f.name).write_bytes(f.read_bytes())
    assert main(["resume", "--checkpoint", str(again / "checkpoint_00000005.bin"), "--config", cfg]) == EXIT_OK
    assert (again / "ledger.csv").read_bytes() == (full / "ledger.csv").read_bytes()
    for name, digest in _manifest(again)["files"].items():
        assert hashlib.sha256((again / name).read_bytes()).hexdigest() == digest


def test_resume_extends_horizon(tmp_path):
    short, long_ = config(tmp_path, "s.toml", t_end=0.01), config(tmp_path, "l.toml", t_end=0.02)
    main(["run", "--config", long_, "--out", str(tmp_path / "long")])
    main(["run", "--config", short, "--out", str(tmp_path / "short")])
    assert main(["resume", str(tmp_path / "short" / "checkpoint_00000005.bin"), "--config", long_]) == EXIT_OK
    assert (tmp_path / "short" / "ledger.csv").read_bytes() == (tmp_path / "long" / "ledger.csv").read_bytes()


def test_resume_rejects_mismatch(tmp_path, capsys):
    cfg = config(tmp_path)
    main(["run", "--config", cfg, "--out", str(tmp_path / "o")])
    ckpt = str(tmp_path / "o" / "checkpoint_00000005.bin")
    other = tmp_path / "g.toml"
    other.write_text((tmp_path / "c.toml").read_text().replace("modes = [8, 8, 8]", "modes = [16, 16, 16]"))
    assert main(["resume", ckpt, "--config", str(other)]) == EXIT_USER
    other.write_text((tmp_path / "c.toml").read_text().replace("alpha = 1.0", "alpha = 2.0"))
    assert main(["resume", ckpt, "--config", str(other)]) == EXIT_USER
    assert "hash" in capsys.readouterr().err
    assert main(["resume", "--config", cfg]) == EXIT_USER


# sweep


def _summary(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_sweep_one_point_equals_run(tmp_path):
    cfg = config(tmp_path, extra="[sweep]\nalpha = [1.0]\n")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "s"), "--workers", "1"]) == EXIT_OK
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "r")]) == EXIT_OK
    assert (tmp_path / "s" / "alpha-1" / "ledger.csv").read_bytes() == (tmp_path / "r" / "ledger.csv").read_bytes()


def test_sweep_alpha_grid_order_independent(tmp_path, monkeypatch):
    cfg = config(tmp_path, t_end=0.01, every=0, extra="[sweep]\nalpha = [4.0, 0.5, 2.0, 1.0]\n")
    monkeypatch.setenv(cli.WORKERS_ENV, "2")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "b"), "--workers", "1"]) == EXIT_OK
    a = (tmp_path / "a" / cli.SUMMARY).read_bytes()
    assert a == (tmp_path / "b" / cli.SUMMARY).read_bytes()
    rows = _summary(tmp_path / "a" / cli.SUMMARY)
    assert [float(r["alpha"]) for r in rows] == [0.5, 1.0, 2.0, 4.0]
    assert all(r["status"] == "ok" for r in rows)


def test_sweep_child_failure_recorded(tmp_path):
    # beta = 2 is rejected for the power law; the other child still runs
    cfg = config(tmp_path, t_end=0.01, every=0, kind="power", beta="beta = 4.0",
                 extra="[sweep]\nbeta = [2.0, 4.0]\n")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "s"), "--workers", "1"]) != EXIT_OK
    rows = {r["directory"]: r for r in _summary(tmp_path / "s" / cli.SUMMARY)}
    assert rows["beta-4"]["status"] == "ok"
    assert rows["beta-2"]["status"] == "failed"


def test_resume_mid_sweep_child(tmp_path):
    cfg = config(tmp_path, t_end=0.02, extra="[sweep]\nalpha = [1.0, 2.0]\n")
    out = tmp_path / "s"
    main(["sweep", "--config", cfg, "--out", str(out), "--workers", "1"])
    before = (out / cli.SUMMARY).read_bytes()
    child = out / "alpha-2"
    done = (child / "ledger.csv").read_bytes()
    # simulate an interrupted child: drop its manifest and final checkpoint
    (child / "manifest.json").unlink()
    (child / "checkpoint_00000010.bin").unlink()
    cli.write_sweep_summary(out)
    assert b"failed" in (out / cli.SUMMARY).read_bytes()
    child_cfg = tmp_path / "child.toml"
    child_cfg.write_text((tmp_path / "c.toml").read_text().replace("[sweep]\nalpha = [1.0, 2.0]", "[sweep]\nalpha = [2.0]"))
    assert main(["resume", str(child / "checkpoint_00000005.bin"), "--config", str(child_cfg)]) == EXIT_OK
    assert (child / "ledger.csv").read_bytes() == done
    after = _summary(out / cli.SUMMARY)
    assert all(r["status"] == "ok" for r in after)
    assert (out / cli.SUMMARY).read_bytes() == before


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dampedns.cli", "verify", "--suite", "bogus"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_USER
