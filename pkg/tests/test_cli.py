import json
import subprocess
import sys

import pytest

from hapticid.cli import main

SMALL = ["--objects", "tuna_can", "bowl", "mug", "-L", "36", "-N", "5"]


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    assert main(["train", "--out", str(out), "--seed", "3", *SMALL]) == 0
    return out


def test_train_outputs(trained):
    assert sorted(p.name for p in (trained / "contacts").iterdir()) == ["bowl.txt", "mug.txt", "tuna_can.txt"]
    assert (trained / "tables_PN.htab").exists() and (trained / "tables_P.htab").exists()


def test_train_from_contact_files(trained, tmp_path):
    files = [str(trained / "contacts" / f"{n}.txt") for n in ("bowl", "mug")]
    assert main(["train", "--out", str(tmp_path), "-N", "5", "--contacts", *files]) == 0
    assert sorted(p.name for p in (tmp_path / "contacts").iterdir()) == ["bowl.txt", "mug.txt"]


@pytest.mark.parametrize("policy", ["passive", "active"])
def test_identify(trained, tmp_path, capsys, policy):
    trace = tmp_path / "trace.csv"
    rc = main(["identify", "--tables", str(trained), "--contacts", str(trained / "contacts" / "mug.txt"),
               "--method", "P", "--policy", policy, "--beta", "0.9", "-N", "5", "--trace", str(trace)])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("decided mug") or out.startswith("undecided")
    rows = trace.read_text().splitlines()
    assert rows[0] == "trial,t,pose_index,lik_tuna_can,lik_bowl,lik_mug,post_tuna_can,post_bowl,post_mug"
    assert len(rows) >= 2


def test_dump_table(trained, capsys):
    assert main(["dump-table", "--tables", str(trained / "tables_P.htab"), "--object", "bowl"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "distance_bin,count"
    bins = [int(ln.split(",")[0]) for ln in lines[1:]]
    assert bins == sorted(bins)
    assert sum(int(ln.split(",")[1]) for ln in lines[1:]) == 36 * 5 * 3


def test_experiment_and_plot(tmp_path, capsys):
    out = tmp_path / "exp"
    rc = main(["experiment", "--seed", "4", "--out", str(out), "--trials", "3", "--workers", "2", "--traces",
               *SMALL])
    assert rc == 0
    for name in ("summary.csv", "summary_overall.csv", "records.csv", "traces.csv"):
        assert (out / name).exists()
    assert len((out / "records.csv").read_text().splitlines()) == 1 + 3 * 3 * 2 * 2 * 7
    svgs = sorted(p.name for p in (out / "plots").glob("*.svg"))
    assert svgs == ["errors_active.svg", "errors_all.svg", "errors_passive.svg", "grasps_active.svg",
                    "grasps_passive.svg", "violin.svg"]
    capsys.readouterr()
    assert main(["plot", "--records", str(out / "records.csv"), "--out", str(tmp_path / "replot")]) == 0
    for svg in svgs:
        assert (tmp_path / "replot" / svg).read_bytes() == (out / "plots" / svg).read_bytes()


def test_experiment_requires_seed(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["experiment", "--out", str(tmp_path)])
    assert exc.value.code != 0


def test_config_file(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[experiment]\nobjects = bowl tuna_can\nn_poses = 24\nn_samples = 4\ntrials = 2\n"
                   "betas = 0.5\nmethods = P\npolicies = passive\n")
    assert main(["experiment", "--seed", "1", "--out", str(tmp_path / "o"), "--config", str(cfg),
                 "--no-plots"]) == 0
    assert len((tmp_path / "o" / "records.csv").read_text().splitlines()) == 1 + 2 * 2


@pytest.mark.parametrize("argv", [
    ["dump-table", "--tables", "/nonexistent/t.htab", "--object", "x"],
    ["experiment", "--seed", "1", "--out", "{tmp}/o", "--objects", "teapot"],
    ["experiment", "--seed", "1", "--out", "{tmp}/o", "--trials", "0"],
])
def test_errors_are_machine_readable(tmp_path, capsys, argv):
    argv = [a.replace("{tmp}", str(tmp_path)) for a in argv]
    assert main(argv) == 2
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert err.startswith("error: ")
    payload = json.loads(err[len("error: "):])
    assert set(payload) == {"type", "message"}


def test_dump_table_unknown_object(trained, capsys):
    assert main(["dump-table", "--tables", str(trained / "tables_PN.htab"), "--object", "teapot"]) == 2
    assert "teapot" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hapticid", "dump-table", "--tables", str(tmp_path / "no"),
                           "--object", "x"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert proc.stderr.startswith("error: ")
