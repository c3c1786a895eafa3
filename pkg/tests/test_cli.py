import csv

import pytest

from synvolution.cli import bench, main
from synvolution.config import ConfigError, echo_config, parse_config, resolve_train_config


def test_parse_config_comments_and_errors():
    cfg = parse_config("# header\nlr = 0.01  # inline\n\ntask=pattern\n")
    assert cfg == {"lr": "0.01", "task": "pattern"}
    with pytest.raises(ConfigError, match=":3: unknown key 'colour'"):
        parse_config("lr = 1\n\ncolour = red\n", allowed={"lr"})
    with pytest.raises(ConfigError, match=":1:"):
        parse_config("just words\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("a = 1\na = 2\n")


def test_resolve_and_echo(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("task = majority\neta = 0.2\n", encoding="utf-8")
    cfg = resolve_train_config(path, {"eta": 0.05})
    assert cfg.task == "majority" and cfg.eta == 0.05
    lines = echo_config(cfg).splitlines()
    assert lines == sorted(lines)
    assert "eta = 0.05" in lines
    with pytest.raises(ConfigError):
        resolve_train_config(path, {"eta": 1.5})


def test_unitary_check_exit_codes(capsys):
    assert main(["unitary-check", "--N", "16", "--seeds", "5"]) == 0
    assert main(["unitary-check", "--N", "63", "--seeds", "2"]) == 0
    assert main(["unitary-check", "--N", "12", "--m", "5"]) == 2
    assert "does not divide" in capsys.readouterr().err


def test_gradcheck_command(capsys):
    assert main(["gradcheck"]) == 0
    out = capsys.readouterr().out
    names = [line.split()[1] for line in out.splitlines() if line.startswith(("PASS", "FAIL"))]
    assert len(names) == len(set(names)) and "converter_forward" in names
    assert main(["gradcheck", "--inject-broken-vjp", "mul"]) == 1
    assert "FAIL  hadamard" in capsys.readouterr().out


def test_kpm_demo_command(tmp_path, capsys):
    out = tmp_path / "k.csv"
    assert main(["kpm-demo", "--K", "50", "--out", str(out)]) == 0
    first = out.read_bytes()
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 2002 and all(len(r) == 9 for r in rows)
    assert main(["kpm-demo", "--K", "50", "--out", str(out)]) == 0
    assert out.read_bytes() == first
    assert main(["kpm-demo", "--K", "0", "--out", str(out)]) == 2
    assert main(["kpm-demo", "--out", str(tmp_path / "missing" / "k.csv")]) == 2


def test_bench_usage_and_rows(capsys):
    assert main(["bench", "--reps", "0"]) == 2
    assert main(["bench", "--N", "12"]) == 2
    rows = bench([64, 128], reps=2)
    assert rows[0]["ratio"] is None and rows[1]["ratio"] > 0 and rows[1]["dense"] > 0


def test_bad_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["bench", "--frobnicate"])
    assert exc.value.code == 2


def test_train_and_eval_commands(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "nope.cfg")]) == 2
    assert "nope.cfg" in capsys.readouterr().err
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text("N = 12\nD = 4\nD_hid = 4\nblocks = 1\nn_samples = 30\nepochs = 1\nomega0 = 3.0\n")
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--eta", "0.05", "--out", str(out), "--seed", "3"]) == 0
    text = capsys.readouterr().out
    assert "eta = 0.05" in text and "seed = 3" in text and "final val accuracy" in text
    assert (out / "metrics.csv").exists()
    assert main(["eval", "--checkpoint", str(out / "best.ckpt"), "--split", "val"]) == 0
    assert "accuracy=" in capsys.readouterr().out
    assert main(["eval", "--checkpoint", str(tmp_path / "none.ckpt")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("N = 12\nspeed = 3\n")
    assert main(["train", "--config", str(bad)]) == 2
    assert ":2: unknown key 'speed'" in capsys.readouterr().err
