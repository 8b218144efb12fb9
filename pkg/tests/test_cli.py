import json
from fractions import Fraction

import pytest

from czweights.cli import UsageError, main, parse_list, parse_rational, read_config


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize(
    "text, value",
    [("2^-10", Fraction(1, 1024)), ("1/1024", Fraction(1, 1024)), ("0.5", Fraction(1, 2)), ("3", Fraction(3)), ("2^(-3)", Fraction(1, 8))],
)
def test_parse_rational(text, value):
    assert parse_rational(text) == value


def test_parse_errors():
    with pytest.raises(UsageError):
        parse_rational("two")
    with pytest.raises(UsageError):
        parse_list("1,x")
    assert parse_list("2, 2.5,3") == [2.0, 2.5, 3.0]


def test_read_config(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\np-hint = 4\ndelta = 2^-8  # inline\n\n")
    assert read_config(cfg) == {"p_hint": "4", "delta": "2^-8"}
    cfg.write_text("no equals sign\n")
    with pytest.raises(UsageError):
        read_config(cfg)


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("n = 3\ndelta = 2^-6\n")
    code, out, _ = run(capsys, "build", "--config", str(cfg), "--delta", "2^-7")
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["n"] == "3"
    assert doc["config"]["delta"] == [1, 128]  # resolved exactly
    assert doc["config"]["p_hint"] == "3"  # built-in default
    assert "out" not in doc["config"]
    assert doc["audit"]["passed"] is True


@pytest.mark.parametrize(
    "argv",
    [
        ["build", "--n", "0"],
        ["build", "--n", "4", "--epsilon", "1"],
        ["build"],
        ["build", "--n", "4", "--bogus", "1"],
        ["nope"],
        ["sweep", "--p", "1"],
        ["ar", "--n", "3", "--r", "1"],
    ],
)
def test_usage_errors(argv, capsys):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("colour = blue\n")
    assert run(capsys, "build", "--n", "3", "--config", str(cfg))[0] == 2


def test_certify_output(capsys):
    code, out, _ = run(capsys, "certify", "--n", "4", "--tests", "10")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == "czweights.run/1"
    assert doc["residual"]["tests"] == 10
    assert doc["residual"]["passed"] is True
    assert doc["certificate"]["N"] == 4


def test_ar_output(capsys):
    code, out, _ = run(capsys, "ar", "--n", "3", "--r", "2,3")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["reports"]) == 2


def test_solve(tmp_path, capsys):
    w = tmp_path / "w.txt"
    F = tmp_path / "F.txt"
    w.write_text("0 1/2 1\n1/2 1 1/2\n")
    F.write_text("0 1/2 1\n1/2 1 0\n")
    code, out, _ = run(capsys, "solve", "--w", str(w), "--F", str(F))
    assert code == 0
    sol = json.loads(out)["solution"]
    assert sol["flux_constant"] == [-1, 3]
    code, _, _ = run(capsys, "solve", "--w", str(w), "--F", str(F), "--p", "3", "--s", "2")
    assert code == 2
    assert run(capsys, "solve", "--w", str(w), "--F", str(F), "--p", "3", "--s", "2", "--allow-other-s", "true")[0] == 0


def test_sweep_control_is_exhausted(capsys):
    code, out, _ = run(capsys, "sweep", "--p", "2", "--s", "1", "--n-max", "6", "--control", "false")
    assert code == 0
    assert out.rstrip().splitlines()[-1].startswith("# n_star=exhausted")


def test_sweep_to_directory_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(capsys, "sweep", "--n-max", "5", "--seed", "7", "--out", str(d))[0] == 0
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
    assert "# config.seed=7" in (a / "sweep.csv").read_text()
