import csv
import json
import subprocess
import sys

import pytest

from stegosim.bounds import SWEEP_COLUMNS, achievable_rate
from stegosim.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_rate(capsys):
    code, out, _ = run(capsys, "rate", "--family", "bitflip", "--p", "0.1", "--dp", "0.08")
    assert code == 0
    assert float(out) == achievable_rate("bitflip", 0.1, 0.08)


def test_keyrate(capsys):
    _, plain, _ = run(capsys, "keyrate", "--family", "bitflip", "--p", "0.1", "--dp", "0.08", "--n", "100")
    _, quantum, _ = run(capsys, "keyrate", "--family", "bitflip", "--p", "0.1", "--dp", "0.08", "--n", "100",
                        "--secure", "quantum")
    assert float(plain) == pytest.approx(25.7916, abs=1e-3)
    assert float(quantum) == pytest.approx(float(plain) + 2 * 100 * achievable_rate("bitflip", 0.1, 0.08))


def test_bounds(capsys):
    code, out, _ = run(capsys, "bounds", "--family", "depol", "--p", "0.1", "--dp", "0.1", "--n", "50",
                       "--delta", "0", "--eps", "0")
    doc = json.loads(out)
    assert code == 0 and doc["family"] == "depolarizing"
    assert doc["upper_bound"] == pytest.approx(50 * doc["rate"])


def test_simulate_json_is_reproducible(capsys):
    argv = ["simulate", "--family", "bitflip", "--p", "0.05", "--dp", "0.2", "--n", "12", "--rate", "0.26",
            "--trials", "100", "--seed", "18446744073709551615", "--key-seed", "ab12"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second
    doc = json.loads(first)
    assert doc["trials"] == 100 and doc["seed"] == 2**64 - 1
    assert "wall_clock" not in doc
    _, timed, _ = run(capsys, *argv, "--timing")
    assert "wall_clock" in json.loads(timed)


def test_simulate_with_code(capsys):
    code, out, _ = run(capsys, "simulate", "--family", "depol", "--p", "0.02", "--dp", "0.05", "--n", "5",
                       "--messages", "2", "--trials", "50", "--seed", "1", "--key-seed", "00", "--code", "five_qubit")
    assert code == 0 and json.loads(out)["erasures"] is not None


def test_simulate_rejects_bad_input(capsys):
    code, _, err = run(capsys, "simulate", "--family", "bitflip", "--p", "0.6", "--dp", "0.1", "--n", "8",
                       "--messages", "2", "--trials", "5", "--seed", "1", "--key-seed", "00")
    assert code == 2 and "singular" in err
    with pytest.raises(SystemExit):
        main(["simulate", "--family", "bitflip", "--p", "0.1", "--dp", "0.1", "--n", "8", "--messages", "2",
              "--trials", "5", "--seed", "-1", "--key-seed", "00"])
    with pytest.raises(SystemExit):
        main(["simulate", "--family", "bitflip", "--p", "0.1", "--dp", "0.1", "--n", "8", "--messages", "2",
              "--rate", "0.1", "--trials", "5", "--seed", "1", "--key-seed", "00"])


def test_secrecy(capsys):
    _, out, _ = run(capsys, "secrecy", "--family", "bitflip", "--p", "0.1", "--dp", "0.1", "--n", "8",
                    "--mode", "exact", "--exact")
    doc = json.loads(out)
    assert doc["deficit"] < 1e-12 and doc["verdict"] == "SECURE"
    code, _, err = run(capsys, "secrecy", "--family", "depol", "--p", "0.1", "--dp", "0.1", "--n", "30",
                       "--mode", "exact", "--exact")
    assert code == 2 and "cap" in err


def test_sweep(tmp_path, capsys):
    config = tmp_path / "grid.json"
    config.write_text(json.dumps({"families": ["bitflip", "depol"], "p": [0.05, 0.1], "dp": [0.1],
                                  "N": [16], "delta": [0.0, 0.01], "eps": 0.0}))
    out = tmp_path / "grid.csv"
    code, msg, _ = run(capsys, "sweep", "--config", str(config), "--out", str(out))
    assert code == 0 and "8 rows" in msg
    with open(out, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert len(rows) == 8


def test_sweep_bad_config(tmp_path, capsys):
    config = tmp_path / "grid.json"
    config.write_text(json.dumps({"families": ["bitflip"], "p": [0.1]}))
    code, _, err = run(capsys, "sweep", "--config", str(config), "--out", str(tmp_path / "x.csv"))
    assert code == 2 and "dp" in err


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "stegosim.cli", "rate", "--family", "depol", "--p", "0.1",
                           "--dp", "0.1"], capture_output=True, text=True, check=True)
    assert float(proc.stdout) == pytest.approx(0.41143, abs=1e-4)
