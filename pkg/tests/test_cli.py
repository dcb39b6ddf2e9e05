import numpy as np
import pytest

from pcrta import cli
from pcrta.io import read_csv

CFG = """
[run]
name = tiny
[coil]
n_parallel = 2
n_turns = 3
inner_radius = 0.03
tape_width = 4e-3
tape_thickness = 0.095e-3
contact_resistivity = 1e-9
[material]
ic_per_tape = 100
[joints]
input = 2e-7, 3e-7
output = 3e-7, 2e-7
[mesh]
elements_per_width = 4
[drive]
ramp_rate = 50
level = 20
hold = 0.4
[solver]
dt = 0.05
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "tiny.cfg"
    p.write_text(CFG)
    return p


def test_run_writes_csv_and_snapshots(cfg_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", str(cfg_path), "--output-dir", str(out), "--snapshots", "on",
                     "--threads", "1", "--seed", "7"]) == 0
    data, units = read_csv(out / "tiny.csv")
    assert units["I_in_1"] == "A" and units["V_coil"] == "V"
    assert len(list((out / "tiny_snapshots").iterdir())) == data["t"].size
    assert "losses" in capsys.readouterr().out


def test_rerun_is_byte_identical(cfg_path, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["run", str(cfg_path), "--output-dir", str(a), "--cadence", "0.1"])
    cli.main(["run", str(cfg_path), "--output-dir", str(b), "--cadence", "0.1"])
    assert (a / "tiny.csv").read_bytes() == (b / "tiny.csv").read_bytes()
    data, _ = read_csv(a / "tiny.csv")
    assert np.allclose(np.diff(data["t"]), 0.1)


def test_compare_reports_deviation(cfg_path, tmp_path, capsys):
    assert cli.main(["compare", str(cfg_path), "--output-dir", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "I_in_1" in text and "rms dev" in text
    data, _ = read_csv(tmp_path / "tiny_compare.csv")
    assert np.allclose(data["I_in_1_solver"], data["I_in_1_oracle"], atol=0.5)


def test_strict_mode_rejects_typo(cfg_path, tmp_path, capsys):
    cfg_path.write_text(CFG.replace("[mesh]", "[mesh]\nelements = 3"))
    assert cli.main(["run", str(cfg_path), "--output-dir", str(tmp_path)]) == 2
    assert "elements" in capsys.readouterr().err
    assert cli.main(["run", str(cfg_path), "--lenient", "--output-dir", str(tmp_path)]) == 0


def test_calibrate_bg(capsys):
    assert cli.main(["calibrate-bg", "ac_disturbance.cfg", "--target", "0.0167"]) == 0
    out = capsys.readouterr().out
    assert "16.7 mT" in out


def test_calibrate_bg_needs_background(cfg_path, capsys):
    assert cli.main(["calibrate-bg", str(cfg_path)]) == 2


def test_bad_snapshot_flag():
    with pytest.raises(SystemExit):
        cli.main(["run", "x.cfg", "--snapshots", "maybe"])
