import math

import pytest

from pcrta.config import BUNDLED, ConfigError, bundled_text, load_config, parse_config

MINIMAL = """
[coil]
n_parallel = 1
n_turns = 2
inner_radius = 0.03
tape_width = 4e-3
tape_thickness = 0.1e-3
contact_resistivity = 5e-9
[material]
jc0 = 3e8
[joints]
input = 1e-7
output = 1e-7
[mesh]
elements_per_width = 4
[drive]
ramp_rate = 10
level = 20
hold = 1
"""


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_configs_parse_strictly(name):
    cfg = load_config(name)
    assert cfg.name + ".cfg" == name


def test_table1_config():
    cfg = load_config("table1.cfg")
    assert cfg.coil.n_turns == 30 and cfg.coil.n_parallel == 2
    assert cfg.scenario.profile.times[1] == pytest.approx(50.0 / 6.92)


def test_table3_config_time_step():
    cfg = load_config("table3_cycle.cfg")
    assert cfg.solver.dt == 0.01
    assert cfg.scenario.profile.times == (0.0, 5.0, 20.0, 20.5, 35.5)
    assert cfg.coil.contact_resistivity == pytest.approx(50e-6 * 1e-4)


def test_missing_coil_section_is_named():
    text = MINIMAL.split("[material]")[1]
    with pytest.raises(ConfigError, match=r"\[coil\]"):
        parse_config("[material]" + text)


def test_unknown_key_strict_and_lenient(caplog):
    text = MINIMAL.replace("[mesh]", "[mesh]\nelement_per_width = 3")
    with pytest.raises(ConfigError, match="element_per_width"):
        parse_config(text)
    cfg = parse_config(text, strict=False)
    assert cfg.elements_per_width == 4
    assert "element_per_width" in caplog.text


def test_invariant_violation_surfaces():
    with pytest.raises(ConfigError, match="joints.input"):
        parse_config(MINIMAL.replace("input = 1e-7", "input = 1e-7, 1e-7"))


def test_insulated_flag():
    cfg = parse_config(MINIMAL.replace("contact_resistivity = 5e-9", "insulated = yes"))
    assert math.isinf(cfg.coil.contact_resistivity)


def test_background_calibrated_in_config():
    cfg = load_config("ac_disturbance.cfg")
    assert cfg.scenario.background.t_start == 30.0
    assert cfg.scenario.closed_loop.delta_r == pytest.approx(-280e-9)


def test_bundled_text_available():
    assert "[coil]" in bundled_text("table1.cfg")
