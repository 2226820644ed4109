import pytest

from edgesense.config import SimConfig, config_hash, dump_config, parse_config
from edgesense.errors import ParseError, ValidationError


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("")
    cfg = parse_config(p)
    assert cfg == SimConfig()
    t = cfg.topology
    assert (t.n_servers, t.n_devices, t.n_sensors, t.n_adjustable) == (5, 28, 30, 24)
    assert (t.width, t.height, t.radius_min, t.radius_max) == (100.0, 100.0, 15.0, 25.0)
    assert (cfg.battery.capacity_min, cfg.battery.capacity_max) == (2000.0, 4000.0)


def test_override_beats_file(tmp_path):
    p = tmp_path / "a.cfg"
    p.write_text("seed = 3\nmarl.gamma = 0.9  # trailing comment\n")
    cfg = parse_config(p, {"seed": "7"})
    assert cfg.seed == 7
    assert cfg.marl.gamma == 0.9


def test_bare_unique_key_resolves():
    assert parse_config(None, {"radius_max": "22"}).topology.radius_max == 22.0


def test_malformed_value_names_key_and_line(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("# header\nradius_max = abc\n")
    with pytest.raises(ParseError) as info:
        parse_config(p)
    assert info.value.key == "radius_max"
    assert info.value.line == 2
    assert "radius_max" in str(info.value)


def test_unknown_key_rejected():
    with pytest.raises(ParseError, match="unknown key"):
        parse_config(None, {"topology.colour": "1"})


def test_line_without_equals(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("seed 4\n")
    with pytest.raises(ParseError) as info:
        parse_config(p)
    assert info.value.line == 1


@pytest.mark.parametrize("key,value", [
    ("topology.n_adjustable", "31"),
    ("topology.radius_min", "30"),
    ("topology.radius_max", "60"),
    ("marl.gamma", "1.5"),
    ("marl.clip", "-0.1"),
    ("marl.lr", "0"),
    ("battery.capacity_min", "5000"),
    ("policy", "greedy"),
])
def test_validation_names_bad_key(key, value):
    with pytest.raises(ValidationError) as info:
        parse_config(None, {key: value})
    assert info.value.key.split(".")[-1] == key.split(".")[-1] or info.value.key == key


def test_dump_round_trips(tmp_path):
    cfg = parse_config(None, {"seed": "9", "marl.lr": "0.01", "policy": "comp"})
    p = tmp_path / "dump.cfg"
    p.write_text(dump_config(cfg))
    again = parse_config(p)
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_hash_changes_with_any_field():
    assert config_hash(SimConfig()) != config_hash(parse_config(None, {"energy.voltage": "3.3"}))
