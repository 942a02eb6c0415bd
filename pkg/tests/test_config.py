import pytest

from ymhlab.config import load, parse_text, resolve
from ymhlab.errors import ConfigError


def test_parse_text_and_comments():
    raw = parse_text("# header\ngrid.nx = 32  # inline\n\nflow.c=0.5\n")
    assert raw == {"grid.nx": "32", "flow.c": "0.5"}


@pytest.mark.parametrize("text", ["grid.nx 32", "nx = 3"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_text(text)


def test_defaults_and_types():
    cfg, warnings = resolve({"grid.nx": "32", "scan.c_values": "0.2, 0.5"}, "stability-scan")
    assert cfg["grid.nx"] == 32 and cfg["grid.ny"] == 16
    assert cfg["scan.c_values"] == [0.2, 0.5]
    assert warnings == []


def test_unknown_key_is_error():
    with pytest.raises(ConfigError):
        resolve({"grid.nz": "4"})


def test_unknown_and_unused_sections_warn():
    _, warnings = resolve({"plot.style": "x", "psi.c_unstable": "0.1"}, "flow-pair")
    assert len(warnings) == 2


@pytest.mark.parametrize("key,value", [("grid.a", "0"), ("flow.dt", "-1"), ("grid.nx", "2.5"),
                                       ("flow.scheme", "rk2"), ("fiber.model", "torus")])
def test_validation(key, value):
    with pytest.raises(ConfigError):
        resolve({key: value})


def test_load_file_and_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("grid.nx = 8\nflow.c = 0.25\n")
    cfg, _ = load(p, ["flow.c=0.75"], "flow-pair")
    assert cfg["grid.nx"] == 8 and cfg["flow.c"] == 0.75
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.cfg")
    with pytest.raises(ConfigError):
        load(None, ["flowc"])
