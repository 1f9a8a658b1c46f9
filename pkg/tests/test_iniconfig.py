import numpy as np
import pytest

from common.iniconfig import ConfigError, IniConfig


def test_defaults_without_a_file():
    config = IniConfig()
    assert config.configfilepath is None
    params = config.model_params()
    assert params.Vx == 0.364 and params.T == 0.923 and params.Q == 0.625
    assert config.simulation() == (40, 200, 7)
    assert config.a_range() == (-5.0, 0.999)
    assert config.binning() == (0.1, -6.0, 6.0)


def test_flat_file_routes_keys(tmp_path):
    path = tmp_path / "params.ini"
    path.write_text("Vx = 0.3\nR = 0.1\n")
    params = IniConfig(path).model_params()
    assert params.Vx == 0.3
    assert params.T == pytest.approx(0.9)


def test_sectioned_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[Simulation]\nk = 10\nm = 50\n\n[Estimation]\nsgrid = 0:0.1:0.2\n")
    config = IniConfig(path)
    assert config.simulation() == (10, 50, 7)
    np.testing.assert_array_equal(config.s_grid(), [0.0, 0.1, 0.2])
    assert ('Simulation', 'k') in config.explicit


def test_bad_value(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[Model]\nvx = abc\n")
    with pytest.raises(ConfigError, match="vx"):
        IniConfig(path).model_params()


def test_unknown_flat_key(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("colour = blue\n")
    with pytest.raises(ConfigError, match="colour"):
        IniConfig(path)


def test_missing_explicit_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        IniConfig(tmp_path / "nowhere.ini")


def test_parse_range():
    grid = IniConfig.parse_range("-0.4:0.05:0.4")
    assert len(grid) == 17
    assert grid[8] == 0.0
    assert grid[0] == -0.4 and grid[-1] == 0.4
    np.testing.assert_array_equal(IniConfig.parse_range("0.15"), [0.15])
    for bad in ("0:0:1", "1:0.1:0", "a:b:c", "0:1"):
        with pytest.raises(ConfigError):
            IniConfig.parse_range(bad)


def test_bad_a_range():
    config = IniConfig()
    config.set('Estimation', 'arange', '-1:1.5')
    with pytest.raises(ConfigError):
        config.a_range()


def test_save_round_trip(tmp_path):
    config = IniConfig()
    config.set('Model', 'Q', 0.5)
    config.set('Fit', 'restarts', 3)
    path = tmp_path / "sub" / "saved.ini"
    config.save(path)
    again = IniConfig(path)
    assert again.model_params().Q == 0.5
    assert again.getint('Fit', 'restarts') == 3
    assert again.as_dict() == config.as_dict()


def test_fit_bounds():
    config = IniConfig()
    bounds = config.fit_spec_bounds()
    assert bounds['Vx'] == (0.05, 0.5)
    config.set('Fit', 'q', '1:0')
    with pytest.raises(ConfigError):
        config.fit_spec_bounds()
