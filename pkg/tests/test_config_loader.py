import pytest
import json
import logging
import sys
import os

# Add the project root to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from dri_toolkit.utils.config_loader import ConfigLoader, project_root
from dri_toolkit.utils.errors import ConfigError
from dri_toolkit.utils.logger import set_log_level, setup_logger


class TestConfigLoader:
    """Test configuration resolution"""

    @pytest.fixture
    def defaults_path(self):
        """Shipped YAML defaults"""
        return str(project_root() / "config" / "experiment.yaml")

    @pytest.fixture
    def write_json(self, tmp_path):
        """Write a dict as an experiment file"""
        def _write(data, name="experiment.json"):
            path = tmp_path / name
            path.write_text(json.dumps(data))
            return str(path)
        return _write

    def test_defaults_only(self, defaults_path):
        """Test the defaults resolve without an experiment file"""
        config = ConfigLoader.resolve(defaults_path)
        assert config['density'] == {'name': 'exponential', 'params': {'rate': 1.0}}
        assert config['grid']['spacing'] == 1 / 512
        assert config['riemann']['tolerance'] == 0.1
        assert config['schema'] == 1

    def test_named_density_replaces_default(self, defaults_path):
        """Test a density naming its family drops the default parameters"""
        experiment = str(project_root() / "config" / "experiments" / "pareto_chain.json")
        config = ConfigLoader.resolve(defaults_path, experiment)
        assert config['density'] == {'name': 'pareto', 'params': {'alpha': 0.6, 'scale': 1.0},
                                     'epsilon': 0.25}
        assert config['grid']['window'] == [0.0, 2048.0]
        assert config['grid']['max_points'] == 4194304
        assert config['command'] == 'envelope-chain'

    def test_partial_density_merges(self, defaults_path):
        """Test a density without a name only updates parameters"""
        config = ConfigLoader.resolve(defaults_path, overrides={'density': {'params': {'rate': 2.0}}})
        assert config['density'] == {'name': 'exponential', 'params': {'rate': 2.0}}

    def test_csv_density_replaces_default(self, defaults_path):
        """Test a tabulated density replaces the default family"""
        config = ConfigLoader.resolve(defaults_path, overrides={'density': {'csv': 'table.csv'}})
        assert config['density'] == {'csv': 'table.csv'}

    def test_environment_layer(self, defaults_path, monkeypatch):
        """Test DRI_ variables nest on double underscores and sit above the file"""
        monkeypatch.setenv("DRI_RIEMANN__TOLERANCE", "0.05")
        monkeypatch.setenv("DRI_LOG_LEVEL", "DEBUG")
        config = ConfigLoader.resolve(defaults_path)
        assert config['riemann']['tolerance'] == 0.05
        assert 'log_level' not in config

    def test_environment_keeps_key_spelling(self, defaults_path, monkeypatch):
        """Test lowercased environment keys map back to the defaults' spelling"""
        monkeypatch.setenv("DRI_RENEWAL__N", "50")
        config = ConfigLoader.resolve(defaults_path)
        assert config['renewal']['N'] == 50
        assert 'n' not in config['renewal']

    def test_overrides_win(self, defaults_path, write_json, monkeypatch):
        """Test command-line overrides beat the environment and the file"""
        monkeypatch.setenv("DRI_RENEWAL__N", "50")
        experiment = write_json({'schema': 1, 'renewal': {'N': 20}})
        config = ConfigLoader.resolve(defaults_path, experiment, {'renewal': {'N': 10}})
        assert config['renewal']['N'] == 10
        assert config['renewal']['x_max'] == 30.0

    def test_unknown_section(self, defaults_path, write_json):
        """Test unknown top-level keys are rejected"""
        with pytest.raises(ConfigError):
            ConfigLoader.resolve(defaults_path, write_json({'schema': 1, 'database': {}}))

    def test_unknown_section_key(self, defaults_path, write_json):
        """Test unknown keys inside a section are rejected"""
        with pytest.raises(ConfigError):
            ConfigLoader.resolve(defaults_path, write_json({'grid': {'spacingg': 0.1}}))
        with pytest.raises(ConfigError):
            ConfigLoader.resolve(defaults_path, write_json({'density': {'family': 'uniform'}}))

    def test_unsupported_schema(self, defaults_path, write_json):
        """Test only schema version 1 is accepted"""
        with pytest.raises(ConfigError):
            ConfigLoader.resolve(defaults_path, write_json({'schema': 2}))

    def test_section_must_be_object(self, defaults_path, write_json):
        """Test sections must be JSON objects"""
        with pytest.raises(ConfigError):
            ConfigLoader.resolve(defaults_path, write_json({'grid': [1, 2]}))

    def test_malformed_and_missing_files(self, defaults_path, tmp_path):
        """Test parse errors and missing files"""
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            ConfigLoader.resolve(defaults_path, str(bad))
        with pytest.raises(FileNotFoundError):
            ConfigLoader.resolve(defaults_path, str(tmp_path / "missing.json"))
        with pytest.raises(FileNotFoundError):
            ConfigLoader.load_yaml_config(str(tmp_path / "missing.yaml"))

    def test_merge_configs(self):
        """Test nested dictionaries merge key by key"""
        merged = ConfigLoader.merge_configs({'a': {'x': 1, 'y': 2}, 'b': 1}, {'a': {'y': 3}}, {'b': 2})
        assert merged == {'a': {'x': 1, 'y': 3}, 'b': 2}

    def test_coerce(self):
        """Test environment strings become JSON scalars when they parse"""
        assert ConfigLoader._coerce("1e-3") == 0.001
        assert ConfigLoader._coerce("true") is True
        assert ConfigLoader._coerce("[1, 2]") == [1, 2]
        assert ConfigLoader._coerce("uniform") == "uniform"

    def test_shipped_experiments_validate(self, defaults_path):
        """Test every shipped experiment file resolves"""
        folder = project_root() / "config" / "experiments"
        for path in sorted(folder.glob("*.json")):
            config = ConfigLoader.resolve(defaults_path, str(path))
            assert config['density'], path.name


class TestLogLevel:
    """Test log level handling"""

    def test_set_log_level(self, monkeypatch):
        """Test the configured level reaches existing package loggers"""
        monkeypatch.delenv("DRI_LOG_LEVEL", raising=False)
        logger = setup_logger("dri_toolkit.test_level")
        set_log_level("WARNING")
        assert logger.level == logging.WARNING
        set_log_level("INFO")

    def test_environment_wins(self, monkeypatch):
        """Test DRI_LOG_LEVEL overrides the configured level"""
        monkeypatch.setenv("DRI_LOG_LEVEL", "ERROR")
        logger = setup_logger("dri_toolkit.test_level_env")
        set_log_level("DEBUG")
        assert logger.level == logging.ERROR
        monkeypatch.delenv("DRI_LOG_LEVEL")
        set_log_level("INFO")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
