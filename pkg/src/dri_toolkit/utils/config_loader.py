import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

from .errors import ConfigError

SCHEMA_VERSION = 1

# Top-level keys accepted in a JSON experiment config
EXPERIMENT_KEYS = {
    'schema', 'command', 'density', 'grid', 'riemann', 'convolution',
    'chain', 'renewal', 'heavy_tail', 'local_clt', 'simulation', 'output', 'monitoring',
}

DENSITY_KEYS = {'name', 'params', 'epsilon', 'csv'}


class ConfigLoader:
    """Load, merge and validate experiment configuration"""

    @staticmethod
    def load_yaml_config(file_path: str) -> Dict[str, Any]:
        """Load YAML configuration file"""
        try:
            with open(file_path, 'r') as file:
                return yaml.safe_load(file) or {}
        except FileNotFoundError:
            raise FileNotFoundError(f"Config file not found: {file_path}")
        except yaml.YAMLError as e:
            raise ConfigError(f"Error parsing YAML config: {e}")

    @staticmethod
    def load_json_config(file_path: str) -> Dict[str, Any]:
        """Load JSON configuration file"""
        try:
            with open(file_path, 'r') as file:
                return json.load(file)
        except FileNotFoundError:
            raise FileNotFoundError(f"Config file not found: {file_path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Error parsing JSON config: {e}")

    @staticmethod
    def load_environment_variables(prefix: str = "DRI_", env_file: Optional[str] = None) -> Dict[str, Any]:
        """Load environment variables with given prefix, nesting on double underscores"""
        load_dotenv(env_file, override=False)
        config: Dict[str, Any] = {}

        for key, value in os.environ.items():
            if not key.startswith(prefix) or key == f"{prefix}LOG_LEVEL":
                continue
            path = key[len(prefix):].lower().split('__')
            node = config
            for part in path[:-1]:
                node = node.setdefault(part, {})
            node[path[-1]] = ConfigLoader._coerce(value)

        return config

    @staticmethod
    def merge_configs(*configs: Dict[str, Any]) -> Dict[str, Any]:
        """Merge multiple configuration dictionaries"""
        merged: Dict[str, Any] = {}

        for config in configs:
            for key, value in config.items():
                if isinstance(value, dict) and key in merged and isinstance(merged[key], dict):
                    merged[key] = ConfigLoader.merge_configs(merged[key], value)
                else:
                    merged[key] = value

        return merged

    @staticmethod
    def validate_experiment_config(config: Dict[str, Any], defaults: Dict[str, Any]) -> None:
        """Reject unknown keys and unsupported schema versions"""
        schema = config.get('schema', SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ConfigError(f"Unsupported config schema: {schema}")

        unknown = set(config) - EXPERIMENT_KEYS
        if unknown:
            raise ConfigError(f"Unknown config keys: {sorted(unknown)}")

        for section, value in config.items():
            if section in ('schema', 'command'):
                continue
            if not isinstance(value, dict):
                raise ConfigError(f"Config section '{section}' must be an object")
            allowed = DENSITY_KEYS if section == 'density' else set(defaults.get(section, {}))
            extra = set(value) - allowed
            if extra:
                raise ConfigError(f"Unknown keys in '{section}': {sorted(extra)}")

    @staticmethod
    def resolve(default_path: str, experiment_path: Optional[str] = None,
                overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """Resolve defaults, experiment file, environment and CLI overrides in that order"""
        defaults = ConfigLoader.load_yaml_config(default_path)
        experiment: Dict[str, Any] = {}
        if experiment_path:
            experiment = ConfigLoader.load_json_config(experiment_path)
            ConfigLoader.validate_experiment_config(experiment, defaults)
            experiment = {k: v for k, v in experiment.items() if k != 'schema'}

        env = ConfigLoader.load_environment_variables()
        env = {k: ConfigLoader._match_keys(v, defaults.get(k, {})) for k, v in env.items() if k in EXPERIMENT_KEYS}
        layers = [experiment, env, overrides or {}]
        resolved = ConfigLoader.merge_configs(defaults, *layers)

        # a density naming its own family replaces the default one instead of merging params
        density = dict(defaults.get('density', {}))
        for layer in layers:
            block = layer.get('density')
            if not isinstance(block, dict):
                continue
            if 'name' in block or 'csv' in block:
                density = dict(block)
            else:
                density = ConfigLoader.merge_configs(density, block)
        resolved['density'] = density
        resolved['schema'] = SCHEMA_VERSION
        return resolved

    @staticmethod
    def _match_keys(section: Any, defaults: Any) -> Any:
        """Restore the spelling of keys the environment lowercased (renewal.n -> renewal.N)"""
        if not isinstance(section, dict) or not isinstance(defaults, dict):
            return section
        spelling = {key.lower(): key for key in defaults}
        return {spelling.get(key, key): ConfigLoader._match_keys(value, defaults.get(spelling.get(key, key)))
                for key, value in section.items()}

    @staticmethod
    def _coerce(value: str) -> Any:
        """Interpret environment strings as JSON scalars when possible"""
        try:
            return json.loads(value)
        except json.JSONDecodeError:
            return value


def project_root() -> Path:
    """Repository root containing config/ and src/"""
    return Path(__file__).resolve().parents[3]
