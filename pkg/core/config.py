"""
Configuration management for fracplace.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from core.graph import DEFAULT_PATH_CAP
from core.optimizer import DEFAULT_CANDIDATE_CAP, OptimizerConfig
from utils.exceptions import ConfigError, ParameterError

_SAVED_KEYS = (
    "granularity",
    "max_iterations",
    "restarts",
    "move_step",
    "initial_temperature",
    "decay",
    "seed",
    "lattice",
    "workers",
    "candidate_cap",
    "path_cap",
    "human_digits",
    "machine_digits",
    "log_level",
    "log_file",
)


@dataclass
class Config:
    """Configuration class for fracplace."""

    # Optimizer defaults, overridable per command
    granularity: int = 10
    max_iterations: int = 2000
    restarts: int = 10
    move_step: float = 0.1
    initial_temperature: float = 0.05
    decay: float = 0.995
    seed: int = 0
    lattice: bool = False
    workers: int = 1

    # Guards
    candidate_cap: int = DEFAULT_CANDIDATE_CAP
    path_cap: int = DEFAULT_PATH_CAP

    # Output settings
    human_digits: int = 4
    machine_digits: int = 17

    # Logging settings
    log_level: str = "INFO"
    log_file: Optional[str] = None

    _config_file: Optional[Path] = field(default=None, init=False, repr=False)

    @classmethod
    def create(cls, config_path: Optional[str] = None) -> "Config":
        """Create a Config instance and load from file."""
        config = cls()
        config._config_file = config._get_config_file_path(config_path)
        config._load_config()
        config.validate()
        return config

    def _get_config_file_path(self, custom_path: Optional[str] = None) -> Path:
        """Get the configuration file path."""
        if custom_path:
            return Path(custom_path)
        return Path.home() / ".fracplace" / "config.json"

    def _load_config(self) -> None:
        """Load configuration from file."""
        if not self._config_file or not self._config_file.exists():
            return

        try:
            with open(self._config_file, 'r', encoding='utf-8') as f:
                config_data = json.load(f)
        except (json.JSONDecodeError, OSError) as e:
            raise ConfigError(f"Failed to load config file {self._config_file}: {e}")

        if not isinstance(config_data, dict):
            raise ConfigError(f"Config file {self._config_file} must hold a JSON object")
        for key, value in config_data.items():
            if key in _SAVED_KEYS:
                setattr(self, key, value)

    def save_config(self) -> None:
        """Save current configuration to file."""
        if not self._config_file:
            return

        self._config_file.parent.mkdir(parents=True, exist_ok=True)
        try:
            with open(str(self._config_file), 'w', encoding='utf-8') as f:
                json.dump(self.to_dict(), f, indent=4)
        except OSError as e:
            raise ConfigError(f"Failed to save config file {self._config_file}: {e}")

    def get_log_file_path(self) -> Optional[Path]:
        """Get the log file path if logging to file is enabled."""
        if self.log_file:
            return Path(self.log_file)
        return None

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary."""
        return {key: getattr(self, key) for key in _SAVED_KEYS}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Config":
        """Create Config instance from dictionary."""
        config = cls()
        for key, value in data.items():
            if key in _SAVED_KEYS:
                setattr(config, key, value)
        return config

    def optimizer_config(self, **overrides: Any) -> OptimizerConfig:
        """
        Build the optimizer settings, applying non-None overrides such as
        command line flags.

        Raises:
            ConfigError: If the resulting settings are out of range.
        """
        settings = {
            "granularity": self.granularity,
            "max_iterations": self.max_iterations,
            "restarts": self.restarts,
            "move_step": self.move_step,
            "initial_temperature": self.initial_temperature,
            "decay": self.decay,
            "seed": self.seed,
            "lattice": self.lattice,
            "workers": self.workers,
            "candidate_cap": self.candidate_cap,
        }
        settings.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return OptimizerConfig(**settings)
        except (ParameterError, TypeError) as e:
            raise ConfigError(str(e)) from e

    def validate(self) -> None:
        """Validate configuration values."""
        try:
            self._check_values()
        except (TypeError, AttributeError) as e:
            raise ConfigError(f"Invalid configuration value type: {e}") from e

    def _check_values(self) -> None:
        try:
            self.optimizer_config()
        except ConfigError as e:
            raise ConfigError(f"Invalid optimizer settings: {e}")

        if self.path_cap <= 0:
            raise ConfigError("Path cap must be positive")

        if not 1 <= self.human_digits <= 17:
            raise ConfigError("Human digits must be between 1 and 17")

        if not 1 <= self.machine_digits <= 17:
            raise ConfigError("Machine digits must be between 1 and 17")

        if self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            raise ConfigError(f"Invalid log level: {self.log_level}")
