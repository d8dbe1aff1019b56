from .config import ConfigError, ConfigValidationResult, validate_config

__all__ = ["ConfigError", "ConfigValidationResult", "validate_config"]
