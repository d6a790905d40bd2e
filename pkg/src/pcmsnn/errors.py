class ConfigError(ValueError):
    """Invalid configuration value, unknown config key, or mismatched shapes."""
