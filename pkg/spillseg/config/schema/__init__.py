"""Schema models and validators for configuration."""
