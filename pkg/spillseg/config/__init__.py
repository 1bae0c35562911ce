"""Configuration layer (settings, loaders, defaults)."""
