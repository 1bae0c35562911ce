"""File adapters (tiles, checkpoints, CSV reports)."""
