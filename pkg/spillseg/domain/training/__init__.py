"""Optimiser, learning-rate schedule and the epoch loop."""
