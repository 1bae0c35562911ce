"""Segmentation branches and the fused network."""
